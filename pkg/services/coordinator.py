"""
Command loop between the trusted node and the two servers

The trusted node is the gateway plus the dealer. It sends each server a JSON
COMMAND frame over that server's dealer channel, then serves triple and OT
requests until both servers answer with RESULT.
"""
import json
import logging
import time
from dataclasses import asdict

from config import GatewayConfig
from models.report import counter_delta
from models.ring_share import RingShare
from models.shared_point import SharedPoint
from services.dealer import TrustedDealer
from services.plaintext_oracle import PlainPoint
from services.ppod_protocol import Gateway, PPODServer, SessionParams, audit_decodes, session_setup
from services.session import PartySession
from services.transport import Tag
from utils.errors import PPODError, ParameterError, ProtocolError

logger = logging.getLogger(__name__)


def _encode(message):
    return json.dumps(message, sort_keys=True).encode('utf-8')


def _decode(payload):
    try:
        return json.loads(payload.decode('utf-8'))
    except ValueError:
        raise ProtocolError('Unreadable command frame')


class Coordinator:
    """
    The trusted node's side of a session

    Keeps the rounded cleartext stream it fed the servers so a run can be
    checked against the plaintext oracles afterwards.
    """

    def __init__(self, config, channels, rng):
        self.config = config.check()
        self.rng = rng
        self.gateway = Gateway(config, rng)
        self.dealer = TrustedDealer(channels, rng, config.bits)
        self.stream = []
        self.buffer = []
        self.initialised = False
        self.last_outliers = []

    def command(self, op, message0=None, message1=None):
        """
        Send one command to both servers and collect their answers

        Raises:
            ProtocolError: a server failed or the two answers disagree
        """
        for channel, message in zip(self.dealer.channels, (message0, message1)):
            channel.send(Tag.COMMAND, _encode(dict(message or {}, op=op)))
        _, payload0, payload1 = self.dealer.serve_until((Tag.RESULT,))
        result0, result1 = _decode(payload0), _decode(payload1)
        for key in ('outliers', 'knn_ids', 'assertion'):
            if result0.get(key) != result1.get(key):
                raise ProtocolError(f'{op}: servers disagree on {key}')
        return result0, result1

    def setup(self):
        params = session_setup(self.config, self.rng)
        messages = [{'config': self.config.to_dict(), 'radius': p.radius.value,
                     'epsilon': p.epsilon.value, 'prime': p.prime} for p in params]
        self.command('setup', *messages)
        logger.info('session set up: W=%d S=%d k=%d, %d dims',
                    self.config.window, self.config.slide, self.config.k, self.config.dims)

    def ingest(self, values, point_id=None):
        """
        Preprocess one raw point into the pending batch

        Returns:
            the rounded PlainPoint
        """
        rounded = self.gateway.round_point(values)
        share0, share1 = self.gateway.share_point(rounded, point_id)
        plain = PlainPoint(share0.id, tuple(rounded), share0.count)
        self.stream.append(plain)
        self.buffer.append((share0, share1))
        return plain

    @property
    def ready(self):
        """Whether the pending batch is large enough for the next phase"""
        needed = self.config.slide if self.initialised else self.config.window
        return len(self.buffer) >= needed

    def flush(self):
        """
        Run initialise or one slide on the pending batch

        Returns:
            (phase name, first server's result dict)
        """
        if self.initialised:
            batch, op = self.config.slide, 'slide'
        else:
            batch, op = self.config.window, 'initialise'
        if len(self.buffer) < batch:
            raise ParameterError(f'{op} needs {batch} points, {len(self.buffer)} pending')
        points, self.buffer = self.buffer[:batch], self.buffer[batch:]
        result, _ = self.command(op, {'points': [p[0].to_dict() for p in points]},
                                 {'points': [p[1].to_dict() for p in points]})
        self.initialised = True
        self.last_outliers = result['outliers']
        logger.info('%s: %d outliers', op, len(result['outliers']))
        return op, result

    def query(self, values, epsilon=None):
        """Outlier-vicinity query with a fresh sharing of epsilon"""
        if not self.initialised:
            raise ParameterError('Query before initialisation')
        epsilon = self.config.epsilon if epsilon is None else epsilon
        rounded = self.gateway.round_point(values)
        share0, share1 = self.gateway.share_query(rounded)
        eps0, eps1 = self.gateway.share_threshold(epsilon)
        result, _ = self.command('query', {'point': share0.to_dict(), 'epsilon': eps0.value},
                                 {'point': share1.to_dict(), 'epsilon': eps1.value})
        return bool(result['assertion']), tuple(rounded)

    def report(self):
        """Both servers' counters, channel metrics and decode audits"""
        return self.command('report')

    def close(self):
        try:
            self.command('close')
        finally:
            self.dealer.close()


class ServerLoop:
    """Dispatches the trusted node's commands to one PPODServer"""

    def __init__(self, party, peer, dealer, rng):
        self.party = party
        self.peer = peer
        self.dealer = dealer
        self.rng = rng
        self.session = None
        self.server = None

    def _points(self, items):
        return [SharedPoint.from_dict(item, self.party, self.session.bits) for item in items]

    def handle(self, message):
        op = message.get('op')
        if op == 'setup':
            config = GatewayConfig.from_dict(message['config']).check()
            self.session = PartySession(self.party, config, self.peer, self.dealer, self.rng)
            params = SessionParams(RingShare(int(message['radius']), self.party, config.bits),
                                   RingShare(int(message['epsilon']), self.party, config.bits),
                                   int(message.get('prime', 0)))
            with self.session.phase('setup'):
                self.server = PPODServer(self.session, params)
            return {}
        if self.server is None:
            raise ProtocolError(f'{op} before setup')

        before = self.session.counters.to_dict()
        started = time.perf_counter()
        if op == 'initialise':
            result = {'outliers': self.server.initialise(self._points(message['points']))}
        elif op == 'slide':
            outliers, knn_ids = self.server.slide(self._points(message['points']))
            result = {'outliers': outliers, 'knn_ids': knn_ids}
        elif op == 'query':
            point = SharedPoint.from_dict(message['point'], self.party, self.session.bits)
            epsilon = RingShare(int(message['epsilon']), self.party, self.session.bits)
            result = {'assertion': self.server.query(point, epsilon)}
        elif op == 'report':
            counts, violations = audit_decodes(self.session.decode_log)
            return {
                'counters': self.session.counters.to_dict(),
                'peer': self.session.peer.metrics.to_dict(),
                'dealer': self.session.dealer.metrics.to_dict(),
                'decodes': counts,
                'violations': [asdict(v) for v in violations],
            }
        else:
            raise ProtocolError(f'Unknown command {op!r}')
        result['work'] = counter_delta(self.session.counters.to_dict(), before)
        result['seconds'] = time.perf_counter() - started
        return result

    def run(self):
        """Serve commands until close; report failures to the trusted node"""
        while True:
            message = _decode(self.dealer.recv(Tag.COMMAND))
            op = message.get('op')
            if op == 'close':
                self.dealer.send(Tag.RESULT, _encode({'op': 'close'}))
                logger.debug('party %d: closed', self.party)
                return self.session
            try:
                result = self.handle(message)
            except (PPODError, ValueError) as e:
                logger.error('party %d: %s failed: %s', self.party, op, e)
                try:
                    self.dealer.send(Tag.RESULT, _encode({'op': op, 'error': str(e)}))
                finally:
                    self.peer.close()
                raise
            self.dealer.send(Tag.RESULT, _encode(dict(result, op=op)))


def run_server(party, peer, dealer, rng):
    """Run one server until the trusted node closes the session"""
    return ServerLoop(party, peer, dealer, rng).run()
