"""
Per-party protocol session and the in-process two-party harness
"""
import logging
import random
import struct
import threading
from contextlib import contextmanager

from models.report import DecodeRecord, WorkCounters
from services.dealer import TrustedDealer
from services.garbling import new_delta
from services.ring_sharing import TriplePool, decode_triples, mul_batch
from services.transport import Tag, queue_channel_pair
from utils.errors import PPODError

logger = logging.getLogger(__name__)

# Largest triple batch requested in one dealer frame
TRIPLE_CHUNK = 1 << 20


def make_rngs(seed=None):
    """Random sources of (trusted node, server 0, server 1)"""
    if seed is None:
        return random.SystemRandom(), random.SystemRandom(), random.SystemRandom()
    return random.Random(seed), random.Random(seed + 1), random.Random(seed + 2)


class PartySession:
    """
    State one server keeps for a protocol session

    Party 0 is the garbler of every circuit, party 1 the evaluator.
    """

    def __init__(self, party, config, peer, dealer, rng):
        self.party = party
        self.config = config
        self.bits = config.bits
        self.peer = peer
        self.dealer = dealer
        self.rng = rng
        self.counters = WorkCounters()
        self.decode_log = []
        self.used_masks = set()
        self.delta = new_delta(rng) if party == 0 else None
        self.pool = TriplePool(party, config.bits, self._request_triples,
                               config.triple_low_water, config.triple_refill)

    @property
    def is_garbler(self):
        return self.party == 0

    def _request_triples(self, count):
        triples = []
        while len(triples) < count:
            chunk = min(TRIPLE_CHUNK, count - len(triples))
            self.dealer.send(Tag.TRIPLE_REQUEST, struct.pack('<I', chunk))
            triples += decode_triples(self.dealer.recv(Tag.TRIPLE_BATCH), self.party, self.bits,
                                      start_index=self.pool.issued + len(triples))
        return triples

    def take_triples(self, count):
        triples = self.pool.take(count)
        self.counters.triples_consumed += count
        return triples

    def multiply(self, a_values, b_values):
        """Beaver products of this party's share values, one exchange"""
        triples = self.take_triples(len(a_values))
        return mul_batch(a_values, b_values, triples, self.peer, self.party, self.bits)

    def record_decode(self, circuit, bundle):
        self.decode_log.append(DecodeRecord(self.party, circuit, bundle.name,
                                            bundle.destination, bundle.category))

    @contextmanager
    def phase(self, name):
        with self.peer.phase(name), self.dealer.phase(name):
            yield

    def metrics_snapshot(self):
        return self.peer.metrics.snapshot()

    def abort(self):
        self.peer.close()
        self.dealer.close()


def metrics_snapshot(session):
    """Consistent copy of the session's peer-channel metrics"""
    return session.metrics_snapshot()


def open_inproc(config, seed=None, timeout=None):
    """
    Wire two sessions and a dealer over in-process channels

    Returns:
        (session 0, session 1, dealer, trusted node rng)
    """
    trusted_rng, rng0, rng1 = make_rngs(seed)
    peer0, peer1 = queue_channel_pair('p0-peer', 'p1-peer', timeout)
    up0, down0 = queue_channel_pair('p0-dealer', 'dealer-p0', timeout)
    up1, down1 = queue_channel_pair('p1-dealer', 'dealer-p1', timeout)
    session0 = PartySession(0, config, peer0, up0, rng0)
    session1 = PartySession(1, config, peer1, up1, rng1)
    dealer = TrustedDealer((down0, down1), trusted_rng, config.bits)
    return session0, session1, dealer, trusted_rng


def run_two_party(config, fn0, fn1, seed=None, timeout=None):
    """
    Run fn0(session0) and fn1(session1) on threads with a dealer thread

    Returns:
        (result of fn0, result of fn1)

    Raises:
        The first error any thread hit; the other threads are unblocked by
        closing every channel.
    """
    session0, session1, dealer, _ = open_inproc(config, seed, timeout)
    results = [None, None]
    errors = []
    lock = threading.Lock()

    def fail(error):
        with lock:
            errors.append(error)
        session0.abort()
        session1.abort()
        dealer.close()

    def party(index, fn, session):
        try:
            results[index] = fn(session)
            session.dealer.send(Tag.CLOSE)
        except BaseException as e:
            fail(e)

    def serve():
        try:
            dealer.serve_until((Tag.CLOSE,))
        except BaseException as e:
            fail(e)

    threads = [threading.Thread(target=party, args=(0, fn0, session0), name='party-0'),
               threading.Thread(target=party, args=(1, fn1, session1), name='party-1'),
               threading.Thread(target=serve, name='dealer')]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()

    if errors:
        # prefer the root cause over the disconnects it triggered
        protocol_errors = [e for e in errors if isinstance(e, PPODError)
                           and 'disconnected' not in str(e) and 'closed channel' not in str(e)]
        raise (protocol_errors or errors)[0]
    return results[0], results[1]
