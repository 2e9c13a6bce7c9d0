"""
Trusted dealer: Beaver triples and ideal oblivious transfer

The dealer reads its two server channels in lockstep. Both servers run the
same sequence of protocol steps, so their dealer requests arrive pairwise.
"""
import json
import logging
import struct

from services.oblivious_transfer import LABEL_BYTES, ideal_select, unpack_bits, unpack_pairs
from services.ring_sharing import encode_triples, gen_triples
from services.transport import Tag
from utils.errors import ProtocolError

logger = logging.getLogger(__name__)

_COUNT = struct.Struct('<I')


class TrustedDealer:
    """Serves triple and OT requests of both servers"""

    def __init__(self, channels, rng, bits):
        self.channels = tuple(channels)
        self.rng = rng
        self.bits = bits
        self.triples_issued = 0
        self.ot_transfers = 0

    def serve_until(self, stop_tags=(Tag.RESULT, Tag.CLOSE)):
        """
        Answer requests until both servers send a message tagged in stop_tags

        Returns:
            (tag, payload from server 0, payload from server 1)
        """
        first, second = self.channels
        while True:
            tag, payload = first.recv_any()
            if tag in stop_tags:
                if tag == Tag.RESULT:
                    _raise_if_failed(0, payload)
                return tag, payload, self._expect(second, tag)
            if tag == Tag.TRIPLE_REQUEST:
                self._serve_triples(payload)
            elif tag == Tag.OT_PAIRS:
                self._serve_ot(payload)
            elif tag == Tag.RESULT:
                _raise_if_failed(0, payload)
                raise ProtocolError('Server 0 reported a result out of turn')
            else:
                raise ProtocolError(f'Dealer cannot serve tag {tag} from server 0')

    def _expect(self, channel, expected):
        tag, payload = channel.recv_any()
        if tag == Tag.RESULT:
            _raise_if_failed(1, payload)
        if tag != expected:
            raise ProtocolError(f'Servers out of step: server 1 sent tag {tag}, expected {Tag(expected).name}')
        return payload

    def _serve_triples(self, payload):
        (count,) = _COUNT.unpack(payload)
        (other,) = _COUNT.unpack(self._expect(self.channels[1], Tag.TRIPLE_REQUEST))
        if other != count:
            raise ProtocolError(f'Servers requested {count} and {other} triples')
        first, second = gen_triples(count, self.rng, self.bits, self.triples_issued)
        self.channels[0].send(Tag.TRIPLE_BATCH, encode_triples(first, self.bits))
        self.channels[1].send(Tag.TRIPLE_BATCH, encode_triples(second, self.bits))
        self.triples_issued += count
        logger.debug('dealer: issued %d triples (%d total)', count, self.triples_issued)

    def _serve_ot(self, payload):
        pairs = unpack_pairs(payload)
        choices = unpack_bits(self._expect(self.channels[1], Tag.OT_CHOICES))
        labels = ideal_select(pairs, choices)
        self.channels[1].send(Tag.OT_LABELS, b''.join(label.to_bytes(LABEL_BYTES, 'little')
                                                      for label in labels))
        self.ot_transfers += len(labels)

    def close(self):
        for channel in self.channels:
            channel.close()


def _raise_if_failed(party, payload):
    try:
        message = json.loads(payload.decode('utf-8'))
    except ValueError:
        raise ProtocolError(f'Server {party} sent an unreadable result')
    if isinstance(message, dict) and message.get('error'):
        raise ProtocolError(f'Server {party} failed: {message["error"]}')
