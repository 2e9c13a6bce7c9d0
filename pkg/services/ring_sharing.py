"""
Additive sharing over Z_{2^l} and Beaver-triple multiplication
"""
import logging
import struct
from collections import deque

from models.ring_share import DEFAULT_BITS, BeaverTriple, RingShare, ring_mask
from services.transport import Tag
from utils.errors import (ParameterError, PoolExhaustedError, ProtocolError, RangeError,
                          WidthMismatchError)

logger = logging.getLogger(__name__)

TRIPLE_FILE_MAGIC = b'PPDT'
_TRIPLE_FILE_HEADER = struct.Struct('<4sBBQ')


def share(secret, rng, bits=DEFAULT_BITS):
    """
    Split a secret into two additive shares

    Args:
        secret: ring element, 0 <= secret < 2^bits
        rng: random source with getrandbits
        bits: ring bitwidth l

    Returns:
        (RingShare for party 0, RingShare for party 1)
    """
    if not 0 <= secret < (1 << bits):
        raise RangeError(f'Secret does not fit in {bits} bits')
    first = rng.getrandbits(bits)
    return RingShare(first, 0, bits), RingShare((secret - first) & ring_mask(bits), 1, bits)


def reconstruct(share0, share1):
    if share0.bits != share1.bits:
        raise WidthMismatchError(f'Cannot reconstruct {share0.bits}-bit and {share1.bits}-bit shares')
    return (share0.value + share1.value) & ring_mask(share0.bits)


def add(a, b):
    """Local addition of two shares held by one party"""
    return a + b


def scale(a, constant):
    return RingShare((a.value * constant) & ring_mask(a.bits), a.party, a.bits)


def encode_ring(values, bits):
    size = bits // 8
    return b''.join(value.to_bytes(size, 'little') for value in values)


def decode_ring(data, bits):
    size = bits // 8
    if len(data) % size:
        raise ProtocolError(f'Ring payload of {len(data)} bytes is not a multiple of {size}')
    return [int.from_bytes(data[i:i + size], 'little') for i in range(0, len(data), size)]


def mul_batch(a_values, b_values, triples, channel, party, bits=DEFAULT_BITS):
    """
    Multiply many pairs of shares in one exchange

    Each party opens e = a - x and f = b - y, then party i computes
    c_i = i*e*f + f*x_i + e*y_i + z_i.

    Args:
        a_values, b_values: this party's share values
        triples: one fresh BeaverTriple per pair
        channel: peer channel

    Returns:
        list of this party's product share values
    """
    if not (len(a_values) == len(b_values) == len(triples)):
        raise WidthMismatchError('mul_batch needs one triple per operand pair')
    if not a_values:
        return []

    mask = ring_mask(bits)
    opened = []
    for triple in triples:
        if triple.spent:
            raise ProtocolError(f'Beaver triple {triple.index} was already used')
        if triple.bits != bits or triple.party != party:
            raise WidthMismatchError('Triple does not belong to this party and ring')
        triple.spent = True
    for a, b, triple in zip(a_values, b_values, triples):
        opened.append((a - triple.x) & mask)
        opened.append((b - triple.y) & mask)

    channel.send(Tag.MUL_OPEN, encode_ring(opened, bits))
    remote = decode_ring(channel.recv(Tag.MUL_OPEN), bits)
    if len(remote) != len(opened):
        raise ProtocolError('Peer opened a different number of values')

    products = []
    for i, triple in enumerate(triples):
        e = (opened[2 * i] + remote[2 * i]) & mask
        f = (opened[2 * i + 1] + remote[2 * i + 1]) & mask
        c = f * triple.x + e * triple.y + triple.z
        if party == 1:
            c += e * f
        products.append(c & mask)
    return products


def mul(a, b, triple, channel):
    """Beaver multiplication of one pair of shares"""
    if a.bits != b.bits or a.party != b.party:
        raise WidthMismatchError('Operands must share party and bitwidth')
    (value,) = mul_batch([a.value], [b.value], [triple], channel, a.party, a.bits)
    return RingShare(value, a.party, a.bits)


def gen_triples(count, rng, bits=DEFAULT_BITS, start_index=0):
    """
    Dealer-side triple generation

    Returns:
        (party 0 triples, party 1 triples)
    """
    if count < 0:
        raise ParameterError('Triple count must be non-negative')
    mask = ring_mask(bits)
    first, second = [], []
    for offset in range(count):
        x = rng.getrandbits(bits)
        y = rng.getrandbits(bits)
        z = (x * y) & mask
        x0, y0, z0 = rng.getrandbits(bits), rng.getrandbits(bits), rng.getrandbits(bits)
        index = start_index + offset
        first.append(BeaverTriple(x0, y0, z0, 0, bits, index))
        second.append(BeaverTriple((x - x0) & mask, (y - y0) & mask, (z - z0) & mask, 1, bits, index))
    return first, second


def encode_triples(triples, bits):
    return encode_ring([v for t in triples for v in (t.x, t.y, t.z)], bits)


def decode_triples(data, party, bits, start_index=0):
    values = decode_ring(data, bits)
    if len(values) % 3:
        raise ProtocolError('Triple payload is not a whole number of triples')
    return [BeaverTriple(values[i], values[i + 1], values[i + 2], party, bits, start_index + i // 3)
            for i in range(0, len(values), 3)]


def write_triple_file(path, triples, party, bits):
    with open(path, 'wb') as handle:
        handle.write(_TRIPLE_FILE_HEADER.pack(TRIPLE_FILE_MAGIC, party, bits, len(triples)))
        handle.write(encode_triples(triples, bits))


def read_triple_file(path):
    """
    Returns:
        (party, bits, list of BeaverTriple)
    """
    with open(path, 'rb') as handle:
        data = handle.read()
    if len(data) < _TRIPLE_FILE_HEADER.size:
        raise ParameterError(f'{path} is not a triple file')
    magic, party, bits, count = _TRIPLE_FILE_HEADER.unpack_from(data)
    if magic != TRIPLE_FILE_MAGIC:
        raise ParameterError(f'{path} is not a triple file')
    triples = decode_triples(data[_TRIPLE_FILE_HEADER.size:], party, bits)
    if len(triples) != count:
        raise ParameterError(f'{path} holds {len(triples)} triples, header says {count}')
    return party, bits, triples


class TriplePool:
    """
    A party's queue of precomputed triples

    Refills are synchronous and depend only on the queue length, so both
    parties request the same batches at the same points.
    """

    def __init__(self, party, bits=DEFAULT_BITS, source=None, low_water=1024, refill=8192):
        self.party = party
        self.bits = bits
        self.low_water = low_water
        self.refill = refill
        self.consumed = 0
        self._source = source
        self._queue = deque()
        self.issued = 0

    def __len__(self):
        return len(self._queue)

    @classmethod
    def from_file(cls, path, party, source=None, **kwargs):
        file_party, bits, triples = read_triple_file(path)
        if file_party != party:
            raise ParameterError(f'{path} holds triples of party {file_party}, not {party}')
        pool = cls(party, bits, source, **kwargs)
        pool.extend(triples)
        return pool

    def extend(self, triples):
        for triple in triples:
            if triple.bits != self.bits or triple.party != self.party:
                raise WidthMismatchError('Triple does not belong to this pool')
            self._queue.append(triple)
        self.issued += len(triples)

    def _fill(self, count):
        if self._source is None:
            raise PoolExhaustedError(f'Triple pool of party {self.party} is exhausted')
        logger.debug('party %d: requesting %d triples', self.party, count)
        triples = self._source(count)
        if len(triples) != count:
            raise PoolExhaustedError(f'Dealer delivered {len(triples)} of {count} triples')
        self.extend(triples)

    def prime(self, count):
        """Top the pool up to at least count triples"""
        if count > len(self._queue):
            self._fill(count - len(self._queue))

    def take(self, count):
        if self._source is None:
            if count > len(self._queue):
                raise PoolExhaustedError(
                    f'Triple pool of party {self.party} has {len(self._queue)} triples, {count} needed')
        elif len(self._queue) - count < self.low_water:
            self._fill(max(self.refill, count + self.low_water - len(self._queue)))
        self.consumed += count
        return [self._queue.popleft() for _ in range(count)]
