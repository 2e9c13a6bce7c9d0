"""
Additive shares over Z_{2^l} and Beaver triples
"""
from dataclasses import dataclass

from utils.errors import RangeError, WidthMismatchError

DEFAULT_BITS = 64


def ring_mask(bits):
    return (1 << bits) - 1


@dataclass(frozen=True)
class RingShare:
    """One party's l-bit additive share of a secret"""
    value: int
    party: int
    bits: int = DEFAULT_BITS

    def __post_init__(self):
        if self.party not in (0, 1):
            raise RangeError(f'Party id must be 0 or 1, got {self.party}')
        if not 0 <= self.value < (1 << self.bits):
            raise RangeError(f'Share value does not fit in {self.bits} bits')

    def __add__(self, other):
        self._check_peer(other)
        return RingShare((self.value + other.value) & ring_mask(self.bits), self.party, self.bits)

    def __sub__(self, other):
        self._check_peer(other)
        return RingShare((self.value - other.value) & ring_mask(self.bits), self.party, self.bits)

    def _check_peer(self, other):
        if other.bits != self.bits:
            raise WidthMismatchError(f'Cannot combine {self.bits}-bit and {other.bits}-bit shares')
        if other.party != self.party:
            raise WidthMismatchError('Local operations combine shares held by one party')


@dataclass
class BeaverTriple:
    """
    One party's half of a multiplication triple

    The triple is spent by the first multiplication that uses it; a second use
    is a protocol error.
    """
    x: int
    y: int
    z: int
    party: int
    bits: int = DEFAULT_BITS
    index: int = 0
    spent: bool = False

    def shares(self):
        """The triple as RingShare values"""
        return (RingShare(self.x, self.party, self.bits),
                RingShare(self.y, self.party, self.bits),
                RingShare(self.z, self.party, self.bits))
