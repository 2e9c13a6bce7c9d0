"""
Secret-shared data points and their kNN lists, as one server holds them
"""
from dataclasses import dataclass, field

from utils.errors import WidthMismatchError


@dataclass
class StoredKnnList:
    """
    A randomised kNN list in this server's own storage order

    The garbler holds its distance masks r_j and flag masks R^m_j; the
    evaluator holds d_j - r_j, the flags m xor R^m_j and the magic number m.
    """
    shares: list
    flags: list
    magic: int = None

    def __len__(self):
        return len(self.shares)


@dataclass
class KnnYaoList:
    """Yao shares of k (distance, id) records in SortShuffle output order"""
    keys: object
    ids: object
    k: int
    key_width: int
    id_width: int

    def key(self, index):
        return self.keys.slice(index * self.key_width, self.key_width)


@dataclass
class SharedPoint:
    """
    One server's view of a data point

    id and count (C_p) are plaintext; coords are this server's additive
    shares. knn (D) and kdist (D^k) are filled in by initialise or update.
    """
    id: int
    count: int
    coords: tuple
    party: int
    bits: int = 64
    knn: StoredKnnList = None
    kdist: int = None
    meta: dict = field(default_factory=dict)

    @property
    def dims(self):
        return len(self.coords)

    def check_peer(self, other):
        if other.dims != self.dims:
            raise WidthMismatchError(f'Point {self.id} has {self.dims} coordinates, {other.id} has {other.dims}')
        if other.bits != self.bits or other.party != self.party:
            raise WidthMismatchError('Points from different parties or rings')

    def to_dict(self):
        return {'id': self.id, 'count': self.count, 'coords': list(self.coords)}

    @classmethod
    def from_dict(cls, data, party, bits):
        return cls(int(data['id']), int(data['count']), tuple(int(v) for v in data['coords']), party, bits)
