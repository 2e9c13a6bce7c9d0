"""
Secure distances, kNN selection and the kNN-list sub-protocols

All functions run symmetrically on both servers; party 0 garbles.
"""
import logging

from models.circuit import pack, unpack
from models.ring_share import RingShare, ring_mask
from models.shared_point import KnnYaoList, StoredKnnList
from services.circuits import (build_derandomise, build_max, build_randomise, build_reveal,
                               build_sort_shuffle, build_threshold_compare)
from services.conversion import y2a
from services.garbling import execute
from services.permutation import derive_permutation
from utils.errors import PairingIntegrityError, ParameterError, WidthMismatchError

logger = logging.getLogger(__name__)

KEY_BYTES = 16


def secure_distances(session, point, others):
    """
    Squared Euclidean distances from point to each of others

    sum(p_i^2 + q_i^2 - 2 p_i q_i) over the ring; one batched Beaver
    exchange, 3n triples per pair.

    Returns:
        list of this party's l-bit distance share values
    """
    if not others:
        return []
    for other in others:
        point.check_peer(other)
    a_values, b_values = [], []
    for other in others:
        for p, q in zip(point.coords, other.coords):
            a_values += [p, q, p]
            b_values += [p, q, q]
    products = session.multiply(a_values, b_values)

    mask = ring_mask(session.bits)
    distances = []
    step = 3 * point.dims
    for index in range(len(others)):
        chunk = products[index * step:(index + 1) * step]
        total = 0
        for i in range(0, step, 3):
            total += chunk[i] + chunk[i + 1] - 2 * chunk[i + 2]
        distances.append(total & mask)
    session.counters.distance_evaluations += len(others)
    return distances


def secure_distance(session, p, q):
    (value,) = secure_distances(session, p, [q])
    return RingShare(value, session.party, session.bits)


def sort_shuffle(session, key_shares, ids, k, id_width):
    """
    Run SortShuffle on additive key shares

    Args:
        key_shares: this party's distance share values
        ids: plaintext ids (garbler input), or None when id_width is 0
        k: records to keep

    Returns:
        KnnYaoList
    """
    config = session.config
    width = config.distance_width
    count = len(key_shares)
    circuit = build_sort_shuffle(count, k, width, id_width)
    low = ring_mask(width)
    keys = pack([share & low for share in key_shares], width)

    if session.party == 0:
        inputs = {'key0': keys}
        if id_width:
            if len(ids) != count:
                raise WidthMismatchError('One id per record is required')
            if any(i < 0 or i >= (1 << id_width) - 1 for i in ids):
                raise ParameterError(f'Ids must lie in [0, 2^{id_width} - 1)')
            inputs['ids'] = pack(ids, id_width)
    else:
        key = session.rng.getrandbits(8 * KEY_BYTES).to_bytes(KEY_BYTES, 'little')
        spec = derive_permutation(key, k)
        inputs = {'key1': keys}
        if spec.control_bits:
            inputs['control'] = pack(spec.control_bits, 1)

    result = execute(session, circuit, inputs, kind='sort_shuffle')
    return KnnYaoList(result.shares['keys'], result.shares.get('ids'), k, width, id_width)


def knn(session, candidates, point, k):
    """
    Yao-shared kNN list of point among candidates

    point is excluded from candidates by id.

    Returns:
        (KnnYaoList, dict candidate id -> this party's distance share value)
    """
    others = [c for c in candidates if c.id != point.id]
    if len(others) < k:
        raise ParameterError(f'kNN needs at least k={k} candidates, got {len(others)}')
    distances = secure_distances(session, point, others)
    ids = [c.id for c in others] if session.party == 0 else None
    neighbours = sort_shuffle(session, distances, ids, k, session.config.id_width)
    return neighbours, dict(zip((c.id for c in others), distances))


def kdist(session, neighbours):
    """Yao share of the largest key in a kNN list"""
    if neighbours.k < 1:
        raise ParameterError('kDist of an empty list')
    circuit = build_max(neighbours.k, neighbours.key_width)
    return execute(session, circuit, shared={'values': neighbours.keys}, kind='max').shares['max']


def exceeds(session, value, radius):
    """Reveal value > R to both servers; radius is this party's RingShare of R"""
    width = value.width
    low = radius.value & ring_mask(width)
    name = 'radius0' if session.party == 0 else 'radius1'
    result = execute(session, build_threshold_compare(width), {name: low}, {'value': value},
                     kind='threshold')
    return bool(result.values['exceeds'])


def reveal_ids(session, neighbours):
    """Open the ids of a kNN list to both servers"""
    if not neighbours.id_width:
        raise ParameterError('This kNN list carries no ids')
    circuit = build_reveal(neighbours.k, neighbours.id_width)
    result = execute(session, circuit, shared={'values': neighbours.ids}, kind='reveal_ids')
    return unpack(result.values['values'], neighbours.id_width, neighbours.k)


def _distinct_masks(rng, count, width):
    masks = []
    seen = set()
    while len(masks) < count:
        value = rng.getrandbits(width)
        if value not in seen:
            seen.add(value)
            masks.append(value)
    return masks


def randomise_list(session, neighbours, flag_masks=None):
    """
    Store a kNN list as re-masked shares with magic-number flags

    Each server keeps the result in a fresh local order of its own.

    Returns:
        StoredKnnList
    """
    config = session.config
    count, width, bits, flag_width = neighbours.k, neighbours.key_width, session.bits, config.flag_width
    circuit = build_randomise(count, width, bits, flag_width)

    if session.party == 0:
        masks = [session.rng.getrandbits(bits) for _ in range(count)]
        if flag_masks is None:
            flag_masks = _distinct_masks(session.rng, count, flag_width)
        elif len(set(flag_masks)) != len(flag_masks) or len(flag_masks) != count:
            raise ParameterError('Flag masks must be distinct, one per entry')
        execute(session, circuit, {'mask': pack(masks, bits), 'flag_mask': pack(flag_masks, flag_width)},
                {'dist': neighbours.keys}, kind='randomise')
        entries = list(zip(masks, flag_masks))
        session.rng.shuffle(entries)
        return StoredKnnList([s for s, _ in entries], [f for _, f in entries])

    magic = session.rng.getrandbits(flag_width)
    result = execute(session, circuit, {'magic': magic}, {'dist': neighbours.keys}, kind='randomise')
    entries = list(zip(unpack(result.values['share'], bits, count),
                       unpack(result.values['flag'], flag_width, count)))
    session.rng.shuffle(entries)
    return StoredKnnList([s for s, _ in entries], [f for _, f in entries], magic)


def pairing_from_bits(bits, count):
    """
    Turn the revealed matrix into garbler index -> evaluator index

    Raises:
        PairingIntegrityError: the matrix is not a permutation matrix
    """
    rows = [[(bits >> (i * count + j)) & 1 for j in range(count)] for i in range(count)]
    pairing = []
    for i, row in enumerate(rows):
        if sum(row) != 1:
            raise PairingIntegrityError(f'Derandomise row {i} has {sum(row)} matches')
        pairing.append(row.index(1))
    if len(set(pairing)) != count:
        raise PairingIntegrityError('Derandomise matched one entry twice')
    return pairing


def derandomise_list(session, stored):
    """
    Re-pair a stored list across the two servers

    Returns:
        this party's distance share values in the garbler's storage order
    """
    count = len(stored)
    circuit = build_derandomise(count, session.config.flag_width)
    flag_width = session.config.flag_width
    if session.party == 0:
        result = execute(session, circuit, {'flag_mask': pack(stored.flags, flag_width)}, kind='derandomise')
    else:
        result = execute(session, circuit, {'flag': pack(stored.flags, flag_width), 'magic': stored.magic},
                         kind='derandomise')
    pairing = pairing_from_bits(result.values['pairing'], count)
    if session.party == 0:
        return list(stored.shares)
    return [stored.shares[j] for j in pairing]
