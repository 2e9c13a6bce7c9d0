"""
Circuit builders for the secure outlier-detection pipeline

Every builder is pure and cached; the same parameters always give the same
gate list, so both servers can build locally and compare digests.
"""
import logging
from functools import lru_cache

from models.circuit import CircuitBuilder
from services.permutation import network_switch_count, next_power_of_two
from utils.errors import ParameterError

logger = logging.getLogger(__name__)


def batcher_pairs(n):
    """Comparator pairs (low, high) of Batcher's odd-even mergesort on n = 2^j slots"""
    pairs = []
    p = 1
    while p < n:
        k = p
        while k >= 1:
            for j in range(k % p, n - k, 2 * k):
                for i in range(min(k, n - j - k)):
                    if (i + j) // (2 * p) == (i + j + k) // (2 * p):
                        pairs.append((i + j, i + j + k))
            k //= 2
        p *= 2
    return pairs


def network_select(records, k, sentinel):
    """
    Cleartext twin of the sort stage of SortShuffle

    Runs the same comparators, including the strict > swap rule and the
    sentinel padding, so ties resolve exactly as in the circuit.

    Args:
        records: list of (key, payload)
        k: how many to keep
        sentinel: padding record, above every real key

    Returns:
        the k records at the front of the sorted network output
    """
    slots = list(records) + [sentinel] * (next_power_of_two(len(records)) - len(records))
    for low, high in batcher_pairs(len(slots)):
        if slots[low][0] > slots[high][0]:
            slots[low], slots[high] = slots[high], slots[low]
    return slots[:k]


def _require_width(width, what='width'):
    if width < 1:
        raise ParameterError(f'{what} must be at least 1')


def _sort_records(cb, records, key_width):
    """Batcher network over records whose first key_width bits are the key"""
    for low, high in batcher_pairs(len(records)):
        swap = cb.greater_than(records[low][:key_width], records[high][:key_width])
        records[low], records[high] = cb.cond_swap(swap, records[low], records[high])
    return records


def _permute_records(cb, records, control):
    """Waksman network; control bits consumed in routing order"""
    n = len(records)
    if n <= 1:
        return records
    if n == 2:
        return list(cb.cond_swap(control.pop(0), records[0], records[1]))
    half = n // 2
    upper, lower = [], []
    for s in range(half):
        top, bottom = cb.cond_swap(control.pop(0), records[2 * s], records[2 * s + 1])
        upper.append(top)
        lower.append(bottom)
    upper = _permute_records(cb, upper, control)
    lower = _permute_records(cb, lower, control)
    result = []
    for s in range(half):
        top, bottom = upper[s], lower[s]
        if s < half - 1:
            top, bottom = cb.cond_swap(control.pop(0), top, bottom)
        result.extend((top, bottom))
    return result


@lru_cache(maxsize=256)
def build_sort_shuffle(count, k, key_width, id_width):
    """
    Sort count records by key, keep the k smallest, permute them

    Keys arrive as additive shares (low key_width bits of each share) and are
    added inside the circuit. The garbler also supplies the ids; the
    evaluator supplies the network control bits of its secret permutation.
    Both outputs stay Yao-shared.
    """
    if not 1 <= k <= count:
        raise ParameterError(f'SortShuffle needs 1 <= k <= count, got k={k}, count={count}')
    _require_width(key_width, 'key width')

    cb = CircuitBuilder(f'sort_shuffle_{count}_{k}_{key_width}_{id_width}')
    key0 = cb.add_input('key0', 'garbler', count * key_width)
    key1 = cb.add_input('key1', 'evaluator', count * key_width)
    ids = cb.add_input('ids', 'garbler', count * id_width) if id_width else []
    size = next_power_of_two(k)
    switches = network_switch_count(size)
    control = cb.add_input('control', 'evaluator', switches) if switches else []

    records = []
    for i in range(count):
        key = cb.add(key0[i * key_width:(i + 1) * key_width], key1[i * key_width:(i + 1) * key_width])
        records.append(key + ids[i * id_width:(i + 1) * id_width])
    sentinel = cb.constant((1 << key_width) - 1, key_width) + cb.constant((1 << id_width) - 1, id_width)
    records += [list(sentinel)] * (next_power_of_two(count) - count)

    selected = _sort_records(cb, records, key_width)[:k]
    selected += [list(sentinel)] * (size - k)
    shuffled = _permute_records(cb, selected, list(control))[:k]

    cb.add_output('keys', 'reshare', [bit for record in shuffled for bit in record[:key_width]], 'knn')
    if id_width:
        cb.add_output('ids', 'reshare', [bit for record in shuffled for bit in record[key_width:]], 'knn')
    return cb.build()


@lru_cache(maxsize=64)
def build_max(count, width):
    """Chain of MAX gates over Yao-shared values"""
    if count < 1:
        raise ParameterError('Max needs at least one input')
    _require_width(width)
    cb = CircuitBuilder(f'max_{count}_{width}')
    values = cb.add_input('values', 'shared', count * width)
    best = values[:width]
    for i in range(1, count):
        candidate = values[i * width:(i + 1) * width]
        best = cb.mux(cb.greater_than(candidate, best), candidate, best)
    cb.add_output('max', 'reshare', best, 'kdist')
    return cb.build()


@lru_cache(maxsize=64)
def build_randomise(count, width, bits, flag_width):
    """
    Re-share Yao distances and tag them with masked flags

    The garbler's masks r_j and R^m_j become its stored shares; the evaluator
    receives d_j - r_j and m xor R^m_j.
    """
    if count < 1:
        raise ParameterError('Randomise needs at least one entry')
    _require_width(width)
    _require_width(flag_width, 'flag width')
    cb = CircuitBuilder(f'randomise_{count}_{width}_{bits}_{flag_width}')
    dist = cb.add_input('dist', 'shared', count * width)
    masks = cb.add_input('mask', 'garbler', count * bits)
    flag_masks = cb.add_input('flag_mask', 'garbler', count * flag_width)
    magic = cb.add_input('magic', 'evaluator', flag_width)

    shares, flags = [], []
    for j in range(count):
        value = cb.zero_extend(dist[j * width:(j + 1) * width], bits)
        shares += cb.subtract(value, masks[j * bits:(j + 1) * bits])
        flags += [cb.xor(m, r) for m, r in zip(magic, flag_masks[j * flag_width:(j + 1) * flag_width])]
    cb.add_output('share', 'evaluator', shares, 'masked-share')
    cb.add_output('flag', 'evaluator', flags, 'masked-share')
    return cb.build()


@lru_cache(maxsize=64)
def build_derandomise(count, flag_width):
    """
    Reveal which garbler entry pairs with which evaluator entry

    Bit i*count + j is [flag_j xor R^m_i == m].
    """
    if count < 1:
        raise ParameterError('Derandomise needs at least one entry')
    _require_width(flag_width, 'flag width')
    cb = CircuitBuilder(f'derandomise_{count}_{flag_width}')
    flag_masks = cb.add_input('flag_mask', 'garbler', count * flag_width)
    flags = cb.add_input('flag', 'evaluator', count * flag_width)
    magic = cb.add_input('magic', 'evaluator', flag_width)

    unmasked = []
    for j in range(count):
        unmasked.append([cb.xor(f, m) for f, m in zip(flags[j * flag_width:(j + 1) * flag_width], magic)])
    pairing = []
    for i in range(count):
        mask = flag_masks[i * flag_width:(i + 1) * flag_width]
        for j in range(count):
            pairing.append(cb.is_zero([cb.xor(a, b) for a, b in zip(unmasked[j], mask)]))
    cb.add_output('pairing', 'both', pairing, 'pairing')
    return cb.build()


@lru_cache(maxsize=64)
def build_comparator(width, destination='both'):
    """a > b, unsigned"""
    _require_width(width)
    cb = CircuitBuilder(f'comparator_{width}')
    a = cb.add_input('a', 'garbler', width)
    b = cb.add_input('b', 'evaluator', width)
    cb.add_output('gt', destination, [cb.greater_than(a, b)], 'comparison')
    return cb.build()


@lru_cache(maxsize=64)
def build_or_reduce(count, owner='evaluator', destination='both'):
    if count < 1:
        raise ParameterError('OR needs at least one input')
    cb = CircuitBuilder(f'or_reduce_{count}')
    bits = cb.add_input('bits', owner, count)
    cb.add_output('any', destination, [cb.or_reduce(bits)], 'comparison')
    return cb.build()


@lru_cache(maxsize=64)
def build_adder(width, destination='both'):
    """a + b mod 2^width"""
    _require_width(width)
    cb = CircuitBuilder(f'adder_{width}')
    a = cb.add_input('a', 'garbler', width)
    b = cb.add_input('b', 'evaluator', width)
    cb.add_output('sum', destination, cb.add(a, b), 'arithmetic')
    return cb.build()


@lru_cache(maxsize=64)
def build_subtractor(width, destination='both'):
    """a - b mod 2^width"""
    _require_width(width)
    cb = CircuitBuilder(f'subtractor_{width}')
    a = cb.add_input('a', 'garbler', width)
    b = cb.add_input('b', 'evaluator', width)
    cb.add_output('difference', destination, cb.subtract(a, b), 'arithmetic')
    return cb.build()


@lru_cache(maxsize=64)
def build_a2y(width):
    """Additive shares in, Yao share of their sum out"""
    _require_width(width)
    cb = CircuitBuilder(f'a2y_{width}')
    share0 = cb.add_input('share0', 'garbler', width)
    share1 = cb.add_input('share1', 'evaluator', width)
    cb.add_output('value', 'reshare', cb.add(share0, share1))
    return cb.build()


@lru_cache(maxsize=64)
def build_y2a(width, bits):
    """Yao value in, evaluator's additive share value - mask out"""
    _require_width(width)
    cb = CircuitBuilder(f'y2a_{width}_{bits}')
    value = cb.add_input('value', 'shared', width)
    mask = cb.add_input('mask', 'garbler', bits)
    cb.add_output('share', 'evaluator', cb.subtract(cb.zero_extend(value, bits), mask), 'masked-share')
    return cb.build()


@lru_cache(maxsize=64)
def build_threshold_compare(width):
    """Yao value > A2Y(additive threshold), revealed to both servers"""
    _require_width(width)
    cb = CircuitBuilder(f'threshold_{width}')
    value = cb.add_input('value', 'shared', width)
    radius = cb.add(cb.add_input('radius0', 'garbler', width), cb.add_input('radius1', 'evaluator', width))
    cb.add_output('exceeds', 'both', [cb.greater_than(value, radius)], 'outlier')
    return cb.build()


@lru_cache(maxsize=64)
def build_query_assertion(count, width):
    """OR over [d_i <= eps] with every distance and eps arriving as additive shares"""
    if count < 1:
        raise ParameterError('Assertion needs at least one distance')
    _require_width(width)
    cb = CircuitBuilder(f'assertion_{count}_{width}')
    dist0 = cb.add_input('dist0', 'garbler', count * width)
    dist1 = cb.add_input('dist1', 'evaluator', count * width)
    eps = cb.add(cb.add_input('eps0', 'garbler', width), cb.add_input('eps1', 'evaluator', width))
    hits = []
    for i in range(count):
        d = cb.add(dist0[i * width:(i + 1) * width], dist1[i * width:(i + 1) * width])
        hits.append(cb.less_or_equal(d, eps))
    cb.add_output('assertion', 'both', [cb.or_reduce(hits)], 'query')
    return cb.build()


@lru_cache(maxsize=64)
def build_reveal(count, width, category='knn-ids'):
    """Open Yao-shared values to both servers"""
    if count < 1:
        raise ParameterError('Nothing to reveal')
    _require_width(width)
    cb = CircuitBuilder(f'reveal_{count}_{width}')
    values = cb.add_input('values', 'shared', count * width)
    cb.add_output('values', 'both', values, category)
    return cb.build()
