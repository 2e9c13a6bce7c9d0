"""
Keyed permutations and their Waksman network control bits

The evaluator derives a permutation of the k selected slots from its secret
key with a small-domain Feistel PRP, routes it through a Waksman network and
feeds the control bits into the shuffle stage of SortShuffle as private inputs.
"""
import hashlib
from dataclasses import dataclass

from utils.errors import ParameterError

FEISTEL_ROUNDS = 4


def next_power_of_two(n):
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


def network_switch_count(n):
    """Control bits of a Waksman network on n (a power of two) slots"""
    if n <= 1:
        return 0
    if n == 2:
        return 1
    return n - 1 + 2 * network_switch_count(n // 2)


@dataclass(frozen=True)
class PermutationSpec:
    """
    A permutation of n slots as network control bits

    output[j] = input[perm[j]]. The network runs on network_size slots; slots
    at and beyond n map to themselves.
    """
    size: int
    perm: tuple
    control_bits: tuple
    network_size: int
    key: bytes = b''

    def apply(self, items):
        return [items[i] for i in self.perm]


class FeistelPermutation:
    """Balanced Feistel network over [0, n) with cycle walking"""

    def __init__(self, key, n):
        if n < 1:
            raise ParameterError('Permutation size must be at least 1')
        self.key = bytes(key)
        self.n = n
        half = max(1, ((n - 1).bit_length() + 1) // 2)
        self.half_bits = half
        self.half_mask = (1 << half) - 1

    def _round(self, index, value):
        digest = hashlib.sha256(self.key + bytes([index]) + value.to_bytes(8, 'little')).digest()
        return int.from_bytes(digest[:8], 'little') & self.half_mask

    def _encrypt_block(self, x):
        left, right = x >> self.half_bits, x & self.half_mask
        for index in range(FEISTEL_ROUNDS):
            left, right = right, left ^ self._round(index, right)
        return (left << self.half_bits) | right

    def __call__(self, x):
        if not 0 <= x < self.n:
            raise ParameterError(f'{x} outside the permutation domain')
        y = self._encrypt_block(x)
        while y >= self.n:
            y = self._encrypt_block(y)
        return y


def route_waksman(perm):
    """
    Control bits realising perm on a Waksman network

    Recursion order: input switches, upper subnetwork, lower subnetwork, then
    output switches without the last one, which is fixed straight.

    Args:
        perm: list with output[j] = input[perm[j]], len a power of two

    Returns:
        list of 0/1 control bits
    """
    n = len(perm)
    if n <= 1:
        return []
    if n == 2:
        return [1 if perm[0] == 1 else 0]

    inverse = [0] * n
    for j, i in enumerate(perm):
        inverse[i] = j

    # 0 = upper subnetwork, 1 = lower
    via = [None] * n
    start = n - 1
    side = 1
    while True:
        j = start
        while via[j] is None:
            via[j] = side
            partner = inverse[perm[j] ^ 1]
            via[partner] = 1 - side
            j = partner ^ 1
        start = next((o for o in range(n) if via[o] is None), None)
        if start is None:
            break
        side = 0

    half = n // 2
    input_bits = [0] * half
    upper = [0] * half
    lower = [0] * half
    output_bits = []
    for s in range(half):
        top, bottom = 2 * s, 2 * s + 1
        from_lower = via[top] == 1
        output_bits.append(1 if from_lower else 0)
        upper_out, lower_out = (bottom, top) if from_lower else (top, bottom)
        upper[s] = perm[upper_out] // 2
        lower[s] = perm[lower_out] // 2
        # the input routed to the upper subnetwork keeps the switch straight when it is on top
        input_bits[perm[lower_out] // 2] = 1 if perm[lower_out] % 2 == 0 else 0

    return input_bits + route_waksman(upper) + route_waksman(lower) + output_bits[:-1]


def apply_network(items, control_bits):
    """Run a Waksman network over cleartext items"""
    items = list(items)
    bits = list(control_bits)
    result = _apply(items, bits)
    if bits:
        raise ParameterError('Unused control bits')
    return result


def _apply(items, bits):
    n = len(items)
    if n <= 1:
        return items
    if n == 2:
        return [items[1], items[0]] if bits.pop(0) else items
    half = n // 2
    upper_in, lower_in = [], []
    for s in range(half):
        top, bottom = items[2 * s], items[2 * s + 1]
        if bits.pop(0):
            top, bottom = bottom, top
        upper_in.append(top)
        lower_in.append(bottom)
    upper_out = _apply(upper_in, bits)
    lower_out = _apply(lower_in, bits)
    result = []
    for s in range(half):
        top, bottom = upper_out[s], lower_out[s]
        if s < half - 1 and bits.pop(0):
            top, bottom = bottom, top
        result.extend((top, bottom))
    return result


def derive_permutation(key, n):
    """
    Deterministic permutation of n slots from key

    Args:
        key: evaluator's secret key bytes
        n: number of slots

    Returns:
        PermutationSpec with control bits for next_power_of_two(n) slots
    """
    prp = FeistelPermutation(key, n)
    perm = [prp(j) for j in range(n)]
    size = next_power_of_two(n)
    extended = perm + list(range(n, size))
    return PermutationSpec(n, tuple(perm), tuple(route_waksman(extended)), size, bytes(key))


def identity_permutation(n):
    size = next_power_of_two(n)
    return PermutationSpec(n, tuple(range(n)), tuple(route_waksman(list(range(size)))), size)
