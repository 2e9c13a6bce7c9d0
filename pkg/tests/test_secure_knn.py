import random

import pytest

from conftest import reconstruct_values, share_points
from models.circuit import unpack
from services.circuits import build_reveal
from services.garbling import execute
from services.plaintext_oracle import PlainPoint, oracle_distance, oracle_k_distance
from services.secure_knn import (derandomise_list, exceeds, kdist, knn, pairing_from_bits, randomise_list,
                                 reveal_ids, secure_distance, secure_distances, sort_shuffle)
from services.ring_sharing import reconstruct, share
from utils.errors import PairingIntegrityError, ParameterError


def open_values(session, yao, count, width):
    result = execute(session, build_reveal(count, width, 'test'), shared={'values': yao}, kind='reveal')
    return unpack(result.values['values'], width, count)


def random_coords(rng, count, dims=2, top=16):
    return [tuple(rng.randint(0, top) for _ in range(dims)) for _ in range(count)]


def test_distance_examples(two_party):
    rng = random.Random(1)
    side0, side1 = share_points([(0, 0), (3, 4), (3, 4)], rng)

    def party(side):
        def run(session):
            return secure_distances(session, side[0], side[1:])
        return run

    r0, r1 = two_party(party(side0), party(side1))
    assert reconstruct_values(r0, r1) == [25, 25]


def test_single_distance(two_party):
    rng = random.Random(21)
    side0, side1 = share_points([(2, 9, 4), (5, 5, 4)], rng)

    def party(side):
        def run(session):
            return secure_distance(session, side[0], side[1])
        return run

    r0, r1 = two_party(party(side0), party(side1))
    assert reconstruct(r0, r1) == 25


def test_distances_match_the_oracle(two_party):
    rng = random.Random(2)
    coords = random_coords(rng, 60, dims=3)
    side0, side1 = share_points(coords, rng)

    def party(side):
        def run(session):
            return [secure_distances(session, side[i], [side[i + 1]])[0] for i in range(0, len(side), 2)]
        return run

    r0, r1 = two_party(party(side0), party(side1))
    expected = [oracle_distance(PlainPoint(0, coords[i]), PlainPoint(1, coords[i + 1]))
                for i in range(0, len(coords), 2)]
    assert reconstruct_values(r0, r1) == expected


def test_distance_batch_consumes_three_triples_per_coordinate(two_party):
    rng = random.Random(3)
    side0, side1 = share_points(random_coords(rng, 6, dims=2), rng)

    def party(side):
        def run(session):
            before = session.counters.triples_consumed
            secure_distances(session, side[0], side[1:])
            return session.counters.triples_consumed - before, session.counters.distance_evaluations
        return run

    r0, r1 = two_party(party(side0), party(side1))
    assert r0 == r1 == (3 * 2 * 5, 5)


@pytest.mark.parametrize('count,k', [(9, 3), (12, 1), (5, 4)])
def test_knn_selects_the_k_smallest(two_party, count, k):
    rng = random.Random(count + k)
    coords = random_coords(rng, count)
    side0, side1 = share_points(coords, rng)

    def party(side):
        def run(session):
            neighbours, _ = knn(session, side, side[0], k)
            keys = open_values(session, neighbours.keys, k, neighbours.key_width)
            ids = reveal_ids(session, neighbours)
            return keys, ids
        return run

    (keys0, ids0), (keys1, ids1) = two_party(party(side0), party(side1))
    assert keys0 == keys1
    assert ids0 == ids1
    plain = [PlainPoint(i + 1, c) for i, c in enumerate(coords)]
    expected = sorted(oracle_distance(plain[0], p) for p in plain[1:])[:k]
    assert sorted(keys0) == expected
    assert 1 not in ids0
    assert sorted(oracle_distance(plain[0], plain[i - 1]) for i in ids0) == expected


def test_knn_with_duplicate_distances(two_party):
    rng = random.Random(4)
    coords = [(8, 8), (9, 8), (7, 8), (8, 9), (8, 7), (12, 12)]
    side0, side1 = share_points(coords, rng)

    def party(side):
        def run(session):
            neighbours, _ = knn(session, side, side[0], 3)
            return open_values(session, neighbours.keys, 3, neighbours.key_width)
        return run

    r0, _ = two_party(party(side0), party(side1))
    assert r0 == [1, 1, 1]


def test_knn_needs_k_candidates(two_party):
    rng = random.Random(5)
    side0, side1 = share_points(random_coords(rng, 3), rng)

    def party(side):
        def run(session):
            knn(session, side, side[0], 3)
        return run

    with pytest.raises(ParameterError):
        two_party(party(side0), party(side1))


def test_kdist_is_the_kth_distance(two_party):
    rng = random.Random(6)
    coords = random_coords(rng, 10)
    side0, side1 = share_points(coords, rng)

    def party(side):
        def run(session):
            neighbours, _ = knn(session, side, side[2], 4)
            return open_values(session, kdist(session, neighbours), 1, neighbours.key_width)[0]
        return run

    r0, r1 = two_party(party(side0), party(side1))
    plain = [PlainPoint(i + 1, c) for i, c in enumerate(coords)]
    assert r0 == r1 == oracle_k_distance(plain[2], plain, 4)


def test_exceeds_is_strict(two_party):
    rng = random.Random(7)
    side0, side1 = share_points([(0, 0), (3, 4), (0, 5), (16, 16)], rng)
    radii = [share(r, rng) for r in (24, 25, 26)]

    def party(side, index):
        def run(session):
            neighbours, _ = knn(session, side, side[0], 2)
            dist = kdist(session, neighbours)
            return [exceeds(session, dist, pair[index]) for pair in radii]
        return run

    r0, r1 = two_party(party(side0, 0), party(side1, 1))
    assert r0 == r1 == [True, False, False]


@pytest.mark.parametrize('k', [1, 5, pytest.param(50, marks=pytest.mark.slow)])
def test_randomise_round_trip(two_party, k):
    rng = random.Random(10 + k)
    side0, side1 = share_points(random_coords(rng, max(8, k + 6)), rng)

    def party(side):
        def run(session):
            neighbours, _ = knn(session, side, side[0], k)
            keys = open_values(session, neighbours.keys, k, neighbours.key_width)
            stored = randomise_list(session, neighbours)
            return keys, stored, derandomise_list(session, stored)
        return run

    (keys, stored0, shares0), (_, stored1, shares1) = two_party(party(side0), party(side1))
    assert len(stored0) == len(stored1) == k
    assert stored0.magic is None
    assert stored1.magic is not None
    assert sorted(reconstruct_values(shares0, shares1)) == sorted(keys)


def test_randomised_flags_are_fresh(two_party):
    rng = random.Random(12)
    side0, side1 = share_points(random_coords(rng, 6), rng)

    def party(side):
        def run(session):
            neighbours, _ = knn(session, side, side[0], 3)
            return randomise_list(session, neighbours).flags, randomise_list(session, neighbours).flags
        return run

    _, (first, second) = two_party(party(side0), party(side1))
    assert sorted(first) != sorted(second)


def test_corrupted_flag_breaks_the_pairing(two_party):
    rng = random.Random(13)
    side0, side1 = share_points(random_coords(rng, 6), rng)

    def party(side):
        def run(session):
            neighbours, _ = knn(session, side, side[0], 3)
            stored = randomise_list(session, neighbours)
            if session.party == 1:
                stored.flags[0] ^= 1
            derandomise_list(session, stored)
        return run

    with pytest.raises(PairingIntegrityError):
        two_party(party(side0), party(side1))


def test_duplicate_flag_masks_are_refused(two_party):
    rng = random.Random(14)
    side0, side1 = share_points(random_coords(rng, 6), rng)

    def party(side):
        def run(session):
            neighbours, _ = knn(session, side, side[0], 2)
            randomise_list(session, neighbours, flag_masks=[5, 5] if session.party == 0 else None)
        return run

    with pytest.raises(ParameterError):
        two_party(party(side0), party(side1))


def test_pairing_matrix_is_the_applied_permutation():
    order = [2, 0, 3, 1]
    bits = 0
    for i in range(4):
        bits |= 1 << (i * 4 + order[i])
    assert pairing_from_bits(bits, 4) == order
    assert pairing_from_bits(1, 1) == [0]


def test_pairing_with_an_empty_row():
    with pytest.raises(PairingIntegrityError):
        pairing_from_bits(0b0001_0000_0001, 3)


def test_resort_keeps_the_k_smallest(two_party):
    rng = random.Random(15)
    values = [40, 7, 19, 3, 88]
    shared = [share(v, rng) for v in values]

    def party(index):
        def run(session):
            selected = sort_shuffle(session, [pair[index].value for pair in shared], None, 3, 0)
            assert selected.ids is None
            return open_values(session, selected.keys, 3, selected.key_width)
        return run

    r0, _ = two_party(party(0), party(1))
    assert sorted(r0) == [3, 7, 19]
