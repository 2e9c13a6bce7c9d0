import random

import pytest

from services.plaintext_oracle import (PlainPoint, calibrate_radius, divergence_report, oracle_distance,
                                       oracle_k_distance, oracle_knn, oracle_outliers, oracle_protocol_replay,
                                       oracle_textbook_stream)
from utils.errors import ParameterError, WidthMismatchError


def points(coords):
    return [PlainPoint(i + 1, tuple(c), i + 1) for i, c in enumerate(coords)]


def random_points(rng, count, dims=2, top=16):
    return points([[rng.randint(0, top) for _ in range(dims)] for _ in range(count)])


def test_distance_examples():
    assert oracle_distance(PlainPoint(1, (0, 0)), PlainPoint(2, (3, 4))) == 25
    assert oracle_distance(PlainPoint(1, (7, 7, 7)), PlainPoint(2, (7, 7, 7))) == 0


def test_distance_dimension_mismatch():
    with pytest.raises(WidthMismatchError):
        oracle_distance(PlainPoint(1, (0, 0)), PlainPoint(2, (1,)))


def test_isolated_point_is_an_outlier():
    stream = points([(15, 15), (4, 4), (5, 4), (4, 5), (5, 5), (3, 4), (4, 3), (6, 4)])
    assert oracle_outliers(stream, 5, 20) == {1}


def test_identical_points_are_inliers():
    assert oracle_outliers(points([(3, 3)] * 6), 2, 1) == set()


def test_too_few_points():
    with pytest.raises(ParameterError):
        oracle_outliers(points([(0, 0), (1, 1)]), 2, 5)


def test_neighbour_count_agrees_with_k_distance_rule():
    rng = random.Random(3)
    for _ in range(50):
        stream = random_points(rng, 12)
        k, radius = rng.randint(1, 5), rng.randint(0, 60)
        by_kdist = {p.id for p in stream if oracle_k_distance(p, stream, k) > radius}
        assert oracle_outliers(stream, k, radius) == by_kdist


def test_knn_excludes_the_point_itself():
    stream = points([(0, 0), (0, 0), (1, 0), (5, 5)])
    selected = oracle_knn(stream[0], stream, 2, 1023)
    assert sorted(selected) == [(0, 2), (1, 3)]


def test_zero_slides_equals_the_static_oracle():
    rng = random.Random(4)
    for _ in range(20):
        stream = random_points(rng, 12)
        (step,) = oracle_protocol_replay(stream, 12, 3, 3, 8)
        assert step.outliers == oracle_outliers(stream, 3, 8)
        assert step.knn_ids == []


def test_replay_is_deterministic():
    stream = random_points(random.Random(5), 30)
    first = oracle_protocol_replay(stream, 12, 3, 3, 8, 1023)
    second = oracle_protocol_replay(stream, 12, 3, 3, 8, 1023)
    assert [(s.outliers, s.knn_ids) for s in first] == [(s.outliers, s.knn_ids) for s in second]
    assert len(first) == 1 + (30 - 12) // 3


def test_replay_drops_trailing_points():
    stream = random_points(random.Random(6), 16)
    assert len(oracle_protocol_replay(stream, 12, 3, 3, 8)) == 2


def test_replay_needs_a_full_window():
    with pytest.raises(ParameterError):
        oracle_protocol_replay(random_points(random.Random(1), 5), 12, 3, 3, 8)


def test_replay_outliers_stay_inside_the_window():
    stream = random_points(random.Random(7), 40)
    for step in oracle_protocol_replay(stream, 12, 4, 3, 8)[1:]:
        end = 12 + 4 * step.step
        assert all(end - 12 < point_id <= end for point_id in step.outliers)


def test_replay_demotes_an_outlier():
    stream = points([(0,), (1,), (2,), (10,), (15,), (16,), (11,), (9,)])
    replay = oracle_protocol_replay(stream, 6, 2, 2, 4, 511)
    assert [step.outliers for step in replay] == [{4, 5, 6}, {5, 6}]


def test_textbook_stream_on_a_static_window():
    stream = random_points(random.Random(8), 12)
    assert oracle_textbook_stream(stream, 12, 3, 3, 8) == [oracle_outliers(stream, 3, 8)]


def test_expired_neighbours_never_promote_an_inlier():
    coords = [(0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (2, 0), (16, 16), (16, 15), (15, 16)]
    stream = points(coords)
    replay = oracle_protocol_replay(stream, 6, 3, 2, 4)
    textbook = oracle_textbook_stream(stream, 6, 3, 2, 4)
    assert [step.outliers for step in replay] == [set(), set()]
    assert textbook == [set(), {5, 6}]
    assert divergence_report(replay, textbook) == [{'step': 1, 'only_protocol': [], 'only_textbook': [5, 6]}]


def test_divergence_report_lists_both_sides():
    report = divergence_report([{1, 2}, {3}], [{2}, {3, 4}])
    assert report == [{'step': 0, 'only_protocol': [1], 'only_textbook': []},
                      {'step': 1, 'only_protocol': [], 'only_textbook': [4]}]


def test_calibrated_radius_is_a_kdist_quantile():
    stream = points([(0, 0), (0, 1), (0, 3), (0, 6), (0, 10)])
    kdists = sorted(oracle_k_distance(p, stream, 1) for p in stream)
    assert calibrate_radius(stream, 1, 1.0) == kdists[-1]
    assert calibrate_radius(stream, 1, 0.0) == kdists[0]
    with pytest.raises(ParameterError):
        calibrate_radius(stream, 1, 1.5)
