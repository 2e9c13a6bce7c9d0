"""
End-to-end streaming runs checked against the plaintext oracles
"""
import random

import pytest

from config import profile_config
from conftest import share_points
from ppod import calibrated_radius
from services.dataset_service import frame_to_points, generate_dataset
from services.run_service import bench, phase_bytes, run_stream
from services.secure_knn import knn
from services.session import metrics_snapshot
from utils.errors import ParameterError

pytestmark = pytest.mark.slow

# (seed, stream length, dimensions): 20 desk streams of 90-200 points
DESK_STREAMS = [(seed, random.Random(seed).randint(90, 200), (2, 4, 16)[seed % 3]) for seed in range(1, 21)]


def stream(points, dims, seed):
    return frame_to_points(generate_dataset(points, dims, outliers=3, seed=seed))


def desk_config(values):
    config = profile_config('desk', values.shape[1])
    return config.with_params(radius=calibrated_radius(config, values)).check()


@pytest.mark.parametrize('seed,points,dims', DESK_STREAMS)
def test_desk_runs_match_the_oracle(seed, points, dims):
    ids, values = stream(points, dims, seed)
    config = desk_config(values)
    assert (config.window, config.slide, config.k) == (40, 5, 5)
    queries = [(list(values[0]), 16), (list(values[-1]), 0)]
    report = run_stream(config, values, ids, seed=seed, queries=queries, check=True)
    assert report.verdict == 'pass', report.mismatches
    assert len(report.steps) == 1 + (points - 40) // 5
    assert report.leakage['violations'] == []


def test_tcp_and_inproc_agree(small_config):
    ids, values = stream(24, 2, 5)
    inproc = run_stream(small_config, values, ids, seed=4, transport='inproc', check=True, timeout=60)
    tcp = run_stream(small_config, values, ids, seed=4, transport='tcp', check=True, timeout=60)
    assert inproc.verdict == tcp.verdict == 'pass'
    assert [s.outliers for s in inproc.steps] == [s.outliers for s in tcp.steps]
    assert [s.knn_ids for s in inproc.steps] == [s.knn_ids for s in tcp.steps]
    assert tcp.transport == 'tcp'


def test_protocol_traffic_is_accounted_per_phase(small_config):
    ids, values = stream(18, 2, 6)
    report = run_stream(small_config, values, ids, seed=2, queries=[(list(values[0]), 4)])
    assert phase_bytes(report, 'initialise') > 0
    assert phase_bytes(report, 'update') > 0
    if report.final_outliers:
        assert phase_bytes(report, 'query') > 0
    assert phase_bytes(report, 'preprocess') == 0
    assert report.triples_consumed > 0


def test_window_sweep_counts_initial_distances(small_config):
    ids, values = stream(24, 2, 7)
    series = bench(small_config, values, ids, 'window', [9, 12, 15], seed=1)
    assert [entry['initialise_distances'] for entry in series] == [9 * 8, 12 * 11, 15 * 14]
    assert [entry['slides'] for entry in series] == [5, 4, 3]


def test_k_sweep_costs_grow_with_k(small_config):
    ids, values = stream(18, 2, 8)
    series = bench(small_config.with_params(k=2), values, ids, 'k', [2, 5, 8], seed=1)
    initialise = [entry['bytes']['initialise'] for entry in series]
    update = [entry['bytes']['update'] for entry in series]
    assert initialise == sorted(initialise)
    assert initialise[0] < initialise[-1]
    assert update == sorted(update)
    assert update[0] < update[-1]


def test_knn_traffic_barely_moves_with_k(two_party):
    rng = random.Random(40)
    coords = [tuple(rng.randint(0, 16) for _ in range(2)) for _ in range(41)]
    side0, side1 = share_points(coords, rng)
    settings = [2, 5, 8]

    def party(side):
        def run(session):
            sent = []
            for k in settings:
                before = metrics_snapshot(session).bytes_sent
                knn(session, side, side[0], k)
                sent.append(metrics_snapshot(session).bytes_sent - before)
            return sent
        return run

    sent, _ = two_party(party(side0), party(side1))
    # only the shuffle network after truncation depends on k
    assert max(sent) <= 1.1 * min(sent)


def test_desk_wall_time_orders_query_slide_initialise():
    ids, values = stream(90, 2, 3)
    config = desk_config(values)
    queries = [(list(values[i]), 64) for i in (0, 45, -1)]
    report = run_stream(config, values, ids, seed=3, queries=queries)
    initialise = report.steps[0].seconds
    slides = [step.seconds for step in report.steps[1:]]
    per_slide = sum(slides) / len(slides)
    per_query = report.phase_seconds['query'] / len(queries)
    assert per_query < per_slide < initialise


def test_bench_without_settings_is_empty(small_config):
    ids, values = stream(18, 2, 8)
    assert bench(small_config, values, ids, 'k', []) == []


def test_window_larger_than_the_stream(small_config):
    ids, values = stream(10, 2, 9)
    with pytest.raises(ParameterError):
        run_stream(small_config, values, ids, seed=1)


def test_unknown_transport(small_config):
    ids, values = stream(12, 2, 9)
    with pytest.raises(ParameterError):
        run_stream(small_config, values, ids, transport='udp')
