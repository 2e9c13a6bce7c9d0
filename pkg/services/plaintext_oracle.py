"""
Cleartext references for the secure pipeline

Everything works on the rounded integer domain, so comparisons with the
secure run are exact.
"""
from dataclasses import dataclass, field

import numpy as np

from services.circuits import network_select
from utils.errors import ParameterError, WidthMismatchError


@dataclass(frozen=True)
class PlainPoint:
    id: int
    coords: tuple
    count: int = 0


@dataclass
class ReplayStep:
    step: int
    outliers: set
    knn_ids: list = field(default_factory=list)


def oracle_distance(p, q):
    """Squared Euclidean distance in unbounded integers"""
    if len(p.coords) != len(q.coords):
        raise WidthMismatchError('Points differ in dimensionality')
    return sum((a - b) ** 2 for a, b in zip(p.coords, q.coords))


def oracle_k_distance(point, others, k):
    distances = sorted(oracle_distance(point, o) for o in others if o.id != point.id)
    if len(distances) < k:
        raise ParameterError(f'Need at least {k} other points')
    return distances[k - 1]


def oracle_outliers(points, k, radius):
    """Ids of points with fewer than k neighbours within radius"""
    if len(points) <= k:
        raise ParameterError(f'Need more than k={k} points')
    outliers = set()
    for p in points:
        neighbours = sum(1 for q in points if q.id != p.id and oracle_distance(p, q) <= radius)
        if neighbours < k:
            outliers.add(p.id)
    return outliers


def oracle_knn(point, candidates, k, sentinel_key):
    """
    kNN of point as the SortShuffle network selects it

    Returns:
        list of (distance, id), in network order before the shuffle
    """
    records = [(oracle_distance(point, c), c.id) for c in candidates if c.id != point.id]
    if len(records) < k:
        raise ParameterError(f'kNN needs at least k={k} candidates')
    return network_select(records, k, (sentinel_key, None))


class _ReplayState:
    def __init__(self, point):
        self.point = point
        self.knn = []
        self.kdist = None


def oracle_protocol_replay(stream, window, slide, k, radius, sentinel_key=None):
    """
    Run initialise and every full slide on cleartext, exactly as the servers do

    Only current outliers are re-examined when a new point lands in their
    neighbourhood, and stored lists keep distances to expired points.

    Args:
        stream: list of PlainPoint in arrival order
        sentinel_key: padding key; any value above every distance works

    Returns:
        list of ReplayStep, step 0 being initialisation
    """
    stream = list(stream)
    if len(stream) < window:
        raise ParameterError(f'Stream of {len(stream)} points is shorter than W={window}')
    if sentinel_key is None:
        sentinel_key = float('inf')

    active = [_ReplayState(p) for p in stream[:window]]
    outliers = set()
    for state in active:
        selected = oracle_knn(state.point, [s.point for s in active], k, sentinel_key)
        state.knn = [d for d, _ in selected]
        state.kdist = max(state.knn)
        if state.kdist > radius:
            outliers.add(state.point.id)
    steps = [ReplayStep(0, set(outliers))]

    start = 0
    position = window
    step = 1
    while position + slide <= len(stream):
        batch = stream[position:position + slide]
        position += slide
        start += slide
        expired = {s.point.id for s in active if s.point.count <= start}
        active = [s for s in active if s.point.id not in expired]
        outliers -= expired

        knn_ids = []
        for point in batch:
            state = _ReplayState(point)
            selected = oracle_knn(point, [s.point for s in active], k, sentinel_key)
            state.knn = [d for d, _ in selected]
            state.kdist = max(state.knn)
            if state.kdist > radius:
                outliers.add(point.id)
            active.append(state)
            ids = [i for _, i in selected]
            knn_ids.append(sorted(ids))
            for neighbour_id, distance in [(i, d) for d, i in selected]:
                if neighbour_id not in outliers:
                    continue
                neighbour = next(s for s in active if s.point.id == neighbour_id)
                neighbour.knn = sorted(neighbour.knn + [distance])[:k]
                neighbour.kdist = max(neighbour.knn)
                if neighbour.kdist <= radius:
                    outliers.discard(neighbour_id)
        steps.append(ReplayStep(step, set(outliers), knn_ids))
        step += 1
    return steps


def oracle_textbook_stream(stream, window, slide, k, radius):
    """Outliers of every window by full recomputation"""
    stream = list(stream)
    if len(stream) < window:
        raise ParameterError(f'Stream of {len(stream)} points is shorter than W={window}')
    results = []
    end = window
    while end <= len(stream):
        results.append(oracle_outliers(stream[end - window:end], k, radius))
        end += slide
    return results


def divergence_report(replay, textbook):
    """Per step, ids only one of the two oracles calls outliers"""
    report = []
    for step, (faithful, full) in enumerate(zip(replay, textbook)):
        faithful_ids = faithful.outliers if isinstance(faithful, ReplayStep) else set(faithful)
        only_protocol = sorted(faithful_ids - full)
        only_textbook = sorted(full - faithful_ids)
        if only_protocol or only_textbook:
            report.append({'step': step, 'only_protocol': only_protocol, 'only_textbook': only_textbook})
    return report


def calibrate_radius(points, k, quantile=0.9):
    """R as the given quantile of the cleartext k-distances"""
    if not 0.0 <= quantile <= 1.0:
        raise ParameterError('Quantile must lie in [0, 1]')
    kdists = np.array([oracle_k_distance(p, points, k) for p in points], dtype=np.float64)
    return int(np.floor(np.quantile(kdists, quantile)))
