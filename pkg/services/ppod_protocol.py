"""
The PPOD phases: gateway preprocessing, session setup, initialisation, query
and sliding-window update
"""
import logging
import math
from dataclasses import dataclass

from models.circuit import pack
from models.ring_share import RingShare, ring_mask
from models.shared_point import SharedPoint
from models.window import WindowState
from services.circuits import build_query_assertion
from services.conversion import y2a
from services.garbling import execute
from services.ring_sharing import share
from services.secure_knn import (derandomise_list, exceeds, kdist, knn, randomise_list, reveal_ids,
                                 secure_distances, sort_shuffle)
from utils.errors import ParameterError, RangeError
from utils.validators import validate_raw_point

logger = logging.getLogger(__name__)

# Cap on triples fetched up front; the pool refills on demand past it
PRIME_LIMIT = 1 << 20

# Decode categories each server may legitimately see in cleartext
CLEARTEXT_CATEGORIES = ('outlier', 'query', 'knn-ids', 'pairing')
MASKED_CATEGORIES = ('masked-share',)


class Gateway:
    """
    The trusted gateway: normalise, round and share raw points

    Assigns counting numbers in arrival order; ids come from the data or
    default to the counting number.
    """

    def __init__(self, config, rng):
        self.config = config.check()
        self.rng = rng
        self.count = 0

    def normalise(self, values):
        """Map each coordinate into [0, 1] by its dimension bounds"""
        is_valid, error = validate_raw_point(values, self.config.dims)
        if not is_valid:
            raise RangeError(error)
        normalised = []
        for i, (value, (lower, upper)) in enumerate(zip(values, self.config.bounds)):
            value = float(value)
            if value < lower or value > upper:
                if self.config.bounds_policy == 'reject':
                    raise RangeError(f'Coordinate {i} = {value} outside [{lower}, {upper}]')
                value = min(max(value, lower), upper)
            normalised.append((value - lower) / (upper - lower))
        return normalised

    def round_point(self, values):
        """floor(normalised * 2^l_D) per coordinate"""
        scale = 1 << self.config.rounding_bits
        return [min(math.floor(v * scale), scale) for v in self.normalise(values)]

    def share_point(self, rounded, point_id=None):
        self.count += 1
        point_id = self.count if point_id is None else int(point_id)
        bits = self.config.bits
        pairs = [share(v, self.rng, bits) for v in rounded]
        return (SharedPoint(point_id, self.count, tuple(p[0].value for p in pairs), 0, bits),
                SharedPoint(point_id, self.count, tuple(p[1].value for p in pairs), 1, bits))

    def share_query(self, rounded):
        """Shares of a query point; queries take no counting number"""
        bits = self.config.bits
        pairs = [share(v, self.rng, bits) for v in rounded]
        return (SharedPoint(0, 0, tuple(p[0].value for p in pairs), 0, bits),
                SharedPoint(0, 0, tuple(p[1].value for p in pairs), 1, bits))

    def preprocess(self, values, point_id=None):
        """
        Raw point in, one share tuple per server out

        Returns:
            (SharedPoint for server 0, SharedPoint for server 1)
        """
        return self.share_point(self.round_point(values), point_id)

    def share_threshold(self, value):
        """Additive shares of R or epsilon, clamped to the circuit key range"""
        if value < 0:
            raise RangeError('Thresholds must be non-negative')
        return share(self.config.clamp_threshold(value), self.rng, self.config.bits)


def preprocess(values, config, rng, point_id=None):
    """Stand-alone preprocessing of one raw point"""
    return Gateway(config, rng).preprocess(values, point_id)


@dataclass
class SessionParams:
    """What one server receives at session setup"""
    radius: RingShare
    epsilon: RingShare
    prime: int = 0


def session_setup(config, rng):
    """
    Check the configuration and share R and epsilon

    Returns:
        (SessionParams for server 0, SessionParams for server 1)
    """
    config.check()
    radius = share(config.clamp_threshold(config.radius), rng, config.bits)
    epsilon = share(config.clamp_threshold(config.epsilon), rng, config.bits)
    prime = min(3 * config.dims * config.window * (config.window - 1), PRIME_LIMIT)
    return (SessionParams(radius[0], epsilon[0], prime), SessionParams(radius[1], epsilon[1], prime))


class PPODServer:
    """One server's side of the protocol"""

    def __init__(self, session, params):
        self.session = session
        self.config = session.config
        self.params = params
        self.window = WindowState(self.config.window, self.config.slide)
        self.initialised = False
        if params.prime:
            session.pool.prime(params.prime)

    @property
    def k(self):
        return self.config.k

    def _evaluate(self, point, candidates):
        """kNN, stored list, k-distance share and outlier test for one point"""
        session = self.session
        neighbours, _ = knn(session, candidates, point, self.k)
        point.knn = randomise_list(session, neighbours)
        dist = kdist(session, neighbours)
        point.kdist = y2a(session, dist).value
        return neighbours, exceeds(session, dist, self.params.radius)

    def initialise(self, points):
        """
        Build kNN lists, k-distances and the outlier set of the first window

        Returns:
            sorted outlier ids
        """
        self.window.load(points)
        with self.session.phase('initialise'):
            for point in self.window.active:
                _, is_outlier = self._evaluate(point, self.window.active)
                if is_outlier:
                    self.window.outliers.add(point.id)
        self.initialised = True
        logger.debug('party %d: initialised, %d outliers', self.session.party, len(self.window.outliers))
        return self.window.sorted_outliers()

    def query(self, point, epsilon=None):
        """True iff some current outlier lies within epsilon of point"""
        self._require_initialised()
        epsilon = epsilon or self.params.epsilon
        outliers = [p for p in self.window.active if p.id in self.window.outliers]
        if not outliers:
            return False
        session = self.session
        width = self.config.distance_width
        with session.phase('query'):
            distances = secure_distances(session, point, outliers)
            low = ring_mask(width)
            packed = pack([d & low for d in distances], width)
            if session.party == 0:
                inputs = {'dist0': packed, 'eps0': epsilon.value & low}
            else:
                inputs = {'dist1': packed, 'eps1': epsilon.value & low}
            result = execute(session, build_query_assertion(len(outliers), width), inputs, kind='query')
        return bool(result.values['assertion'])

    def slide(self, points):
        """
        Expire the oldest S points and process S arrivals

        Returns:
            (sorted outlier ids, list of kNN id lists of the arrivals)
        """
        self._require_initialised()
        session = self.session
        window = self.window
        expired = window.advance(points)
        logger.debug('party %d: slide to (%d, %d], %d expired',
                     session.party, window.start, window.end, len(expired))

        trace = []
        with session.phase('update'):
            for point in points:
                neighbours, is_outlier = self._evaluate(point, window.active)
                if is_outlier:
                    window.outliers.add(point.id)
                window.admit(point)

                ids = reveal_ids(session, neighbours)
                trace.append(sorted(ids))
                for index, neighbour_id in enumerate(ids):
                    if neighbour_id not in window.outliers:
                        continue
                    self._reexamine(window.find(neighbour_id), neighbours.key(index))
        return window.sorted_outliers(), trace

    def _reexamine(self, outlier, new_key):
        """Fold one new distance into an outlier's list and test it again"""
        session = self.session
        stored = derandomise_list(session, outlier.knn)
        new_distance = y2a(session, new_key).value
        session.counters.resorted_entries += len(stored)
        selected = sort_shuffle(session, stored + [new_distance], None, self.k, 0)
        outlier.knn = randomise_list(session, selected)
        dist = kdist(session, selected)
        outlier.kdist = y2a(session, dist).value
        if not exceeds(session, dist, self.params.radius):
            self.window.outliers.discard(outlier.id)

    def _require_initialised(self):
        if not self.initialised:
            raise ParameterError('Session is not initialised')


def audit_decodes(decode_log):
    """
    Check every cleartext decode against the allowed leakage

    Returns:
        (category -> count, list of violating DecodeRecord)
    """
    counts = {}
    violations = []
    for record in decode_log:
        counts[record.category] = counts.get(record.category, 0) + 1
        if record.category in CLEARTEXT_CATEGORIES:
            continue
        if record.category in MASKED_CATEGORIES and record.destination == 'evaluator' and record.party == 1:
            continue
        violations.append(record)
    return counts, violations
