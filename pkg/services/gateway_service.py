"""
Live gateway session behind the HTTP API
"""
import logging
import threading

from config import GatewayConfig
from models.report import RunReport
from services.run_service import InprocTopology, collect_metrics, record_step, run_query
from utils.errors import NoSessionError, PPODError, ProtocolError, TransportError

logger = logging.getLogger(__name__)


class GatewayService:
    """
    One streaming session at a time

    Points posted to the gateway are preprocessed on arrival; the servers run
    initialise once W points are in and a slide every S points after that.
    """

    def __init__(self, timeout=None):
        self.timeout = timeout
        self.topology = None
        self.report = None
        self._lock = threading.Lock()

    @property
    def active(self):
        return self.topology is not None

    def _require_session(self):
        if self.topology is None:
            raise NoSessionError('No session is running; POST /api/session first')
        return self.topology.coordinator

    def _guard(self, fn, *args):
        """Run fn under the lock; a protocol failure ends the session"""
        with self._lock:
            try:
                return fn(*args)
            except PPODError as e:
                if not isinstance(e, (ProtocolError, TransportError)) or self.topology is None:
                    raise
                topology, self.topology = self.topology, None
                logger.error('session aborted: %s', e)
                topology.abort(e)

    def start(self, data, seed=None):
        """
        Start a session from a config dict

        Returns:
            the checked config as a dict
        """
        config = GatewayConfig.from_dict(data).check()

        def start():
            if self.topology is not None:
                self._close()
            self.topology = InprocTopology(config, seed, self.timeout)
            self.report = RunReport(config=config.to_dict(), seed=seed, transport='inproc')
            self.topology.coordinator.setup()
            return config.to_dict()

        return self._guard(start)

    def add_points(self, points):
        """
        Ingest raw points, processing every batch that fills up

        Args:
            points: list of coordinate lists, or of dicts with values and an optional id

        Returns:
            dict with accepted count, pending count and steps run
        """
        def add():
            coordinator = self._require_session()
            steps = []
            for item in points:
                if isinstance(item, dict):
                    coordinator.ingest(item.get('values'), item.get('id'))
                else:
                    coordinator.ingest(item)
                self.report.points += 1
                if coordinator.ready:
                    step = record_step(self.report, *coordinator.flush())
                    steps.append({'step': step.step, 'phase': step.phase, 'outliers': step.outliers})
            return {'accepted': len(points), 'pending': len(coordinator.buffer), 'steps': steps}

        return self._guard(add)

    def query(self, values, epsilon=None):
        def ask():
            return run_query(self.report, self._require_session(), values, epsilon)

        return self._guard(ask)

    def outliers(self):
        coordinator = self._require_session()
        return {'initialised': coordinator.initialised, 'outliers': list(coordinator.last_outliers),
                'steps': len(self.report.steps)}

    def run_report(self):
        def collect():
            return collect_metrics(self.report, self._require_session())

        return self._guard(collect)

    def _close(self):
        topology, self.topology = self.topology, None
        try:
            topology.coordinator.close()
        finally:
            topology.join()

    def close(self):
        with self._lock:
            if self.topology is not None:
                self._close()
