"""
Run bookkeeping: work counters, decode records and the run report
"""
import json
from dataclasses import asdict, dataclass, field

# Phase taxonomy of the report, in order
PHASES = ('preprocess', 'setup', 'initialise', 'query', 'update')


@dataclass(frozen=True)
class DecodeRecord:
    """One cleartext decode performed by a server"""
    party: int
    circuit: str
    bundle: str
    destination: str
    category: str


@dataclass
class WorkCounters:
    """Operation counts of one party"""
    distance_evaluations: int = 0
    resorted_entries: int = 0
    triples_consumed: int = 0
    circuits: dict = field(default_factory=dict)

    def record_circuit(self, kind, cost):
        entry = self.circuits.setdefault(kind, {'runs': 0, 'and': 0, 'xor': 0, 'not': 0, 'const': 0})
        entry['runs'] += 1
        for gate, count in cost.items():
            entry[gate] += count

    def to_dict(self):
        return {
            'distance_evaluations': self.distance_evaluations,
            'resorted_entries': self.resorted_entries,
            'triples_consumed': self.triples_consumed,
            'circuits': {kind: dict(entry) for kind, entry in sorted(self.circuits.items())},
        }


def counter_delta(after, before):
    """Difference of two WorkCounters.to_dict() snapshots, scalar fields only"""
    return {key: after[key] - before.get(key, 0)
            for key in ('distance_evaluations', 'resorted_entries', 'triples_consumed')}


@dataclass
class StepRecord:
    """Outcome of initialise or one slide"""
    step: int
    phase: str
    outliers: list
    knn_ids: list = field(default_factory=list)
    distance_evaluations: int = 0
    resorted_entries: int = 0
    triples_consumed: int = 0
    seconds: float = 0.0


@dataclass
class RunReport:
    """
    Everything one streaming run produced

    verdict is 'pass' only when every step's outlier set matched the oracle.
    """
    config: dict
    seed: object = None
    transport: str = 'inproc'
    points: int = 0
    phase_seconds: dict = field(default_factory=lambda: {phase: 0.0 for phase in PHASES})
    party_metrics: dict = field(default_factory=dict)
    triples_consumed: int = 0
    circuits: dict = field(default_factory=dict)
    steps: list = field(default_factory=list)
    queries: list = field(default_factory=list)
    verdict: str = 'skipped'
    mismatches: list = field(default_factory=list)
    divergence: list = field(default_factory=list)
    leakage: dict = field(default_factory=dict)

    def add_time(self, phase, seconds):
        self.phase_seconds[phase] = self.phase_seconds.get(phase, 0.0) + seconds

    @property
    def final_outliers(self):
        return self.steps[-1].outliers if self.steps else []

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)
