"""
Count-based sliding window over shared points
"""
from dataclasses import dataclass, field

from utils.errors import ParameterError


@dataclass
class WindowState:
    """
    Active points and outlier ids of one server

    A point is active iff start < count <= end; once initialised,
    end - start == window.
    """
    window: int
    slide: int
    active: list = field(default_factory=list)
    outliers: set = field(default_factory=set)
    start: int = 0
    end: int = 0
    buffer: list = field(default_factory=list)

    def is_active(self, point):
        return self.start < point.count <= self.end

    def find(self, point_id):
        for point in self.active:
            if point.id == point_id:
                return point
        raise ParameterError(f'Point {point_id} is not in the active window')

    def load(self, points):
        """Install the first batch of exactly W points"""
        if len(points) != self.window:
            raise ParameterError(f'Initialisation needs {self.window} points, got {len(points)}')
        self._check_counts(points, 1)
        self.active = list(points)
        self.outliers = set()
        self.start, self.end = 0, self.window

    def advance(self, points):
        """
        Move the window by one slide and drop expired points

        Returns:
            list of expired points
        """
        if len(points) != self.slide:
            raise ParameterError(f'A slide needs exactly {self.slide} points, got {len(points)}')
        self._check_counts(points, self.end + 1)
        clash = {p.id for p in self.active} & {p.id for p in points}
        if clash:
            raise ParameterError(f'Ids already in the window: {sorted(clash)}')
        self.buffer = list(points)
        self.start += self.slide
        self.end += self.slide
        expired = [p for p in self.active if p.count <= self.start]
        self.active = [p for p in self.active if p.count > self.start]
        for point in expired:
            self.outliers.discard(point.id)
        return expired

    def admit(self, point):
        self.active.append(point)
        self.buffer.remove(point)

    def sorted_outliers(self):
        return sorted(self.outliers)

    @staticmethod
    def _check_counts(points, first):
        counts = [p.count for p in points]
        if counts != list(range(first, first + len(points))):
            raise ParameterError(f'Counting numbers must run consecutively from {first}')
        ids = [p.id for p in points]
        if len(set(ids)) != len(ids):
            raise ParameterError('Point ids in one batch must be unique')
