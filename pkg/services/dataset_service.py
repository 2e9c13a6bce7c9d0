"""
Synthetic streams and CSV input for outlier-detection runs
"""
import logging

import numpy as np
import pandas as pd

from utils.errors import ParameterError
from utils.validators import validate_file_extension

logger = logging.getLogger(__name__)

ID_COLUMN = 'id'
LABEL_COLUMN = 'planted'

# Minimum separation of planted outliers, in normalised units
OUTLIER_GAP = 0.25
MAX_ATTEMPTS = 10000


def generate_dataset(n_points, n_dims, clusters=3, outliers=3, spread=0.02, seed=None):
    """
    Gaussian clusters in the unit cube plus isolated planted outliers

    Planted outliers sit at least OUTLIER_GAP from every cluster centre and
    from each other, and are placed at random positions in the stream.

    Returns:
        DataFrame with an id column, x0..x{n-1} and a 0/1 planted column
    """
    if n_points < 1 or n_dims < 1:
        raise ParameterError('A dataset needs at least one point and one dimension')
    if clusters < 1:
        raise ParameterError('At least one cluster is required')
    if outliers < 0 or outliers > n_points:
        raise ParameterError(f'Cannot plant {outliers} outliers among {n_points} points')
    if spread <= 0:
        raise ParameterError('Cluster spread must be positive')

    rng = np.random.default_rng(seed)
    centres = rng.uniform(0.35, 0.65, size=(clusters, n_dims))
    inliers = n_points - outliers
    labels = rng.integers(0, len(centres), size=inliers)
    body = np.clip(centres[labels] + rng.normal(0.0, spread, size=(inliers, n_dims)), 0.0, 1.0)

    planted = []
    for _ in range(MAX_ATTEMPTS):
        if len(planted) == outliers:
            break
        candidate = rng.uniform(0.0, 1.0, size=n_dims)
        if np.min(np.linalg.norm(centres - candidate, axis=1)) < OUTLIER_GAP + 3 * spread:
            continue
        if planted and np.min(np.linalg.norm(np.array(planted) - candidate, axis=1)) < OUTLIER_GAP:
            continue
        planted.append(candidate)
    if len(planted) < outliers:
        raise ParameterError(f'Could not place {outliers} separated outliers in {n_dims} dimensions')

    values = np.vstack([body] + ([np.array(planted)] if planted else []))
    flags = np.concatenate([np.zeros(inliers, dtype=int), np.ones(outliers, dtype=int)])
    order = rng.permutation(n_points)

    frame = pd.DataFrame(values[order], columns=[f'x{i}' for i in range(n_dims)])
    frame.insert(0, ID_COLUMN, np.arange(1, n_points + 1))
    frame[LABEL_COLUMN] = flags[order]
    logger.info('generated %d points in %d dims (%d planted outliers)', n_points, n_dims, outliers)
    return frame


def planted_ids(frame):
    if LABEL_COLUMN not in frame.columns:
        return set()
    return set(int(i) for i in frame.loc[frame[LABEL_COLUMN] == 1, ID_COLUMN])


def write_dataset(frame, path):
    frame.to_csv(path, index=False, float_format='%.6f')


def read_dataset(path):
    """
    Read a stream CSV

    Every column except id and planted is a coordinate. Without an id column
    the gateway numbers points by arrival.

    Returns:
        (list of ids or None, float ndarray of shape (points, dims))
    """
    if not validate_file_extension(str(path), {'csv'}):
        raise ParameterError(f'Expected a .csv file, got {path}')
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParameterError(f'Cannot read {path}: {e}')
    return frame_to_points(frame)


def frame_to_points(frame):
    frame = frame.drop(columns=[LABEL_COLUMN], errors='ignore')
    ids = None
    if ID_COLUMN in frame.columns:
        ids = [int(i) for i in frame.pop(ID_COLUMN)]
        if len(set(ids)) != len(ids):
            raise ParameterError('Duplicate ids in dataset')
    if frame.shape[1] == 0:
        raise ParameterError('Dataset has no coordinate columns')
    try:
        values = frame.apply(pd.to_numeric, errors='raise').to_numpy(dtype=np.float64)
    except (ValueError, TypeError) as e:
        raise ParameterError(f'Non-numeric coordinate in dataset: {e}')
    if not np.all(np.isfinite(values)):
        raise ParameterError('Dataset contains missing or non-finite coordinates')
    return ids, values


def data_bounds(values, margin=0.0):
    """Per-dimension (min, max) of a value array, widened by margin"""
    lower = values.min(axis=0) - margin
    upper = values.max(axis=0) + margin
    upper = np.where(upper > lower, upper, lower + 1.0)
    return tuple((float(lo), float(hi)) for lo, hi in zip(lower, upper))
