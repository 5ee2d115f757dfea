import hashlib

import numpy as np


class Tolerance():
    match = 1e-9        # point identity and pattern matching, absolute
    sort_grid = 1e-6    # rounding grid used only to order points canonically
    cluster = 1e-8      # eigenvalue clustering, relative to max(1, spectral radius)
    residual = 1e-10
    bound_slack = 1e-9


class TimeFormat():
    file = '%d_%m_%Y-%H_%M_%S'
    log = '%d.%m.%Y. %H:%M:%S'


def format_float(x):
    """Shortest round-tripping decimal in positional notation, without negative zero."""
    x = float(x) + 0.0
    if x == 0.0:
        return "0"
    return np.format_float_positional(x, unique=True, trim='-')


def format_vector(v, sep=","):
    return sep.join(format_float(c) for c in np.atleast_1d(v))


def lexicographic_order(points, grid=Tolerance.sort_grid):
    """
    Indices sorting the rows of `points` lexicographically (first coordinate first).

    Coordinates are compared on a rounding grid so that floating-point noise
    cannot swap two points sharing a coordinate.
    """
    points = np.asarray(points, dtype=float)
    if len(points) == 0:
        return np.zeros(0, dtype=int)
    keys = np.round(points / grid).astype(np.int64)
    return np.lexsort(keys.T[::-1])


def canonical_key(points, grid=Tolerance.sort_grid):
    """Hashable key of an already ordered point array, quantised on `grid`."""
    keys = np.round(np.asarray(points, dtype=float) / grid).astype(np.int64)
    return (keys.shape, keys.tobytes())


def digest(points, grid=Tolerance.sort_grid, length=12):
    points = np.asarray(points, dtype=float)
    ordered = points[lexicographic_order(points, grid)] if points.ndim == 2 else points
    keys = np.round(ordered / grid).astype(np.int64)
    return hashlib.sha256(keys.tobytes() + str(keys.shape).encode()).hexdigest()[:length]


def cluster_tolerance(eigenvalues, relative=Tolerance.cluster):
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    radius = float(np.max(np.abs(eigenvalues))) if len(eigenvalues) else 0.0
    return relative * max(1.0, radius)
