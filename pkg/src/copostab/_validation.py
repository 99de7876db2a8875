"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""
import numpy as np

from .exceptions import AsymmetryError, DimensionError

SYM_TOL = 1e-9


def as_matrix(a, name="matrix", shape=None):
    """Coerce ``a`` to a finite 2-D float array, optionally checking its shape.

    Scalars become 1x1 and 1-D inputs become a single column only when
    ``shape`` asks for one column; otherwise a 1-D input is a single row.
    """
    arr = np.array(a, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        if shape is not None and shape[1] == 1 and shape[0] != 1:
            arr = arr.reshape(-1, 1)
        else:
            arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if shape is not None:
        rows, cols = shape
        # empty dimensions (n_c = 0) are allowed to come in as any empty array
        if arr.size == 0 and rows * cols == 0:
            arr = np.zeros((rows, cols))
        if (rows is not None and arr.shape[0] != rows) or (
            cols is not None and arr.shape[1] != cols
        ):
            raise DimensionError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name} contains non-finite entries")
    return arr


def as_vector(v, name="vector", size=None):
    arr = np.array(v, dtype=float).reshape(-1)
    if size is not None and arr.size != size:
        raise DimensionError(f"{name} has length {arr.size}, expected {size}")
    if not np.all(np.isfinite(arr)):
        raise DimensionError(f"{name} contains non-finite entries")
    return arr


def check_square(a, name="matrix"):
    a = as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got {a.shape}")
    return a


def check_symmetric(a, name="matrix", tol=SYM_TOL):
    a = check_square(a, name)
    if a.size and np.max(np.abs(a - a.T)) > tol * max(1.0, np.max(np.abs(a))):
        raise AsymmetryError(f"{name} is not symmetric within {tol}")
    return a


def check_random_state(seed):
    """Return a ``numpy.random.Generator`` for ``seed`` (None, int or Generator)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
