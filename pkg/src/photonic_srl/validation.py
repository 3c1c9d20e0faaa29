"""Input validation helpers.

Thin wrappers over :func:`sklearn.utils.check_array` that raise the
package's own exception types, so callers can catch shape problems
without depending on scikit-learn's error classes.
"""

import numpy as np
from sklearn.utils import check_array, check_random_state

from .exceptions import DimensionError, NumericError


def check_matrix(a, name="matrix", shape=None, allow_empty=False):
    """Return ``a`` as a finite 2-D float array, optionally of a fixed shape."""
    try:
        arr = check_array(a, dtype=np.float64, ensure_2d=True,
                          ensure_all_finite=True,
                          ensure_min_samples=0 if allow_empty else 1,
                          ensure_min_features=0 if allow_empty else 1)
    except ValueError as exc:
        if "NaN" in str(exc) or "infinity" in str(exc):
            raise NumericError(f"{name}: {exc}") from exc
        raise DimensionError(f"{name}: {exc}") from exc
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr


def check_vector(x, name="vector", length=None):
    """Return ``x`` as a finite 1-D float array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite values")
    if length is not None and arr.shape[0] != length:
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected {length}")
    return arr


def check_batch(x, width, name="input"):
    """Accept a single vector or a batch; return (2-D array, was_single)."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != width:
        raise DimensionError(f"{name} has shape {np.shape(x)}, expected (..., {width})")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite values")
    return arr, single


def check_rng(seed):
    """Normalize ``seed`` into a :class:`numpy.random.Generator`.

    Accepts ``None``, an int, a ``Generator`` or a legacy ``RandomState``
    (the latter is routed through :func:`sklearn.utils.check_random_state`
    and used to seed a fresh generator).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (int, np.integer)):
        return np.random.default_rng(seed)
    rs = check_random_state(seed)
    return np.random.default_rng(rs.randint(0, 2**31 - 1))
