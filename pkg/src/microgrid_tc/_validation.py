"""Input validation helpers shared by the estimators and data classes."""
import numpy as np

from .exceptions import InputError


def check_complex_matrix(value, shape, name):
    arr = np.asarray(value, dtype=complex)
    if arr.shape != shape:
        raise InputError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


def check_complex_vector(value, size, name):
    arr = np.asarray(value, dtype=complex).reshape(-1)
    if arr.size != size:
        raise InputError(f"{name} must have {size} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


def check_series(value, horizon, name, *, dtype=float, nonnegative=False, positive=False):
    arr = np.asarray(value, dtype=dtype).reshape(-1)
    if arr.size != horizon:
        raise InputError(f"{name} must have {horizon} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    if nonnegative and np.any(arr.real < 0):
        raise InputError(f"{name} must be nonnegative")
    if positive and np.any(arr.real <= 0):
        raise InputError(f"{name} must be strictly positive")
    return arr


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise InputError(f"{name} must be a positive finite number, got {value}")
    return value


def check_nonnegative(value, name):
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise InputError(f"{name} must be a nonnegative finite number, got {value}")
    return value


def frozen(arr):
    """Return ``arr`` as a read-only numpy array."""
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr
