"""Input validation helpers.

scikit-learn's ``check_array`` refuses complex input, so the estimators in
this package validate through these instead.
"""
import numbers

import numpy as np

from .errors import ConfigurationError


def check_complex_array(x, *, ndim=2, name="X", allow_empty=False):
    """Return ``x`` as a C-contiguous complex128 array of the given rank.

    A 1-D array is promoted to a single column when ``ndim == 2``.
    """
    arr = np.asarray(x)
    if arr.dtype == object:
        raise ConfigurationError(f"{name} must be numeric, got dtype=object")
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    if ndim == 2 and arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != ndim:
        raise ConfigurationError(
            f"{name} must be {ndim}-dimensional, got shape {arr.shape}"
        )
    if not allow_empty and arr.size == 0:
        raise ConfigurationError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} contains NaN or infinity")
    return arr


def check_consistent_length(*arrays):
    lengths = {len(a) for a in arrays}
    if len(lengths) > 1:
        raise ConfigurationError(
            f"inputs have inconsistent sample counts: {sorted(lengths)}"
        )


def check_nonnegative(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value < 0:
        raise ConfigurationError(f"{name} must be a finite value >= 0, got {value!r}", [name])
    return float(value)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ConfigurationError(f"{name} must be an integer >= {minimum}, got {value!r}", [name])
    return int(value)


def check_rng(rng):
    """Accept a ``numpy.random.Generator``, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None or isinstance(rng, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(rng)
    raise ConfigurationError(f"cannot build a random generator from {rng!r}")
