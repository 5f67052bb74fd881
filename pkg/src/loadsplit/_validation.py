"""Input validation helpers shared by the numerical modules."""

import numpy as np

from .exceptions import DimensionMismatch, NonFiniteEntry


def as_float_matrix(a, name, ndim=2):
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    return arr


def check_finite(a, name):
    if not np.all(np.isfinite(a)):
        raise NonFiniteEntry(f"{name} contains non-finite entries")
    return a


def check_nonnegative(a, name):
    check_finite(a, name)
    if a.size and a.min() < 0:
        raise ValueError(f"{name} must be non-negative (min={a.min():.3g})")
    return a


def check_shape(a, shape, name):
    """Compare ``a.shape`` to ``shape``; ``None`` entries match anything."""
    if len(a.shape) != len(shape) or any(
        want is not None and got != want for got, want in zip(a.shape, shape)
    ):
        want = tuple("*" if s is None else s for s in shape)
        raise DimensionMismatch(f"{name} has shape {a.shape}, expected {want}")
    return a


def check_factors(X, C, S):
    """Validate a data matrix against a (C, S) factor pair and return float copies."""
    X = as_float_matrix(X, "X")
    C = as_float_matrix(C, "C")
    S = as_float_matrix(S, "S")
    n, p = X.shape
    K = C.shape[1]
    check_shape(C, (n, None), "C")
    check_shape(S, (K, p), "S")
    return X, C, S
