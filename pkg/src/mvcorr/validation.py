"""Input validation helpers shared by the functional API and the estimators."""
import numpy as np

from .exceptions import DimensionError


def check_view(X, name="X", min_samples=1):
    """Return ``X`` as a finite float ``(d, n)`` array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise DimensionError(f"{name} must be 2-D (features x samples), got ndim={X.ndim}")
    if X.shape[0] < 1:
        raise DimensionError(f"{name} has no features")
    if X.shape[1] < min_samples:
        raise DimensionError(f"{name} needs at least {min_samples} samples, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or Inf")
    return X


def check_pair(X, Y, min_samples=1):
    X = check_view(X, "X", min_samples)
    Y = check_view(Y, "Y", min_samples)
    if X.shape[1] != Y.shape[1]:
        raise DimensionError(f"views have different sample counts: {X.shape[1]} vs {Y.shape[1]}")
    return X, Y


def check_random_state(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
