"""Input validation helpers shared by the functional API and the estimators."""

from __future__ import annotations

import numpy as np


def as_example(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to a finite float vector of length ``dim``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1 or x.shape[0] != dim:
        raise ValueError(f"expected an example of dimension {dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("example has non-finite coordinates")
    return x


def as_examples(X, dim: int) -> np.ndarray:
    """Coerce ``X`` to a finite (n, dim) float matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and dim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] != dim:
        raise ValueError(f"expected examples of dimension {dim}, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("examples contain non-finite coordinates")
    return X


def check_label(y) -> float:
    y = float(y)
    if not np.isfinite(y) or abs(y) > 1.0:
        raise ValueError(f"labels must lie in [-1, 1], got {y}")
    return y


def check_positive(name: str, value, *, strict: bool = True) -> float:
    value = float(value)
    ok = value > 0 if strict else value >= 0
    if not ok or not np.isfinite(value):
        bound = "> 0" if strict else ">= 0"
        raise ValueError(f"{name} must be {bound}, got {value}")
    return value


def check_count(name: str, value, minimum: int = 1) -> int:
    if isinstance(value, bool) or int(value) != value:
        raise ValueError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_probability(name: str, value) -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")
    return value
