"""Seeded (x, y) streams with labels in [-1, 1].

Inputs, label noise, and the held-out split each draw from their own
sub-stream of the seed, so the train and test splits never share draws and
``take(n)`` returns the same pairs as iterating ``n`` times.
"""

from __future__ import annotations

from typing import Callable, Iterator, Optional

import numpy as np

from ._rng import make_rng
from ._validation import as_examples, check_count, check_positive
from .exceptions import StreamExhausted
from .feature_space import FeatureFamily
from .scalar_estimator import Hypothesis

__all__ = [
    "DataStream",
    "FixedStream",
    "realizable_stream",
    "toy2d_stream",
    "toy2d_target",
    "write_stream",
    "read_stream",
]

_TRAIN_X, _TRAIN_NOISE, _TEST_X, _TEST_NOISE, _TARGET = range(5)
_MAX_TARGET_ATTEMPTS = 5


class DataStream:
    """Infinite IID stream ``x ~ U[-1, 1]^d``, ``y = clip(f(x) + noise, -1, 1)``."""

    def __init__(
        self,
        dim: int,
        label_fn: Callable[[np.ndarray], np.ndarray],
        seed: int,
        noise_sd: float = 0.0,
        target: Optional[Hypothesis] = None,
    ):
        self.dim = check_count("dim", dim)
        self.label_fn = label_fn
        self.seed = int(seed)
        self.noise_sd = check_positive("noise_sd", noise_sd, strict=False)
        self.target = target

    def labels(self, X: np.ndarray, noise: np.ndarray) -> np.ndarray:
        y = np.clip(self.label_fn(X) + self.noise_sd * noise, -1.0, 1.0)
        assert np.all(np.abs(y) <= 1.0)
        return y

    def _split(self, n: int, x_key: int, noise_key: int):
        n = check_count("n", n, minimum=0)
        X = make_rng(self.seed, x_key).uniform(-1.0, 1.0, size=(n, self.dim))
        noise = make_rng(self.seed, noise_key).standard_normal(n)
        return X, self.labels(X, noise)

    def take(self, n: int):
        """First ``n`` training pairs as ``(X, y)`` arrays."""
        return self._split(n, _TRAIN_X, _TRAIN_NOISE)

    def test(self, n: int):
        """Held-out pairs drawn from sub-streams disjoint from training."""
        return self._split(n, _TEST_X, _TEST_NOISE)

    def __iter__(self) -> Iterator:
        xs = make_rng(self.seed, _TRAIN_X)
        ns = make_rng(self.seed, _TRAIN_NOISE)
        while True:
            x = xs.uniform(-1.0, 1.0, size=(1, self.dim))
            y = self.labels(x, ns.standard_normal(1))
            yield x[0], float(y[0])


class FixedStream:
    """Finite stream over a given sequence of pairs (e.g. loaded from a file)."""

    def __init__(self, X, y, X_test=None, y_test=None):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X must be (n, d) with one label per row")
        if np.any(np.abs(self.y) > 1.0):
            raise ValueError("labels must lie in [-1, 1]")
        self.dim = self.X.shape[1]
        self.X_test = None if X_test is None else np.asarray(X_test, dtype=float)
        self.y_test = None if y_test is None else np.asarray(y_test, dtype=float)
        self.target = None

    def __len__(self) -> int:
        return self.X.shape[0]

    def take(self, n: int):
        if n > len(self):
            raise StreamExhausted(f"stream holds {len(self)} pairs, {n} requested")
        return self.X[:n], self.y[:n]

    def test(self, n: int):
        if self.X_test is None or n > self.X_test.shape[0]:
            raise StreamExhausted("no held-out split of the requested size")
        return self.X_test[:n], self.y_test[:n]

    def __iter__(self):
        return iter(zip(self.X, self.y.tolist()))


def realizable_stream(
    family: FeatureFamily,
    support_size: int,
    target_norm: float,
    noise_sd: float,
    input_dim: int,
    seed: int,
) -> DataStream:
    """Stream whose regression function lies in the family's norm ball.

    The target is ``f* = sum_j alpha_j psi_{x_j}`` over ``support_size``
    random points, rescaled so that ``sqrt(alpha' K alpha) == target_norm``.
    """
    if not family.has_exact_kernel:
        raise ValueError(f"{family.name} has no exact kernel; cannot build a realizable target")
    if family.input_dim != input_dim:
        raise ValueError("family dimension does not match input_dim")
    k = check_count("support_size", support_size)
    target_norm = check_positive("target_norm", target_norm, strict=False)
    for attempt in range(_MAX_TARGET_ATTEMPTS):
        rng = make_rng(seed, _TARGET, attempt)
        Xs = rng.uniform(-1.0, 1.0, size=(k, input_dim))
        alpha = rng.standard_normal(k)
        K = family.kernel_matrix(Xs, Xs)
        sq_norm = float(alpha @ K @ alpha)
        if sq_norm > 1e-12 and np.linalg.cond(K) < 1e12:
            break
    else:
        raise ValueError(f"kernel matrix degenerate after {_MAX_TARGET_ATTEMPTS} attempts")
    alpha = alpha * (target_norm / np.sqrt(sq_norm))
    target = Hypothesis.from_arrays(family, Xs, alpha)
    return DataStream(input_dim, target.exact_values, seed, noise_sd, target=target)


def toy2d_target(X) -> np.ndarray:
    """Fixed smooth target ``cos(3 |x|^2) exp(-|x|^2)`` on R^2 (version 1)."""
    X = as_examples(X, 2)
    r2 = np.sum(X**2, axis=1)
    return np.cos(3.0 * r2) * np.exp(-r2)


def toy2d_stream(noise_sd: float, seed: int) -> DataStream:
    return DataStream(2, toy2d_target, seed, noise_sd)


def write_stream(path, X, y) -> None:
    """Materialize pairs as whitespace-separated text: ``dim``/``count`` header, then rows."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim {X.shape[1]}\ncount {X.shape[0]}\n")
        for row, label in zip(X, y):
            fh.write(" ".join(repr(float(v)) for v in row) + f" {float(label)!r}\n")


def read_stream(path) -> FixedStream:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    try:
        (k1, dim), (k2, count) = lines[0], lines[1]
        if (k1, k2) != ("dim", "count"):
            raise ValueError
        dim, count = int(dim), int(count)
    except (ValueError, IndexError):
        raise ValueError(f"{path}: expected 'dim N' and 'count N' header lines") from None
    rows = np.array(lines[2:], dtype=float).reshape(-1, dim + 1)
    if rows.shape[0] != count:
        raise ValueError(f"{path}: header says {count} rows, found {rows.shape[0]}")
    return FixedStream(rows[:, :dim], rows[:, dim])
