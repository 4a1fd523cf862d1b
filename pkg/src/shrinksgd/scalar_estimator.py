"""Unbiased two-stage sampling of ``<f, psi_x>`` for finite-support hypotheses.

A hypothesis ``f = sum_i alpha_i psi_{x_i}`` is never evaluated through a
kernel. Instead each of ``m`` inner samples picks a support index with
probability ``|alpha_i| / |alpha|_1``, draws a fresh feature parameter ``w``
and records ``sgn(alpha_i) psi(x_i; w) psi(x; w)``. Scaling the sample mean
by ``|alpha|_1`` gives an unbiased estimate whose summands lie in
``[-|alpha|_1, |alpha|_1]``, which is what the Hoeffding helpers below use.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._rng import make_rng
from ._validation import as_example, as_examples, check_count, check_positive, check_probability
from .feature_space import EvalCounter, FeatureFamily, draw

__all__ = [
    "Coefficients",
    "Hypothesis",
    "Estimate",
    "IndexSampler",
    "build_index_sampler",
    "est_scalar_prod",
    "est_scalar_prod_shared",
    "est_scalar_prod_chunked",
    "tail_bound",
    "stated_tail_bound",
    "required_test_samples",
]

# Fold the lazy scale back into the raw entries once it gets this small, so
# that appended raw values (coef / scale) cannot overflow.
_MIN_SCALE = 2.0**-256


class Coefficients:
    """Growable coefficient vector with a lazy global multiplier.

    The effective coefficient is ``scale * raw[i]``. Shrinking the whole
    vector only touches ``scale``; appending divides by it. With power-of-two
    shrink ratios both operations are exact in binary floating point.
    """

    def __init__(self, raw=None, scale: float = 1.0):
        raw = np.zeros(0) if raw is None else np.asarray(raw, dtype=float).ravel()
        self._buf = np.zeros(max(16, raw.size))
        self._buf[: raw.size] = raw
        self._n = raw.size
        self.scale = float(scale)
        self.l1_cache = self.scale * float(np.sum(np.abs(raw)))

    def __len__(self) -> int:
        return self._n

    @property
    def raw(self) -> np.ndarray:
        return self._buf[: self._n]

    @property
    def effective(self) -> np.ndarray:
        return self.scale * self.raw

    def l1(self) -> float:
        """Exact ``|alpha|_1``; also refreshes the cache."""
        self.l1_cache = self.scale * float(np.sum(np.abs(self.raw)))
        return self.l1_cache

    def append(self, coef: float) -> None:
        if self._n == self._buf.size:
            self._buf = np.concatenate([self._buf, np.zeros(self._buf.size)])
        self._buf[self._n] = coef / self.scale
        self._n += 1
        self.l1_cache += abs(coef)

    def shrink(self, ratio: float) -> None:
        self.scale *= ratio
        self.l1_cache *= ratio
        if self.scale < _MIN_SCALE:
            self._buf[: self._n] *= self.scale
            self.scale = 1.0

    def copy(self) -> "Coefficients":
        out = Coefficients.__new__(Coefficients)
        out._buf = self._buf.copy()
        out._n = self._n
        out.scale = self.scale
        out.l1_cache = self.l1_cache
        return out


class Hypothesis:
    """Finite-support functional ``f = sum_i alpha_i psi_{x_i}``."""

    def __init__(self, family: FeatureFamily, support=None, coeffs: Optional[Coefficients] = None):
        self.family = family
        d = family.input_dim
        support = np.zeros((0, d)) if support is None else as_examples(support, d)
        coeffs = Coefficients() if coeffs is None else coeffs
        if len(coeffs) != support.shape[0]:
            raise ValueError("support and coefficients differ in length")
        self._buf = np.zeros((max(16, support.shape[0]), d))
        self._buf[: support.shape[0]] = support
        self.coeffs = coeffs

    @classmethod
    def from_arrays(cls, family: FeatureFamily, support, alpha) -> "Hypothesis":
        return cls(family, support, Coefficients(alpha))

    def __len__(self) -> int:
        return len(self.coeffs)

    @property
    def support(self) -> np.ndarray:
        return self._buf[: len(self)]

    @property
    def alpha(self) -> np.ndarray:
        return self.coeffs.effective

    def l1(self) -> float:
        return self.coeffs.l1()

    def append(self, x, coef: float) -> None:
        n = len(self)
        if n == self._buf.shape[0]:
            self._buf = np.concatenate([self._buf, np.zeros_like(self._buf)])
        self._buf[n] = x
        self.coeffs.append(coef)

    def shrink(self, ratio: float) -> None:
        self.coeffs.shrink(ratio)

    def exact_values(self, X) -> np.ndarray:
        """``<f, psi_x>`` through the family's closed-form kernel (oracle use only)."""
        X = as_examples(X, self.family.input_dim)
        if len(self) == 0:
            return np.zeros(X.shape[0])
        return self.family.kernel_matrix(X, self.support) @ self.alpha

    def exact_value(self, x) -> float:
        x = as_example(x, self.family.input_dim)
        return float(self.exact_values(x[None, :])[0])

    def rkhs_norm(self) -> float:
        """``|f|`` in L2(mu), via the kernel Gram matrix."""
        if len(self) == 0:
            return 0.0
        a = self.alpha
        K = self.family.kernel_matrix(self.support, self.support)
        return float(np.sqrt(max(a @ K @ a, 0.0)))

    def copy(self) -> "Hypothesis":
        return Hypothesis(self.family, self.support.copy(), self.coeffs.copy())


@dataclass(frozen=True)
class Estimate:
    value: float
    m: int
    l1_at_estimate: float


class IndexSampler:
    """Draws support indices with probability proportional to ``|alpha_i|``."""

    def __init__(self, weights: np.ndarray):
        self.prefix = np.cumsum(np.abs(weights))
        self.total = float(self.prefix[-1])
        # rounding can push u * total onto the last edge; map it to the last atom
        self._last = int(np.flatnonzero(np.abs(weights) > 0)[-1])

    def draw(self, u: float) -> int:
        return int(self.draw_many(np.array([u]))[0])

    def draw_many(self, u: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.prefix, u * self.total, side="right")
        return np.minimum(idx, self._last)

    def probabilities(self) -> np.ndarray:
        return np.diff(self.prefix, prepend=0.0) / self.total


def build_index_sampler(coeffs: Coefficients) -> IndexSampler:
    raw = coeffs.raw
    if raw.size == 0 or not np.any(raw != 0):
        raise ValueError("cannot sample indices from all-zero coefficients")
    return IndexSampler(raw)


def _draw_terms(h: Hypothesis, sampler: IndexSampler, m: int, rng, counter):
    """Sample ``m`` (index, weight) pairs; return ``sgn(alpha_i) psi(x_i; w)`` and the weights."""
    idx = sampler.draw_many(rng.random(m))
    weights = draw(h.family, rng, m, counter)
    signs = np.sign(h.coeffs.raw[idx])
    psi_support = h.family.paired(weights, h.support[idx])
    return signs * psi_support, weights


def est_scalar_prod(
    h: Hypothesis, x, m: int, rng, counter: Optional[EvalCounter] = None
) -> Estimate:
    """Unbiased estimate of ``<f, psi_x>`` from ``m`` two-stage samples.

    Returns zero without consuming randomness when the hypothesis is empty
    or all of its coefficients vanish.
    """
    m = check_count("m", m)
    x = as_example(x, h.family.input_dim)
    l1 = h.l1()
    if len(h) == 0 or l1 == 0.0:
        return Estimate(0.0, m, 0.0)
    sampler = build_index_sampler(h.coeffs)
    terms, weights = _draw_terms(h, sampler, m, rng, counter)
    terms = terms * h.family.paired(weights, np.broadcast_to(x, (m, x.size)))
    if counter is not None:
        counter.feature_evals += 2 * m
    return Estimate(l1 * float(np.mean(terms)), m, l1)


def est_scalar_prod_shared(
    h: Hypothesis, X, m: int, rng, counter: Optional[EvalCounter] = None, chunk: int = 1 << 22
) -> np.ndarray:
    """Estimates for many query points from one shared batch of ``m`` samples.

    Each returned value has exactly the distribution of :func:`est_scalar_prod`
    at that point, but errors are correlated across queries. This turns test
    evaluation into a dense (queries x m) feature product.
    """
    m = check_count("m", m)
    X = as_examples(X, h.family.input_dim)
    l1 = h.l1()
    if len(h) == 0 or l1 == 0.0:
        return np.zeros(X.shape[0])
    sampler = build_index_sampler(h.coeffs)
    terms, weights = _draw_terms(h, sampler, m, rng, counter)
    out = np.empty(X.shape[0])
    rows = max(1, chunk // m)
    for start in range(0, X.shape[0], rows):
        F = h.family.features(weights, X[start : start + rows])
        out[start : start + rows] = F @ terms
    if counter is not None:
        counter.feature_evals += m + m * X.shape[0]
    return out * (l1 / m)


def est_scalar_prod_chunked(
    h: Hypothesis,
    x,
    m: int,
    seed: int,
    call_id: int,
    n_chunks: int,
    workers: int = 1,
    counter: Optional[EvalCounter] = None,
) -> Estimate:
    """Split the ``m`` inner samples over ``n_chunks`` independent sub-streams.

    Chunk ``c`` draws from the stream keyed by ``(seed, call_id, c)``. Results
    are reproducible for a fixed chunk count, independent of ``workers``.
    """
    m = check_count("m", m)
    n_chunks = check_count("n_chunks", n_chunks)
    x = as_example(x, h.family.input_dim)
    l1 = h.l1()
    if len(h) == 0 or l1 == 0.0:
        return Estimate(0.0, m, 0.0)
    sampler = build_index_sampler(h.coeffs)
    sizes = [m // n_chunks + (1 if c < m % n_chunks else 0) for c in range(n_chunks)]

    def run_chunk(c: int):
        local = EvalCounter()
        if sizes[c] == 0:
            return 0.0, local
        rng = make_rng(seed, call_id, c)
        terms, weights = _draw_terms(h, sampler, sizes[c], rng, local)
        terms = terms * h.family.paired(weights, np.broadcast_to(x, (sizes[c], x.size)))
        local.feature_evals += 2 * sizes[c]
        return float(np.sum(terms)), local

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, range(n_chunks)))
    else:
        parts = [run_chunk(c) for c in range(n_chunks)]
    if counter is not None:
        for _, local in parts:
            counter.weight_samples += local.weight_samples
            counter.feature_evals += local.feature_evals
            counter.sample_seconds += local.sample_seconds
    total = math.fsum(s for s, _ in parts)
    return Estimate(l1 * total / m, m, l1)


def tail_bound(l1: float, m: int, eps: float) -> float:
    """Two-sided Hoeffding bound ``2 exp(-m eps^2 / (2 l1^2))`` on ``P(|E - <f, psi_x>| > eps)``.

    Not clamped; values above one are vacuous.
    """
    l1 = check_positive("l1", l1)
    eps = check_positive("eps", eps)
    m = check_count("m", m)
    return 2.0 * math.exp(-m * eps**2 / (2.0 * l1**2))


def stated_tail_bound(l1: float, m: int, eps: float) -> float:
    """The looser-constant form ``exp(-m eps^2 / l1^2)``, kept for comparison only."""
    l1 = check_positive("l1", l1)
    eps = check_positive("eps", eps)
    m = check_count("m", m)
    return math.exp(-m * eps**2 / l1**2)


def required_test_samples(l1: float, eps0: float, delta: float) -> int:
    """Smallest ``m`` with ``tail_bound(l1, m, eps0) <= delta``."""
    eps0 = check_positive("eps0", eps0)
    delta = check_probability("delta", delta)
    l1 = check_positive("l1", l1, strict=False)
    if l1 == 0.0:
        return 1
    return max(1, math.ceil(2.0 * (l1 / eps0) ** 2 * math.log(2.0 / delta)))
