"""Random-feature families: parameter samplers, bounded feature maps, kernels.

A family couples a sampleable parameter law ``mu`` with a feature map
``psi(x; w)`` bounded by one in absolute value. The kernel it induces is
``k(x1, x2) = E_w[psi(x1; w) psi(x2; w)]``. Where that expectation has a
closed form the family exposes it; the learners never call it, it exists so
tests and benchmarks have an exact oracle.

Families are immutable and hold no random state. All sampling goes through
a caller-supplied :class:`numpy.random.Generator`.
"""

from __future__ import annotations

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar, Optional

import numpy as np

from ._validation import as_example, as_examples

__all__ = [
    "Weight",
    "WeightBatch",
    "EvalCounter",
    "FeatureFamily",
    "CosineFamily",
    "SignNeuronFamily",
    "TanhNeuronFamily",
    "ConstantFamily",
    "FAMILIES",
    "make_family",
    "sample_weight",
    "evaluate",
    "exact_kernel",
    "monte_carlo_kernel",
]


@dataclass(frozen=True)
class Weight:
    """One sampled feature parameter; ``phase`` is only used by the cosine family."""

    omega: np.ndarray
    phase: Optional[float] = None


@dataclass(frozen=True)
class WeightBatch:
    omega: np.ndarray  # (n, d)
    phase: Optional[np.ndarray] = None  # (n,)

    def __len__(self) -> int:
        return self.omega.shape[0]

    def __getitem__(self, i: int) -> Weight:
        phase = None if self.phase is None else float(self.phase[i])
        return Weight(self.omega[i].copy(), phase)

    @classmethod
    def stack(cls, weights) -> "WeightBatch":
        weights = list(weights)
        omega = np.stack([w.omega for w in weights])
        if weights[0].phase is None:
            return cls(omega)
        return cls(omega, np.array([w.phase for w in weights], dtype=float))


@dataclass
class EvalCounter:
    """Exact tallies of sampler calls and feature evaluations.

    ``sample_seconds`` accumulates wall time spent inside the parameter
    sampler, which gives the per-sample cost estimate reported in run
    summaries.
    """

    weight_samples: int = 0
    feature_evals: int = 0
    sample_seconds: float = 0.0

    def as_dict(self) -> dict:
        return {
            "weight_samples": self.weight_samples,
            "feature_evals": self.feature_evals,
            "sample_seconds": self.sample_seconds,
        }


class FeatureFamily(ABC):
    """Base class for a random-feature family of fixed input dimension."""

    name: ClassVar[str]
    has_exact_kernel: ClassVar[bool] = False

    def __init__(self, dim: int):
        dim = int(dim)
        if dim < 1:
            raise ValueError(f"input dimension must be >= 1, got {dim}")
        self._dim = dim

    @property
    def input_dim(self) -> int:
        return self._dim

    @property
    def hyperparams(self) -> dict:
        return {}

    def spec(self) -> dict:
        """Flat description used in config files and checkpoints."""
        return {"name": self.name, "dim": self.input_dim, **self.hyperparams}

    def __repr__(self) -> str:
        params = ", ".join(f"{k}={v!r}" for k, v in self.spec().items() if k != "name")
        return f"{type(self).__name__}({params})"

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.spec() == other.spec()

    def __hash__(self) -> int:
        return hash(tuple(sorted(self.spec().items())))

    def sample(self, rng: np.random.Generator, n: int) -> WeightBatch:
        """Draw ``n`` independent parameters from the family's law."""
        return self._sample(rng, int(n))

    @abstractmethod
    def _sample(self, rng: np.random.Generator, n: int) -> WeightBatch: ...

    @abstractmethod
    def _activate(self, z: np.ndarray, weights: WeightBatch) -> np.ndarray:
        """Map pre-activations ``z`` (last axis indexes weights) to features."""

    def features(self, weights: WeightBatch, X) -> np.ndarray:
        """Feature matrix ``F[a, j] = psi(X[a]; w_j)`` of shape (len(X), len(weights))."""
        X = as_examples(X, self._dim)
        return self._activate(X @ weights.omega.T, weights)

    def paired(self, weights: WeightBatch, X) -> np.ndarray:
        """Row-paired features ``psi(X[k]; w_k)``."""
        X = as_examples(X, self._dim)
        if X.shape[0] != len(weights):
            raise ValueError("paired evaluation needs one example per weight")
        z = np.einsum("kd,kd->k", X, weights.omega)
        return self._activate(z, weights)

    def kernel_matrix(self, X1, X2) -> np.ndarray:
        if not self.has_exact_kernel:
            raise NotImplementedError(f"{self.name} has no closed-form kernel")
        return self._kernel(as_examples(X1, self._dim), as_examples(X2, self._dim))

    def _kernel(self, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class CosineFamily(FeatureFamily):
    """Random Fourier features ``cos(w.x + b)``, ``w ~ N(0, I/sigma^2)``, ``b ~ U[0, 2pi)``.

    The induced kernel is ``0.5 * exp(-|x1 - x2|^2 / (2 sigma^2))``. The factor
    one half is kept rather than rescaling the features by sqrt(2), so that
    features stay inside [-1, 1].
    """

    name = "cosine-rff"
    has_exact_kernel = True

    def __init__(self, dim: int, sigma: float = 1.0):
        super().__init__(dim)
        sigma = float(sigma)
        if not sigma > 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        self.sigma = sigma

    @property
    def hyperparams(self) -> dict:
        return {"sigma": self.sigma}

    def _sample(self, rng, n):
        omega = rng.standard_normal((n, self._dim)) / self.sigma
        phase = rng.uniform(0.0, 2.0 * np.pi, size=n)
        return WeightBatch(omega, phase)

    def _activate(self, z, weights):
        return np.cos(z + weights.phase)

    def _kernel(self, X1, X2):
        sq = (
            np.sum(X1**2, axis=1)[:, None]
            + np.sum(X2**2, axis=1)[None, :]
            - 2.0 * X1 @ X2.T
        )
        np.maximum(sq, 0.0, out=sq)
        return 0.5 * np.exp(-sq / (2.0 * self.sigma**2))


class SignNeuronFamily(FeatureFamily):
    """Threshold units ``sign(w.x)`` with ``w ~ N(0, I)`` and ``sign(0) = +1``.

    The kernel is the degree-zero arc-cosine kernel ``1 - 2 theta / pi``.
    """

    name = "sign-neuron"
    has_exact_kernel = True

    def _sample(self, rng, n):
        return WeightBatch(rng.standard_normal((n, self._dim)))

    def _activate(self, z, weights):
        return np.where(z >= 0.0, 1.0, -1.0)

    def _kernel(self, X1, X2):
        n1 = np.linalg.norm(X1, axis=1)
        n2 = np.linalg.norm(X2, axis=1)
        if np.any(n1 == 0.0) or np.any(n2 == 0.0):
            raise ValueError("angle is undefined for a zero input vector")
        cos = (X1 @ X2.T) / np.outer(n1, n2)
        theta = np.arccos(np.clip(cos, -1.0, 1.0))
        return 1.0 - 2.0 * theta / np.pi


class TanhNeuronFamily(FeatureFamily):
    """Smooth units ``tanh(w.x)`` with ``w ~ N(0, I/sigma^2)``; no closed-form kernel."""

    name = "tanh-neuron"

    def __init__(self, dim: int, sigma: float = 1.0):
        super().__init__(dim)
        sigma = float(sigma)
        if not sigma > 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        self.sigma = sigma

    @property
    def hyperparams(self) -> dict:
        return {"sigma": self.sigma}

    def _sample(self, rng, n):
        return WeightBatch(rng.standard_normal((n, self._dim)) / self.sigma)

    def _activate(self, z, weights):
        return np.tanh(z)


class ConstantFamily(FeatureFamily):
    """Degenerate family with ``psi == 1``; its kernel is identically one.

    Useful for checking learner recursions in closed form. Sampling consumes
    no randomness.
    """

    name = "constant"
    has_exact_kernel = True

    def _sample(self, rng, n):
        return WeightBatch(np.zeros((n, self._dim)))

    def _activate(self, z, weights):
        return np.ones_like(z, dtype=float)

    def _kernel(self, X1, X2):
        return np.ones((X1.shape[0], X2.shape[0]))


FAMILIES = {
    cls.name: cls
    for cls in (CosineFamily, SignNeuronFamily, TanhNeuronFamily, ConstantFamily)
}


def make_family(name: str, dim: int, **hyperparams) -> FeatureFamily:
    """Build a family from its string id and flat hyperparameters."""
    try:
        cls = FAMILIES[name]
    except KeyError:
        raise ValueError(
            f"unknown feature family {name!r}; expected one of {sorted(FAMILIES)}"
        ) from None
    try:
        return cls(dim, **hyperparams)
    except TypeError as exc:
        raise ValueError(f"bad hyperparameters for {name!r}: {exc}") from None


def draw(family: FeatureFamily, rng, n: int, counter: Optional[EvalCounter] = None) -> WeightBatch:
    """Sample ``n`` weights, charging them to ``counter`` if given."""
    if counter is None:
        return family.sample(rng, n)
    start = time.perf_counter()
    weights = family.sample(rng, n)
    counter.sample_seconds += time.perf_counter() - start
    counter.weight_samples += n
    return weights


def sample_weight(family: FeatureFamily, rng, counter: Optional[EvalCounter] = None) -> Weight:
    return draw(family, rng, 1, counter)[0]


def evaluate(family: FeatureFamily, w: Weight, x) -> float:
    """Single feature value ``psi(x; w)``."""
    x = as_example(x, family.input_dim)
    omega = np.asarray(w.omega, dtype=float)
    if omega.shape != (family.input_dim,):
        raise ValueError(
            f"weight has shape {omega.shape}, family expects ({family.input_dim},)"
        )
    phase = None if w.phase is None else np.array([w.phase])
    batch = WeightBatch(omega[None, :], phase)
    return float(family.paired(batch, x[None, :])[0])


def exact_kernel(family: FeatureFamily, x1, x2) -> Optional[float]:
    """Closed-form ``E_w[psi(x1; w) psi(x2; w)]``, or ``None`` if the family has none."""
    if not family.has_exact_kernel:
        return None
    x1 = as_example(x1, family.input_dim)
    x2 = as_example(x2, family.input_dim)
    return float(family.kernel_matrix(x1[None, :], x2[None, :])[0, 0])


def monte_carlo_kernel(
    family: FeatureFamily, x1, x2, n: int, rng, counter: Optional[EvalCounter] = None
) -> float:
    """Mean of ``psi(x1; w) psi(x2; w)`` over ``n`` fresh weights."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x1 = as_example(x1, family.input_dim)
    x2 = as_example(x2, family.input_dim)
    weights = draw(family, rng, n, counter)
    vals = family.features(weights, np.stack([x1, x2]))
    if counter is not None:
        counter.feature_evals += 2 * n
    return float(np.mean(vals[0] * vals[1]))
