"""Reference learners and the comparator oracle used to measure regret."""

from __future__ import annotations

import math
import time
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
import scipy.linalg

from ._rng import make_rng
from ._validation import as_examples, check_count, check_label, check_positive
from .feature_space import EvalCounter, FeatureFamily, WeightBatch, draw
from .shrinking_gradient import LearnerConfig, LearnerState, init_state, take_pairs
from .summary import RoundRecord, RunSummary

__all__ = [
    "ExplicitFeatureHypothesis",
    "exact_ogd_step",
    "exact_ogd_run",
    "dsgd_run",
    "inverse_sqrt_schedule",
    "Comparator",
    "comparator_loss",
    "RIDGE_GRID",
]

RIDGE_GRID = np.logspace(-6, 1, 15)
_JITTER = 1e-8


def exact_ogd_step(state: LearnerState, x_t, y_t: float, eta: float) -> RoundRecord:
    """One round of kernel OGD on the squared loss, using the closed-form kernel."""
    h = state.hypothesis
    y_t = check_label(y_t)
    p_t = h.exact_value(x_t)
    h.append(x_t, -eta * (p_t - y_t))
    state.t += 1
    n = len(h)
    if n > state._acc.size:
        state._acc = np.concatenate([state._acc, np.zeros(max(n, state._acc.size))])
    state._acc[:n] += h.alpha
    loss = 0.5 * (p_t - y_t) ** 2
    return RoundRecord(state.t, p_t, False, y_t, h.l1(), loss, loss)


def exact_ogd_run(config: LearnerConfig, stream, family: FeatureFamily) -> tuple:
    """Kernel OGD with step ``config.eta``; returns ``(state, summary)``.

    ``m_train`` and the shrinkage settings in ``config`` are ignored.
    """
    if not family.has_exact_kernel:
        raise ValueError(f"{family.name} has no exact kernel")
    X, y = take_pairs(stream, config.T)
    state = init_state(config, family)
    start = time.perf_counter()
    records = [exact_ogd_step(state, X[t], y[t], config.eta) for t in range(config.T)]
    summary = RunSummary(
        algorithm="exact_ogd",
        records=records,
        counters=state.counters,
        wall_time=time.perf_counter() - start,
    )
    return state, summary


class ExplicitFeatureHypothesis:
    """``f(x) = sum_j beta_j psi(x; w_j)`` over explicitly stored weights."""

    def __init__(self, family: FeatureFamily, weights: WeightBatch, beta):
        self.family = family
        self.weights = weights
        self.beta = np.asarray(beta, dtype=float)
        if len(weights) != self.beta.size:
            raise ValueError("one coefficient per weight required")

    def __len__(self) -> int:
        return self.beta.size

    def values(self, X, chunk: int = 1 << 22) -> np.ndarray:
        X = as_examples(X, self.family.input_dim)
        if len(self) == 0:
            return np.zeros(X.shape[0])
        out = np.empty(X.shape[0])
        rows = max(1, chunk // len(self))
        for start in range(0, X.shape[0], rows):
            F = self.family.features(self.weights, X[start : start + rows])
            out[start : start + rows] = F @ self.beta
        return out


def inverse_sqrt_schedule(eta0: float) -> Callable[[int], float]:
    eta0 = check_positive("eta0", eta0)
    return lambda t: eta0 / math.sqrt(t)


def dsgd_run(
    T: int,
    step_schedule: Union[float, Callable[[int], float]],
    gamma: float,
    family: FeatureFamily,
    stream,
    seed: int,
) -> tuple:
    """Doubly stochastic functional SGD with one fresh random feature per round.

    Round ``t`` draws ``w_t``, predicts with the features drawn so far,
    decays the old coefficients by ``1 - eta_t gamma`` and adds
    ``beta_t = -eta_t (p_t - y_t) psi(x_t; w_t)``. Returns
    ``(final, averaged, summary)`` where ``averaged`` carries the mean of the
    coefficient vectors over rounds.
    """
    T = check_count("T", T, minimum=0)
    gamma = check_positive("gamma", gamma, strict=False)
    schedule = step_schedule if callable(step_schedule) else (lambda t, c=float(step_schedule): c)
    X, y = take_pairs(stream, T)
    rng = make_rng(seed)
    counter = EvalCounter()
    d = family.input_dim
    omega = np.zeros((T, d))
    phase = np.zeros(T)
    beta = np.zeros(T)
    acc = np.zeros(T)
    has_phase = False
    records = []
    start = time.perf_counter()
    for t in range(T):
        w = draw(family, rng, 1, counter)
        omega[t] = w.omega[0]
        has_phase = w.phase is not None
        if has_phase:
            phase[t] = w.phase[0]
        batch = WeightBatch(omega[: t + 1], phase[: t + 1] if has_phase else None)
        feats = family.features(batch, X[t][None, :])[0]
        counter.feature_evals += t + 1
        p_t = float(feats[:t] @ beta[:t])
        y_t = check_label(y[t])
        eta_t = schedule(t + 1)
        if gamma:
            beta[:t] *= 1.0 - eta_t * gamma
        beta[t] = -eta_t * (p_t - y_t) * feats[t]
        acc[: t + 1] += beta[: t + 1]
        loss = 0.5 * (p_t - y_t) ** 2
        l1 = float(np.sum(np.abs(beta[: t + 1])))
        records.append(RoundRecord(t + 1, p_t, False, y_t, l1, loss, loss))
    weights = WeightBatch(omega, phase if has_phase else None)
    final = ExplicitFeatureHypothesis(family, weights, beta)
    averaged = ExplicitFeatureHypothesis(family, weights, acc / T if T else acc)
    summary = RunSummary(
        algorithm="dsgd",
        records=records,
        counters={**counter.as_dict(), "shrink_events": 0},
        wall_time=time.perf_counter() - start,
    )
    return final, averaged, summary


class Comparator(NamedTuple):
    loss: float
    norm: float
    lam: Optional[float]


def comparator_loss(X, y, family: FeatureFamily, B: float, lambdas=RIDGE_GRID) -> Comparator:
    """Approximate ``min_{|f| <= B} sum_t 0.5 (f(x_t) - y_t)^2`` by a ridge path.

    Ridge solutions ``alpha = (K + lam I)^{-1} y`` are tried from the largest
    ``lam`` down. Along that path the training loss is nonincreasing and the
    norm ``sqrt(alpha' K alpha)`` nondecreasing, so the first solution that
    leaves the ball ends the scan and the previous one is the best feasible
    grid point. The zero function is always feasible.
    """
    if not family.has_exact_kernel:
        raise ValueError(f"{family.name} has no exact kernel")
    X = as_examples(X, family.input_dim)
    y = np.asarray(y, dtype=float)
    B = check_positive("B", B, strict=False)
    best = Comparator(0.5 * float(y @ y), 0.0, None)
    if X.shape[0] == 0 or not np.any(y):
        return best
    K = family.kernel_matrix(X, X)
    for lam in sorted(np.asarray(lambdas, dtype=float), reverse=True):
        A = K.copy()
        A[np.diag_indices_from(A)] += lam + _JITTER
        alpha = scipy.linalg.cho_solve(scipy.linalg.cho_factor(A, lower=True), y)
        pred = K @ alpha
        norm = math.sqrt(max(float(alpha @ pred), 0.0))
        if norm > B:
            break
        loss = 0.5 * float(np.sum((pred - y) ** 2))
        if loss <= best.loss:
            best = Comparator(loss, norm, float(lam))
    return best


def realizable_comparator(stream, X, y, B: float) -> Comparator:
    """Ridge comparator, also offering the stream's own target when it fits the ball."""
    best = comparator_loss(X, y, stream.target.family, B)
    target = stream.target
    norm = target.rkhs_norm()
    if norm <= B:
        loss = 0.5 * float(np.sum((target.exact_values(X) - y) ** 2))
        if loss < best.loss:
            best = Comparator(loss, norm, None)
    return best
