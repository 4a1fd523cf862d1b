"""Online kernel regression from sampled features with a shrinkage step.

Each round the learner estimates its own prediction ``E_t = <f_t, psi_{x_t}>``
with :func:`~shrinksgd.scalar_estimator.est_scalar_prod`. If the estimate is
small, the new example joins the support with the stochastic gradient
coefficient ``-eta (E_t - y_t)``. If it is large (``|E_t| >= 16 B`` by
default) the whole hypothesis is divided by four instead and the example is
dropped. That keeps ``|alpha|_1`` below ``(16B + 1) eta t``, which in turn
bounds the estimator variance.

The functional core (``init_state``/``step``/``run``) is what the benchmark
harness drives; :class:`~shrinksgd.estimators.ShrinkingGradientRegressor`
wraps it in the scikit-learn interface.
"""

from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from ._rng import make_rng, rng_from_state, rng_state
from ._validation import as_example, check_count, check_label, check_positive
from .exceptions import InvariantViolation, StreamExhausted
from .feature_space import EvalCounter, FeatureFamily, make_family
from .scalar_estimator import (
    Coefficients,
    Hypothesis,
    est_scalar_prod,
    est_scalar_prod_shared,
    required_test_samples,
)
from .summary import RoundRecord, RunSummary

__all__ = [
    "Schedule",
    "LearnerConfig",
    "LearnerState",
    "theorem_schedule",
    "l1_norm_bound",
    "init_state",
    "step",
    "run",
    "averaged_hypothesis",
    "predict",
    "predict_many",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_FORMAT = "shrinksgd-checkpoint"
CHECKPOINT_VERSION = 1


class Schedule(NamedTuple):
    eta: float
    m_train: int
    gamma: float


def theorem_schedule(B: float, T: int, c_eta: float = 1.0, c_m: float = 1.0) -> Schedule:
    """Step size and per-round sample count from the regret analysis.

    ``eta = c_eta * B / (2 sqrt(T))`` and
    ``m = ceil(c_m * ((16B + 1) B)^2 * T * ln(gamma))`` with
    ``gamma = max(((16B + 1) eta T + B)^2 / eta^2, e)``.
    """
    B = float(B)
    if not B > 1:
        raise ValueError(f"B must exceed 1, got {B}")
    T = check_count("T", T)
    c_eta = check_positive("c_eta", c_eta)
    c_m = check_positive("c_m", c_m)
    eta = c_eta * B / (2.0 * math.sqrt(T))
    gamma = max(((16.0 * B + 1.0) * eta * T + B) ** 2 / eta**2, math.e)
    m = math.ceil(c_m * ((16.0 * B + 1.0) * B) ** 2 * T * math.log(gamma))
    return Schedule(eta, max(1, m), gamma)


def l1_norm_bound(B: float, eta: float, t: int, threshold_factor: float = 16.0) -> float:
    """Upper bound ``(threshold_factor * B + 1) * eta * t`` on ``|alpha^(t)|_1``."""
    return (threshold_factor * B + 1.0) * eta * t


@dataclass
class LearnerConfig:
    T: int
    B: float
    eta: float
    m_train: int
    shrink_threshold_factor: float = 16.0
    shrink_ratio: float = 0.25
    seed: int = 0
    c_eta: float = 1.0
    c_m: float = 1.0
    track_exact_loss: bool = True

    def __post_init__(self):
        self.T = check_count("T", self.T, minimum=0)
        self.B = float(self.B)
        if not self.B > 1:
            raise ValueError(f"B must exceed 1, got {self.B}")
        self.eta = check_positive("eta", self.eta)
        self.m_train = check_count("m_train", self.m_train)
        self.shrink_threshold_factor = check_positive(
            "shrink_threshold_factor", self.shrink_threshold_factor
        )
        if not 0.0 < self.shrink_ratio < 1.0:
            raise ValueError(f"shrink_ratio must lie in (0, 1), got {self.shrink_ratio}")
        self.seed = int(self.seed)
        if self.eta >= 1.0 / 8.0:
            warnings.warn(
                f"eta={self.eta} is not below 1/8; the regret guarantee assumes it is",
                RuntimeWarning,
                stacklevel=3,
            )

    @classmethod
    def from_schedule(cls, T: int, B: float, c_eta: float = 1.0, c_m: float = 1.0, **kwargs):
        sched = theorem_schedule(B, T, c_eta, c_m)
        return cls(T=T, B=B, eta=sched.eta, m_train=sched.m_train, c_eta=c_eta, c_m=c_m, **kwargs)

    @property
    def threshold(self) -> float:
        return self.shrink_threshold_factor * self.B


@dataclass
class LearnerState:
    hypothesis: Hypothesis
    rng: np.random.Generator
    t: int = 0
    counter: EvalCounter = field(default_factory=EvalCounter)
    shrink_events: int = 0
    _acc: np.ndarray = field(default_factory=lambda: np.zeros(16), repr=False)

    @property
    def avg_accumulator(self) -> np.ndarray:
        """Running sum over rounds of each support point's effective coefficient."""
        return self._acc[: len(self.hypothesis)]

    @property
    def counters(self) -> dict:
        return {**self.counter.as_dict(), "shrink_events": self.shrink_events}


def init_state(config: LearnerConfig, family: FeatureFamily) -> LearnerState:
    return LearnerState(Hypothesis(family), make_rng(config.seed))


Estimator = Callable[..., object]


def step(
    state: LearnerState,
    x_t,
    y_t: float,
    config: LearnerConfig,
    estimator: Estimator = est_scalar_prod,
) -> RoundRecord:
    """Play one round: estimate, then either append a gradient term or shrink."""
    if config.T and state.t >= config.T:
        raise ValueError(f"horizon T={config.T} already reached")
    h = state.hypothesis
    x_t = as_example(x_t, h.family.input_dim)
    y_t = check_label(y_t)

    exact_loss = None
    if config.track_exact_loss and h.family.has_exact_kernel:
        exact_loss = 0.5 * (h.exact_value(x_t) - y_t) ** 2

    E_t = float(estimator(h, x_t, config.m_train, state.rng, state.counter).value)
    shrink = not abs(E_t) < config.threshold
    if shrink:
        h.shrink(config.shrink_ratio)
        state.shrink_events += 1
    else:
        h.append(x_t, -config.eta * (E_t - y_t))
    state.t += 1

    n = len(h)
    if n > state._acc.size:
        state._acc = np.concatenate([state._acc, np.zeros(max(n, state._acc.size))])
    state._acc[:n] += h.alpha

    l1 = h.l1()
    bound = l1_norm_bound(config.B, config.eta, state.t + 1, config.shrink_threshold_factor)
    if l1 > bound:
        raise InvariantViolation(f"|alpha|_1 = {l1} exceeds {bound} after round {state.t}")
    return RoundRecord(
        t=state.t,
        E_t=E_t,
        shrink=shrink,
        y_t=y_t,
        l1_after=l1,
        surrogate_loss=0.5 * (E_t - y_t) ** 2,
        exact_loss=exact_loss,
    )


def take_pairs(stream, T: int):
    """First ``T`` pairs of ``stream`` as arrays, or :class:`StreamExhausted`."""
    if hasattr(stream, "take"):
        return stream.take(T)
    pairs = []
    it = iter(stream)
    for _ in range(T):
        try:
            pairs.append(next(it))
        except StopIteration:
            raise StreamExhausted(f"stream yielded {len(pairs)} pairs, {T} needed") from None
    if not pairs:
        return np.zeros((0, 0)), np.zeros(0)
    X = np.stack([np.asarray(p[0], dtype=float) for p in pairs])
    y = np.array([p[1] for p in pairs], dtype=float)
    return X, y


def run(
    config: LearnerConfig,
    stream,
    family: FeatureFamily,
    estimator: Estimator = est_scalar_prod,
) -> tuple:
    """Run ``config.T`` rounds over ``stream``; returns ``(state, summary)``."""
    X, y = take_pairs(stream, config.T)
    state = init_state(config, family)
    records = []
    start = time.perf_counter()
    for t in range(config.T):
        records.append(step(state, X[t], y[t], config, estimator))
    summary = RunSummary(
        algorithm="shrinking",
        records=records,
        counters=state.counters,
        wall_time=time.perf_counter() - start,
    )
    return state, summary


def averaged_hypothesis(state: LearnerState) -> Hypothesis:
    """Average of the post-update hypotheses over all rounds played."""
    h = state.hypothesis
    if state.t == 0:
        return Hypothesis(h.family)
    return Hypothesis(h.family, h.support.copy(), Coefficients(state.avg_accumulator / state.t))


def predict(
    h: Hypothesis,
    x,
    eps0: float,
    delta: float,
    rng,
    clamp: bool = False,
    counter: Optional[EvalCounter] = None,
) -> float:
    """Estimate ``<f, psi_x>`` to within ``eps0`` with probability ``1 - delta``."""
    m = required_test_samples(h.l1(), eps0, delta)
    value = est_scalar_prod(h, x, m, rng, counter).value
    return float(np.clip(value, -1.0, 1.0)) if clamp else value


def predict_many(
    h: Hypothesis,
    X,
    eps0: float,
    delta: float,
    rng,
    clamp: bool = False,
    shared: bool = True,
    counter: Optional[EvalCounter] = None,
) -> np.ndarray:
    """Vector version of :func:`predict`.

    With ``shared=True`` one batch of samples serves every query; the
    per-point accuracy guarantee is unchanged but errors are correlated.
    """
    X = np.asarray(X, dtype=float)
    if shared:
        m = required_test_samples(h.l1(), eps0, delta)
        out = est_scalar_prod_shared(h, X, m, rng, counter)
    else:
        out = np.array([predict(h, x, eps0, delta, rng, counter=counter) for x in X])
    return np.clip(out, -1.0, 1.0) if clamp else out


def save_checkpoint(path, state: LearnerState, config: LearnerConfig) -> None:
    """Write a self-describing JSON checkpoint sufficient for bit-exact resume."""
    h = state.hypothesis
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "family": h.family.spec(),
        "config": asdict(config),
        "t": state.t,
        "support": h.support.tolist(),
        "raw": h.coeffs.raw.tolist(),
        "scale": h.coeffs.scale,
        "avg_accumulator": state.avg_accumulator.tolist(),
        "counters": state.counters,
        "rng": rng_state(state.rng),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_checkpoint(path) -> tuple:
    """Inverse of :func:`save_checkpoint`; returns ``(state, config)``."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    fam = dict(doc["family"])
    family = make_family(fam.pop("name"), fam.pop("dim"), **fam)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        config = LearnerConfig(**doc["config"])
    d = family.input_dim
    support = np.asarray(doc["support"], dtype=float).reshape(-1, d)
    coeffs = Coefficients(doc["raw"], scale=doc["scale"])
    acc = np.asarray(doc["avg_accumulator"], dtype=float)
    counters = doc["counters"]
    state = LearnerState(
        hypothesis=Hypothesis(family, support, coeffs),
        rng=rng_from_state(doc["rng"]),
        t=int(doc["t"]),
        counter=EvalCounter(
            counters["weight_samples"], counters["feature_evals"], counters["sample_seconds"]
        ),
        shrink_events=int(counters["shrink_events"]),
        _acc=np.concatenate([acc, np.zeros(16)]),
    )
    return state, config
