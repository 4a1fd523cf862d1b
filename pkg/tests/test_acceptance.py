"""Acceptance criteria, one test per criterion, at the stated tolerances.

Each test records a one-line verdict that ``conftest.py`` prints in the
terminal summary. Run only this module with ``pytest -m acceptance``.
"""

import math
import time

import numpy as np
import pytest

from conftest import make_five_support, record_criterion
from shrinksgd import make_family
from shrinksgd._rng import derive_seed, make_rng
from shrinksgd.baselines import exact_ogd_run
from shrinksgd.bench.config import ExperimentConfig
from shrinksgd.bench.runner import cmd_compare, cmd_sweep
from shrinksgd.exceptions import InvariantViolation
from shrinksgd.scalar_estimator import est_scalar_prod
from shrinksgd.shrinking_gradient import (
    LearnerConfig,
    averaged_hypothesis,
    init_state,
    l1_norm_bound,
    predict,
    predict_many,
    run,
    step,
    theorem_schedule,
)
from shrinksgd.synthetic_data import FixedStream, realizable_stream

pytestmark = pytest.mark.acceptance

QUERY = np.array([0.15, -0.35])


@pytest.fixture(scope="module")
def estimator_trials():
    """2000 independent estimates at m=50 for criteria 1-3."""
    h = make_five_support()
    rng = make_rng(2024)
    start = time.perf_counter()
    vals = np.array([est_scalar_prod(h, QUERY, 50, rng).value for _ in range(2000)])
    elapsed = time.perf_counter() - start
    return h, vals, elapsed


def test_criterion_1_unbiasedness(estimator_trials):
    h, vals, elapsed = estimator_trials
    exact = h.exact_value(QUERY)
    gap = abs(vals.mean() - exact)
    tol = 4 * h.l1() / math.sqrt(2000 * 50)
    ok = gap <= tol and elapsed < 10
    record_criterion(1, "estimator unbiasedness", ok, f"|mean - exact| = {gap:.2e} <= {tol:.2e}, {elapsed:.2f}s")
    assert gap <= tol
    assert elapsed < 10


def test_criterion_2_variance(estimator_trials):
    h, vals, _ = estimator_trials
    var = vals.var(ddof=1)
    cap = 1.15 * h.l1() ** 2 / 50
    record_criterion(2, "estimator variance bound", var <= cap, f"var = {var:.4f} <= {cap:.4f}")
    assert var <= cap


def test_criterion_3_tail(estimator_trials):
    h, vals, _ = estimator_trials
    l1, m, target = h.l1(), 50, 0.2
    eps = l1 * math.sqrt(2 * math.log(2 / target) / m)
    bound = 2 * math.exp(-m * eps**2 / (2 * l1**2))
    assert 0.05 <= bound <= 0.5
    freq = float(np.mean(np.abs(vals - h.exact_value(QUERY)) > eps))
    record_criterion(3, "tail domination", freq <= bound, f"P(|E - v| > {eps:.3f}) = {freq:.4f} <= {bound:.3f}")
    assert freq <= bound


def test_criterion_4_l1_lemma():
    family = make_family("cosine-rff", 2, sigma=1.0)
    B, eta, T = 1.05, 0.1, 1000
    violations = shrinks = updates = 0
    for seed in range(50):
        # clustered inputs, random-sign labels and m_train=1 make the estimate
        # noisy enough to cross 16B repeatedly
        rng = make_rng(seed, 4)
        stream = FixedStream(rng.uniform(-0.2, 0.2, (T, 2)), np.sign(rng.standard_normal(T)))
        cfg = LearnerConfig(T=T, B=B, eta=eta, m_train=1, seed=derive_seed(seed, 4))
        try:
            state, summary = run(cfg, stream, family)
        except InvariantViolation:
            violations += 1
            continue
        assert 0 < state.shrink_events < T
        shrinks += state.shrink_events
        updates += T - state.shrink_events
        violations += sum(r.l1_after > l1_norm_bound(B, eta, r.t + 1) for r in summary.records)
    detail = f"{violations} violations over 50 runs ({shrinks} shrink / {updates} update rounds)"
    record_criterion(4, "L1-norm lemma", violations == 0, detail)
    assert violations == 0


def test_criterion_5_averaging_oracle():
    family = make_family("cosine-rff", 2, sigma=1.0)
    T = 50
    rng = make_rng(5)
    X, y = rng.uniform(-0.2, 0.2, (T, 2)), np.sign(rng.standard_normal(T))
    # a low threshold factor so the 50 rounds mix shrinks and updates
    cfg = LearnerConfig(T=T, B=1.05, eta=0.1, m_train=1, seed=5, shrink_threshold_factor=1.0)
    state = init_state(cfg, family)
    snapshots = []
    for t in range(T):
        step(state, X[t], y[t], cfg)
        snapshots.append(state.hypothesis.alpha.copy())
    n = len(state.hypothesis)
    brute = np.mean([np.pad(a, (0, n - a.size)) for a in snapshots], axis=0)
    diff = float(np.max(np.abs(averaged_hypothesis(state).alpha - brute)))
    ok = diff < 1e-12 and 0 < state.shrink_events < T
    record_criterion(5, "averaging oracle", ok, f"max |diff| = {diff:.1e} ({state.shrink_events} shrinks)")
    assert state.shrink_events > 0
    assert diff < 1e-12


SWEEP_CONFIG = """
[experiment]
repeats = 10
seed = 0
[family]
name = cosine-rff
dim = 2
sigma = 1.0
[data]
kind = realizable
support_size = 10
target_norm = 1.0
noise_sd = 0.1
[learner]
B = 2
c_m = 2.4e-5
m_min = 1000
m_max = 10000
[sweep]
horizons = 500, 2000, 8000
"""


def test_criterion_6_regret_scaling(tmp_path):
    cfg = ExperimentConfig.from_string(SWEEP_CONFIG)
    start = time.perf_counter()
    table = cmd_sweep(cfg, tmp_path)
    elapsed = time.perf_counter() - start
    per_T = [row["regret_per_T"] for row in table]
    scaled = [row["regret_over_B_sqrt_T"] for row in table]
    ms = [row["m_train"] for row in table]
    decreasing = all(a > b for a, b in zip(per_T, per_T[1:]))
    band = max(scaled) / min(scaled) if min(scaled) > 0 else math.inf
    ok = decreasing and band <= 3 and all(1000 <= m <= 10_000 for m in ms) and elapsed < 900
    detail = "; ".join(
        f"T={r['T']} m={r['m_train']} R/T={r['regret_per_T']:.4f} R/(B sqrt T)={r['regret_over_B_sqrt_T']:.4f}"
        for r in table
    )
    record_criterion(6, "regret scaling", ok, f"{detail}; band {band:.2f}, {elapsed:.0f}s")
    assert all(1000 <= m <= 10_000 for m in ms)
    assert decreasing
    assert band <= 3
    assert elapsed < 900


def test_criterion_7_parity_with_exact_ogd():
    family = make_family("cosine-rff", 2, sigma=1.0)
    T, B = 2000, 2.0
    eta = theorem_schedule(B, T).eta
    gaps, shrink_mse, exact_mse = [], [], []
    for seed in range(10):
        stream = realizable_stream(family, 10, 1.0, 0.1, 2, seed=derive_seed(seed, 7))
        X_test, y_test = stream.test(2000)
        cfg = LearnerConfig(T=T, B=B, eta=eta, m_train=2000, seed=derive_seed(seed, 7, 1), track_exact_loss=False)
        state, _ = run(cfg, stream, family)
        pred = predict_many(averaged_hypothesis(state), X_test, 0.1, 0.05, make_rng(seed, 7, 2))
        ogd, _ = exact_ogd_run(cfg, stream, family)
        shrink_mse.append(np.mean((pred - y_test) ** 2))
        exact_mse.append(np.mean((averaged_hypothesis(ogd).exact_values(X_test) - y_test) ** 2))
    gap = abs(np.mean(shrink_mse) - np.mean(exact_mse))
    detail = f"MSE {np.mean(shrink_mse):.4f} vs exact-OGD {np.mean(exact_mse):.4f}, gap {gap:.4f} <= 0.05"
    record_criterion(7, "parity with exact-kernel OGD", gap <= 0.05, detail)
    assert gap <= 0.05


def test_criterion_8_call_complexity():
    family = make_family("cosine-rff", 2, sigma=1.0)
    B, c_m = 2.0, 1e-6
    horizons = [250, 500, 1000, 2000]
    counts = {}
    for T in horizons:
        stream = realizable_stream(family, 10, 1.0, 0.1, 2, seed=8)
        cfg = LearnerConfig.from_schedule(T, B, c_m=c_m, seed=8, track_exact_loss=False)
        state, _ = run(cfg, stream, family)
        counts[T] = state.counter.weight_samples
    m = {T: theorem_schedule(B, T, c_m=c_m).m_train for T in horizons}
    lines, ok = [], True
    for T in horizons:
        # round 1 has an empty hypothesis and draws nothing; every later round draws m(T)
        ok &= counts[T] == (T - 1) * m[T]
    for T, T2 in zip(horizons, horizons[1:]):
        # doubling law: count(2T) / count(T) = 2 m(2T) / m(T) * (2T - 1) / (2T - 2), in integers
        ok &= counts[T2] * m[T] * (2 * T - 2) == counts[T] * 2 * m[T2] * (2 * T - 1)
        lines.append(f"{T}->{T2}: x{counts[T2] / counts[T]:.4f} vs 2m(2T)/m(T)={2 * m[T2] / m[T]:.4f}")
    record_criterion(8, "quadratic call complexity", ok, "; ".join(lines))
    assert ok


COMPARE_CONFIG = """
[experiment]
algorithms = shrinking, dsgd
repeats = 20
seed = 0
[family]
name = cosine-rff
dim = 2
sigma = 0.5
[data]
kind = toy2d
noise_sd = 0.1
test_size = 2000
[learner]
B = 4
m_train = 500
eps0 = 0.2
delta = 0.05
[dsgd]
eta0 = 0.5
schedule = inverse_sqrt
average = false
[compare]
sizes = 64, 128, 256, 512, 1024, 2048, 4096
test_eval = estimate
"""


def test_criterion_9_toy_comparison(tmp_path):
    cfg = ExperimentConfig.from_string(COMPARE_CONFIG)
    table = cmd_compare(cfg, tmp_path)
    mse = {(row["train_size"], row["algorithm"]): row["test_mse"] for row in table}
    ratios = {n: mse[n, "shrinking"] / mse[n, "dsgd"] for n in cfg.compare.sizes}
    worst = max(ratios.values())
    detail = ", ".join(f"{n}: {mse[n, 'shrinking']:.4f}/{mse[n, 'dsgd']:.4f}" for n in cfg.compare.sizes)
    record_criterion(9, "toy comparison (soft)", worst <= 1.2, f"shrinking/DSGD MSE {detail}; worst ratio {worst:.3f}")
    assert worst <= 1.2


def test_criterion_10_test_time_accuracy():
    family = make_family("cosine-rff", 2, sigma=1.0)
    stream = realizable_stream(family, 10, 1.0, 0.1, 2, seed=10)
    cfg = LearnerConfig(T=300, B=2.0, eta=0.05, m_train=500, seed=10, track_exact_loss=False)
    state, _ = run(cfg, stream, family)
    h = averaged_hypothesis(state)
    x = np.array([0.25, -0.4])
    exact = h.exact_value(x)
    hits = sum(abs(predict(h, x, 0.1, 0.05, make_rng(10, trial)) - exact) <= 0.1 for trial in range(500))
    record_criterion(10, "test-time accuracy contract", hits >= 475, f"{hits}/500 within eps0 (need 475)")
    assert hits >= 475
