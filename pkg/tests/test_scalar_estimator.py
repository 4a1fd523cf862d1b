import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_five_support
from shrinksgd import make_family
from shrinksgd._rng import make_rng
from shrinksgd.feature_space import EvalCounter
from shrinksgd.scalar_estimator import (
    Coefficients,
    Hypothesis,
    IndexSampler,
    est_scalar_prod,
    est_scalar_prod_chunked,
    est_scalar_prod_shared,
    required_test_samples,
    stated_tail_bound,
    tail_bound,
)

X0 = np.array([0.2, -0.3])
FIVE = make_five_support()


def test_empty_hypothesis_estimates_zero_without_sampling(cosine):
    rng = make_rng(0)
    before = rng.bit_generator.state
    counter = EvalCounter()
    est = est_scalar_prod(Hypothesis(cosine), X0, 100, rng, counter)
    assert est.value == 0.0 and est.m == 100 and est.l1_at_estimate == 0.0
    assert counter.weight_samples == 0 and counter.feature_evals == 0
    assert rng.bit_generator.state == before


def test_all_zero_coefficients_estimate_zero(cosine):
    h = Hypothesis.from_arrays(cosine, np.ones((2, 2)), [0.0, 0.0])
    assert est_scalar_prod(h, X0, 10, make_rng(0)).value == 0.0


def test_sign_neuron_self_product_is_exact():
    # psi(x; w)^2 == 1 for every w, so every summand equals one
    fam = make_family("sign-neuron", 2)
    h = Hypothesis.from_arrays(fam, [[0.6, -0.8]], [1.0])
    for seed in range(5):
        assert est_scalar_prod(h, [0.6, -0.8], 7, make_rng(seed)).value == 1.0


def test_index_sampler_probabilities():
    sampler = IndexSampler(np.array([3.0, 0.0, 1.0]))
    np.testing.assert_allclose(sampler.probabilities(), [0.75, 0.0, 0.25], rtol=0, atol=1e-15)
    idx = sampler.draw_many(make_rng(1).random(100_000))
    counts = np.bincount(idx, minlength=3)
    assert counts[1] == 0
    # binomial sd at n=1e5, p=0.75 is ~137
    assert abs(counts[0] - 75_000) < 4 * 137
    assert sampler.draw(0.0) == 0 and sampler.draw(0.99999999) == 2


def test_index_sampler_never_returns_trailing_zero_atom():
    sampler = IndexSampler(np.array([1.0, 2.0, 0.0]))
    assert sampler.draw(1.0) == 1


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 500), seed=st.integers(0, 2**32 - 1))
def test_counter_law_is_exact(m, seed):
    counter = EvalCounter()
    est_scalar_prod(FIVE, X0, m, make_rng(seed), counter)
    assert counter.weight_samples == m
    assert counter.feature_evals == 2 * m


@settings(max_examples=40, deadline=None)
@given(
    alpha=st.lists(st.floats(-3, 3, allow_nan=False).filter(lambda a: a != 0), min_size=1, max_size=6),
    m=st.integers(1, 200),
    seed=st.integers(0, 2**32 - 1),
)
def test_estimate_bounded_by_l1(alpha, m, seed):
    fam = make_family("cosine-rff", 2)
    support = make_rng(seed).uniform(-1, 1, (len(alpha), 2))
    h = Hypothesis.from_arrays(fam, support, alpha)
    est = est_scalar_prod(h, X0, m, make_rng(seed, 1))
    assert abs(est.value) <= h.l1() * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(1e-6, 1e6), seed=st.integers(0, 2**32 - 1))
def test_scale_invariance_seed_matched(c, seed):
    scaled = Hypothesis(FIVE.family, FIVE.support, Coefficients(FIVE.coeffs.raw, scale=c))
    a = est_scalar_prod(FIVE, X0, 64, make_rng(seed)).value
    b = est_scalar_prod(scaled, X0, 64, make_rng(seed)).value
    assert b == pytest.approx(c * a, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("k", [-3, 0, 5])
def test_power_of_two_rescaling_is_bitwise(five_support, k):
    c = 2.0**k
    scaled = Hypothesis.from_arrays(five_support.family, five_support.support, c * five_support.alpha)
    a = est_scalar_prod(five_support, X0, 64, make_rng(9)).value
    b = est_scalar_prod(scaled, X0, 64, make_rng(9)).value
    assert b == c * a


def test_same_seed_same_estimate(five_support):
    a = est_scalar_prod(five_support, X0, 100, make_rng(3))
    b = est_scalar_prod(five_support, X0, 100, make_rng(3))
    assert a == b


def test_sign_neuron_estimator_unbiased():
    fam = make_family("sign-neuron", 3)
    rng = make_rng(17)
    h = Hypothesis.from_arrays(fam, rng.standard_normal((4, 3)), [0.5, -1.0, 0.3, 0.2])
    x = rng.standard_normal(3)
    vals = np.array([est_scalar_prod(h, x, 20, rng).value for _ in range(2000)])
    se = vals.std() / math.sqrt(vals.size)
    assert abs(vals.mean() - h.exact_value(x)) <= 4 * se


def test_shared_estimate_matches_single_query_draws(five_support):
    single = est_scalar_prod(five_support, X0, 300, make_rng(4)).value
    shared = est_scalar_prod_shared(five_support, X0[None, :], 300, make_rng(4))
    assert shared.shape == (1,)
    assert shared[0] == pytest.approx(single, rel=1e-12, abs=1e-14)


def test_shared_estimates_are_accurate_for_many_queries(five_support):
    X = make_rng(2).uniform(-1, 1, (50, 2))
    counter = EvalCounter()
    est = est_scalar_prod_shared(five_support, X, 200_000, make_rng(5), counter, chunk=1 << 20)
    assert counter.weight_samples == 200_000
    assert np.max(np.abs(est - five_support.exact_values(X))) < 0.03


def test_chunked_reproducible_and_worker_independent(five_support):
    kwargs = dict(m=1001, seed=8, call_id=3, n_chunks=4)
    c1, c2 = EvalCounter(), EvalCounter()
    a = est_scalar_prod_chunked(five_support, X0, workers=1, counter=c1, **kwargs)
    b = est_scalar_prod_chunked(five_support, X0, workers=3, counter=c2, **kwargs)
    assert a == b
    assert c1.weight_samples == c2.weight_samples == 1001
    assert c1.feature_evals == 2002
    other = est_scalar_prod_chunked(five_support, X0, m=1001, seed=8, call_id=4, n_chunks=4)
    assert other.value != a.value


def test_chunked_more_chunks_than_samples(five_support):
    est = est_scalar_prod_chunked(five_support, X0, m=3, seed=0, call_id=0, n_chunks=8)
    assert abs(est.value) <= five_support.l1()


def test_chunked_is_unbiased(five_support):
    vals = np.array(
        [est_scalar_prod_chunked(five_support, X0, 50, 1, i, 5).value for i in range(2000)]
    )
    se = vals.std() / math.sqrt(vals.size)
    assert abs(vals.mean() - five_support.exact_value(X0)) <= 4 * se


def test_tail_bound_values():
    assert tail_bound(1.0, 8, 1.0) == pytest.approx(2 * math.exp(-4), rel=1e-15)
    assert tail_bound(1.0, 8, 1.0) == pytest.approx(0.036631277777468, rel=1e-12)
    # the looser-constant form is the smaller of the two
    assert stated_tail_bound(1.0, 8, 1.0) == pytest.approx(math.exp(-8))
    assert tail_bound(2.0, 1, 0.01) > 1.0
    for bad in [(0.0, 8, 1.0), (1.0, 0, 1.0), (1.0, 8, 0.0)]:
        with pytest.raises(ValueError):
            tail_bound(*bad)


def test_required_test_samples():
    # ceil(2 * 100 * ln 40) = ceil(737.77...)
    assert required_test_samples(1.0, 0.1, 0.05) == 738
    assert required_test_samples(0.0, 0.1, 0.05) == 1
    m = required_test_samples(3.0, 0.2, 0.01)
    assert tail_bound(3.0, m, 0.2) <= 0.01 < tail_bound(3.0, m - 1, 0.2)
    with pytest.raises(ValueError):
        required_test_samples(1.0, 0.1, 1.5)
    with pytest.raises(ValueError):
        required_test_samples(-1.0, 0.1, 0.05)


def test_coefficients_lazy_shrink_is_exact():
    c = Coefficients([0.8, -0.4])
    c.shrink(0.25)
    assert c.effective.tolist() == [0.2, -0.1]
    c.append(0.3)
    assert c.effective[2] == 0.3
    assert c.l1() == pytest.approx(0.6, rel=1e-15)


def test_coefficients_fold_tiny_scale():
    c = Coefficients([1.0, -3.0])
    for _ in range(200):
        c.shrink(0.25)
    assert c.scale >= 2.0**-256
    np.testing.assert_array_equal(c.effective, np.array([1.0, -3.0]) * 2.0**-400)
    c.append(1e-100)
    assert np.isfinite(c.raw).all()
    assert c.effective[2] == pytest.approx(1e-100, rel=1e-15)


def test_coefficients_grow_past_buffer():
    c = Coefficients()
    for i in range(100):
        c.append(float(i))
    assert len(c) == 100 and c.effective[-1] == 99.0
    assert c.l1() == sum(range(100))


def test_hypothesis_exact_values_and_norm(five_support):
    x = np.array([0.1, 0.4])
    direct = sum(
        a * 0.5 * math.exp(-np.sum((s - x) ** 2) / 2)
        for a, s in zip(five_support.alpha, five_support.support)
    )
    assert five_support.exact_value(x) == pytest.approx(direct, rel=1e-13)
    K = five_support.family.kernel_matrix(five_support.support, five_support.support)
    a = five_support.alpha
    assert five_support.rkhs_norm() == pytest.approx(math.sqrt(a @ K @ a), rel=1e-14)
    assert Hypothesis(five_support.family).rkhs_norm() == 0.0
    with pytest.raises(ValueError):
        Hypothesis.from_arrays(five_support.family, np.zeros((2, 2)), [1.0])


def test_hypothesis_copy_is_independent(five_support):
    clone = five_support.copy()
    clone.append([0.0, 0.0], 1.0)
    clone.shrink(0.5)
    assert len(five_support) == 5
    assert five_support.coeffs.scale == 1.0
