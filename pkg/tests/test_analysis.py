import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from doboc import fixtures
from doboc.algorithms import AlgoConfig
from doboc.analysis import (
    DENSE_LIMIT,
    TraceTooShort,
    auto_eta,
    closed_form_ghat,
    compute_bounds,
    contraction_factor,
    estimate_rates,
    linear_rate_constant,
    newton_step,
    thm2_eta_max,
    verify_lemma4_bound,
)
from doboc.graph import build_metropolis_weights
from doboc.objectives import PenaltyProblem, QuadraticObjective, penalty_gradient
from doboc.simulator import compute_reference, distributed_directions, run


def test_fixture_a_bounds(fix_a):
    rep = compute_bounds(fix_a, eta=0.5)
    assert (rep.m, rep.M, rep.w_min, rep.a) == (1.0, 1.0, 0.5, 2.0)
    assert rep.eta_thm1_max == 1.0
    assert rep.c == pytest.approx(0.5, abs=1e-15)
    assert rep.preconditions["c_lt_1"] and rep.preconditions["thm1_eta_lt_2_over_a"]


def test_single_agent_a_equals_M():
    prob = PenaltyProblem(build_metropolis_weights(1, []), [QuadraticObjective([[1.0]], [0.0])], 7.0)
    assert compute_bounds(prob).a == 1.0


def test_quadratic_epsilon_has_no_cubic_term(ring):
    eta, K = 1e-3, 2
    rep = compute_bounds(ring, eta=eta, K=K)
    m, a = rep.m, rep.a
    assert rep.L == 0.0
    assert rep.epsilon == pytest.approx((2 * m * m * eta - m * a * a * eta * eta * K * K) / a, rel=1e-14)


def test_dgd_equivalence_flag(fix_a):
    assert compute_bounds(fix_a, eta=1.0, K=1).preconditions["dgd_equivalent"]
    assert not compute_bounds(fix_a, eta=0.5, K=1).preconditions["dgd_equivalent"]


def test_epsilon_reported_raw_when_step_too_large(ring):
    rep = compute_bounds(ring, eta=1.0 / ring.a, K=5)
    assert rep.epsilon < 0
    assert not rep.preconditions["epsilon_in_0_1"]
    assert not rep.preconditions["thm2_step_bound"]


def test_thm2_bound_with_cubic_term():
    m, a, L, K, gap = 1.0, 3.0, 0.5, 2, 4.0
    cubic = math.sqrt(6 * m**5 / (a**4 * (2 * a) ** 1.5 * K**3 * L * math.sqrt(gap)))
    assert thm2_eta_max(m, a, L, K, gap) == min(1.0, 1 / a, 2 * m / (a * a * K * K), m / (a * a * K * K), cubic)
    assert thm2_eta_max(m, a, 0.0, K, gap) == m / (a * a * K * K)


@given(st.floats(1e-6, 1.0), st.integers(1, 6))
def test_epsilon_positive_below_thm2_bound(frac, K):
    prob = fixtures.star_logistic()
    rep = compute_bounds(prob, K=K)
    eta = frac * rep.eta_thm2_max * 0.999
    eps = linear_rate_constant(rep.m, rep.a, rep.L, eta, K, rep.gap0)
    assert 0 < eps < 1


def test_auto_eta(fix_a, ring):
    assert auto_eta(fix_a, "auto-thm1") == 0.5
    assert auto_eta(ring, "auto-thm2", 2) == pytest.approx(0.99 * compute_bounds(ring, K=2).eta_thm2_max, rel=1e-15)
    with pytest.raises(ValueError):
        auto_eta(ring, "auto-thm2")
    with pytest.raises(ValueError):
        auto_eta(ring, "fastest")


@given(st.floats(0.01, 1.99))
def test_contraction_factor_below_one_inside_step_range(frac):
    prob = fixtures.ring_quadratic()
    assert contraction_factor(prob, frac / prob.a) < 1.0


def test_closed_form_examples(fix_a, ring, rng):
    np.testing.assert_allclose(closed_form_ghat(fix_a, [[1.0], [0.0]], 0.5, 1), [[0.375], [0.375]], atol=1e-15)
    x = rng.standard_normal((5, 3))
    np.testing.assert_allclose(closed_form_ghat(ring, x, 0.1, 0), 0.1 * penalty_gradient(ring, x), atol=1e-14)
    xs = np.array([[0.5], [-0.5]])
    for k in range(5):
        np.testing.assert_array_equal(closed_form_ghat(fix_a, xs, 0.5, k), np.zeros((2, 1)))


def test_closed_form_dimension_guard():
    n = 2
    p = DENSE_LIMIT // n + 1
    prob = PenaltyProblem(build_metropolis_weights(n, [(0, 1)]),
                          [QuadraticObjective(np.eye(p), np.zeros(p)) for _ in range(n)], 1.0)
    with pytest.raises(ValueError, match="desk-scale"):
        closed_form_ghat(prob, np.zeros((n, p)), 0.1, 1)


@given(st.integers(0, 2**32 - 1), st.sampled_from([0.1, 1.0, 1.9]), st.integers(0, 10))
def test_distributed_directions_match_closed_form(seed, frac, k):
    prob = fixtures.star_logistic()
    x = np.random.default_rng(seed).standard_normal((prob.n, prob.p))
    eta = frac / prob.a
    hist = distributed_directions(prob, x, eta, k)
    assert np.max(np.abs(hist[k] - closed_form_ghat(prob, x, eta, k))) <= 1e-10


def test_closed_form_envelope_toward_newton():
    prob = fixtures.single_agent_quadratic()
    x = np.array([[1.0, -2.0, 0.5]])
    eta = 1.0 / prob.M
    N = newton_step(prob, x)
    for k in range(0, 60, 5):
        dev = np.linalg.norm(closed_form_ghat(prob, x, eta, k) - N)
        assert dev <= (1 - eta * prob.m) ** (k + 1) * np.linalg.norm(N) * (1 + 1e-9)


def test_rates_reject_short_trace(fix_a):
    trace = run(fix_a, "doboc", AlgoConfig(eta=0.5, lam=1.0))
    with pytest.raises(TraceTooShort):
        estimate_rates(trace)
    start = run(fix_a, "doboc", AlgoConfig(eta=0.5, lam=1.0), np.array([[0.5], [-0.5]]))
    with pytest.raises(TraceTooShort):
        estimate_rates(start)


def test_dgd_ratios_constant_on_quadratic():
    # diagonal single-agent quadratic with x0 on one eigenvector: exact constant ratio
    prob = PenaltyProblem(build_metropolis_weights(1, []), [QuadraticObjective(np.diag([1.0, 4.0]), [0.0, 0.0])], 0.1)
    trace = run(prob, "dgd", AlgoConfig(eta=0.1, lam=0.1, max_iter=40, tol=0.0), np.array([[1.0, 0.0]]))
    rep = estimate_rates(trace)
    np.testing.assert_allclose(rep.ratios, 0.9, rtol=1e-12)
    assert not rep.superlinear


def test_doboc_ratios_superlinear_and_enveloped(ring):
    eta = 1.0 / ring.a
    c = compute_bounds(ring, eta=eta).c
    trace = run(ring, "doboc", AlgoConfig(eta=eta, lam=1.0, max_iter=60, tol=1e-13))
    rep = estimate_rates(trace, c=c)
    assert rep.superlinear and rep.thm1_ok
    assert rep.linear_rate is not None and rep.linear_rate < 1


def test_lemma4_quadratic_and_logistic(ring, star):
    assert verify_lemma4_bound(ring, pairs=20).ok
    rep = verify_lemma4_bound(star, pairs=100, seed=0)
    assert rep.ok and rep.pairs == 100
    assert verify_lemma4_bound(star, pairs=5, scale=0.0).max_violation == pytest.approx(0.0, abs=1e-12)


def test_newton_limit_while_resolvable():
    from doboc.verify import check_newton_limit, newton_deviations

    assert check_newton_limit().passed
    dev, nN, factor = newton_deviations()
    # rounding floor: deviations at the end are ~1e-9 of ||N||, far above eps
    assert dev[-1] / nN <= 1e-8
    assert dev[-1] / nN > 1e3 * np.finfo(float).eps


def test_per_agent_penalty_gap_shrinks_with_lambda():
    # on Fixture A each agent sits at +-lam/(1+lam) from y* = 0
    gaps = []
    for lam in (1.0, 0.1, 0.01):
        prob = fixtures.fixture_a(lam)
        ref = compute_reference(prob)
        gaps.append(float(np.max(np.abs(ref.x_star[:, 0] - ref.y_star[0]))))
        assert gaps[-1] == pytest.approx(lam / (1 + lam), rel=1e-12)
    assert gaps[0] > gaps[1] > gaps[2]
