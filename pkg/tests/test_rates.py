import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from vrhb import rates
from vrhb.data import fixture_a, synthetic_spectrum
from vrhb.errors import CapacityError, RegimeError
from vrhb.matrix import DataMatrix, normalize
from vrhb.solvers import Momentum, SolverConfig, vr_hb_power_run


def exact_p(t, alpha, beta):
    """Rational-arithmetic recurrence, used as the oracle."""
    a, b = Fraction(alpha), Fraction(beta)
    x = [Fraction(1), a / 4, (a / 2 - b) ** 2]
    if t < 3:
        return x[t]
    for _ in range(3, t + 1):
        x = [x[1], x[2], (a - b) * x[2] - b * (a - b) * x[1] + b**3 * x[0]]
    return x[2]


def test_p_initial_conditions():
    assert rates.p_poly(0, 3.0, 0.7) == 1
    assert rates.p_poly(1, 4.0, 1.0) == 1
    assert rates.p_poly(2, 2.0, 1.0) == 0
    assert rates.p_poly(3, 2.0, 1.0) == 0.5
    with pytest.raises(ValueError):
        rates.p_poly(-1, 1.0, 1.0)
    with pytest.raises(ValueError):
        rates.q_poly(-2, 1.0, 1.0)


def test_critical_beta_one():
    for t in range(21):
        assert rates.p_poly(t, 4.0, 1.0) == 1.0
        assert rates.q_poly(t, 4.0, 1.0) == (t + 1) ** 2


@pytest.mark.parametrize("beta", [0.25, 0.81, 1.0])
def test_critical_regime_identities(beta):
    for t in range(41):
        assert rates.p_poly(t, 4 * beta, beta) == pytest.approx(beta**t, rel=1e-12)
        assert rates.q_poly(t, 4 * beta, beta) == pytest.approx((t + 1) ** 2 * beta**t, rel=1e-12)


def test_p_beta_zero():
    # with beta = 0 the scalar recursion is x_t = 2c x_{t-1}, x_1 = c x_0, so
    # x_t^2 = 4^{t-1} c^{2t} = alpha^t / 4 for t >= 1
    for alpha in (0.5, 2.0, 5.0):
        for t in range(1, 25):
            assert rates.p_poly(t, alpha, 0.0) == pytest.approx(alpha**t / 4, rel=1e-13)
            assert rates.p_closed_form(t, alpha, 0.0) == pytest.approx(alpha**t / 4, rel=1e-13)


def test_closed_forms_fixed_example():
    assert rates.p_closed_form(0, 5, 1) == 1 and rates.q_closed_form(0, 5, 1) == 1
    for t in range(31):
        assert rates.p_closed_form(t, 5.0, 1.0) == pytest.approx(rates.p_poly(t, 5.0, 1.0), rel=1e-9)
        assert rates.q_closed_form(t, 5.0, 1.0) == pytest.approx(rates.q_poly(t, 5.0, 1.0), rel=1e-9)


def test_regime_errors():
    with pytest.raises(RegimeError):
        rates.p_closed_form(3, 4.0, 1.0)
    with pytest.raises(RegimeError):
        rates.q_closed_form(3, 1.0, 1.0)
    with pytest.raises(RegimeError):
        rates.p_oscillatory(3, 5.0, 1.0)


@given(st.floats(0.0, 2.0), st.floats(0.01, 6.0), st.integers(0, 40))
def test_recurrence_matches_rational_oracle(beta, alpha, t):
    want = float(exact_p(t, alpha, beta))
    got = rates.p_poly(t, alpha, beta)
    assert got == pytest.approx(want, rel=1e-9, abs=1e-12 * max(beta, alpha / 4, 1e-3) ** t)


@given(st.floats(0.0, 1.0), st.floats(0.05, 4.0), st.integers(0, 40))
def test_real_regime_closed_form(beta, excess, t):
    alpha = 4 * beta + excess
    assert rates.p_closed_form(t, alpha, beta) == pytest.approx(rates.p_poly(t, alpha, beta), rel=1e-9)
    assert rates.q_closed_form(t, alpha, beta) == pytest.approx(rates.q_poly(t, alpha, beta), rel=1e-9)


@given(st.floats(0.05, 1.0), st.floats(0.0, 0.99), st.integers(0, 40))
def test_oscillatory_regime(beta, frac, t):
    alpha = 4 * beta * frac
    env = beta**t
    p, q = rates.p_poly(t, alpha, beta), rates.q_poly(t, alpha, beta)
    assert abs(p - rates.p_oscillatory(t, alpha, beta)) <= 1e-9 * env
    assert abs(q - rates.q_oscillatory(t, alpha, beta)) <= 1e-9 * env
    assert p <= rates.p_poly(t, 4 * beta, beta) * (1 + 1e-12)
    assert q <= rates.q_poly(t, 4 * beta, beta) * (1 + 1e-12)


def test_p_any_dispatches():
    assert rates.p_any(5, 4.0, 1.0) == 1.0
    assert rates.p_any(5, 5.0, 1.0) == pytest.approx(rates.p_poly(5, 5.0, 1.0), rel=1e-12)
    assert rates.p_any(5, 2.0, 1.0) == pytest.approx(rates.p_poly(5, 2.0, 1.0), rel=1e-9, abs=1e-15)


def test_r_poly():
    assert rates.r_poly(0, 3.0, 2.0) == 1
    assert rates.r_poly(1, 3.0, 2.0) == 3.0
    assert rates.r_poly(2, 3.0, 2.0) == 3.0**2 + 2.0
    assert [rates.r_poly(t, 1.0, 1.0) for t in range(6)] == [1, 1, 2, 3, 5, 8]
    with pytest.raises(ValueError):
        rates.r_poly(-1, 1.0, 1.0)


def test_g_examples():
    assert rates.g_of_eta(0.0, 1.0, 0.5, 7) == 1.0
    assert rates.gamma_of_eta(1.0, 1.0, 0.5) == 16.0
    assert rates.g_of_eta(1.0, 1.0, 0.5, 1) == pytest.approx(0.25, rel=1e-15)
    with pytest.raises(ValueError):
        rates.g_of_eta(0.5, 0.5, 1.0, 3)
    with pytest.raises(ValueError):
        rates.g_of_eta(1.5, 1.0, 0.5, 3)


@given(st.floats(0.01, 1.0), st.floats(0.1, 3.0), st.floats(0.0, 0.99), st.integers(1, 15))
def test_g_is_p_ratio(eta, l1, frac, m):
    l2 = l1 * frac
    assume(l1 - l2 > 1e-6)
    beta = rates.beta_of_eta(eta, l2)
    want = rates.p_poly(m, rates.alpha_of_eta(eta, l2), beta) / rates.p_poly(m, rates.alpha_of_eta(eta, l1), beta)
    assert rates.g_of_eta(eta, l1, l2, m) == pytest.approx(want, rel=1e-9)


@given(st.floats(0.0, 1.0), st.floats(0.1, 3.0), st.floats(0.0, 0.99))
def test_rate_params_invariants(eta, l1, frac):
    p = rates.RateParams(eta, l1, l1 * frac, 5)
    assert p.alpha1 >= 0 and p.alpha2 >= 0
    assert p.alpha2 == pytest.approx(4 * p.beta, rel=1e-15)
    if eta > 1e-9:
        assert p.alpha1 > p.alpha2


@given(st.floats(0.1, 3.0), st.floats(0.0, 0.99), st.integers(1, 30))
def test_g_monotone_and_bounded(l1, frac, m):
    l2 = l1 * frac
    grid = np.round(np.arange(1, 101) / 100, 2)
    vals = np.array([rates.g_of_eta(e, l1, l2, m) for e in grid])
    positive = vals[vals > 0]
    assert np.all(np.diff(positive) < 0)
    assert np.all(vals >= vals[-1])


def test_predicted_gap_examples():
    c = np.array([0.6, 0.8])
    assert rates.predicted_full_batch_gap(0.5, [2.0, 0.5], c, 0) == pytest.approx((1 - 0.36) / 0.36)
    assert rates.predicted_full_batch_gap(0.5, [2.0, 0.5, 0.1], [1.0, 0.0, 0.0], 9) == 0.0


def test_predicted_gap_matches_solver():
    data, ref = fixture_a()
    w0 = np.ones(2) / np.sqrt(2)
    cfg = SolverConfig(eta=0.5, momentum=Momentum.oracle(), batch_size=2, epoch_len=5, epochs=1)
    w = vr_hb_power_run(data, w0, cfg, ref).final
    measured = w[1] ** 2 / w[0] ** 2
    assert measured == pytest.approx(rates.predicted_full_batch_gap(0.5, [2.0, 0.5], ref.vectors.T @ w0, 5), rel=1e-9)


def test_estimate_K_fixture():
    data, _ = fixture_a()
    assert rates.estimate_K(data, 1).K == pytest.approx(4.0, rel=1e-12)
    assert rates.estimate_K(data, 2).K == 0.0
    mc = rates.estimate_K(data, 1, "monte-carlo", samples=10_000, rng=np.random.default_rng(0))
    assert abs(mc.K - 4.0) <= 1e-9
    with pytest.raises(ValueError):
        rates.estimate_K(data, 3)
    with pytest.raises(ValueError):
        rates.estimate_K(data, 1, method="guess")


def test_estimate_K_capacity():
    data = DataMatrix(np.random.default_rng(0).standard_normal((40, 3)))
    with pytest.raises(CapacityError):
        rates.estimate_K(data, 20)


def test_commutator_examples():
    cov = np.diag([2.0, 0.5])
    assert rates.commutator_identity_check(cov, np.array([1.0, 0.0])) <= 1e-15
    w = np.ones(2) / np.sqrt(2)
    cw = cov @ w
    assert cw @ cw - (w @ cw) ** 2 == pytest.approx(0.5625)
    assert rates.commutator_identity_check(cov, w) <= 1e-12


def test_quadratic_and_trace_examples():
    cov = np.diag([2.0, 0.5])
    assert rates.quadratic_form_bound_check(cov, np.array([1.0, 0.0])) == pytest.approx(0.0, abs=1e-15)
    assert rates.quadratic_form_bound_check(cov, np.array([0.0, 1.0])) == pytest.approx(8.0)
    p = np.eye(3) - np.outer([1, 0, 0], [1, 0, 0])
    w = np.array([0.3, 0.4, 0.5])
    assert rates.trace_bound_check(np.eye(3), p, w) == 0.0
    assert rates.trace_bound_check(np.zeros((3, 3)), p, w) == 0.0


@given(st.integers(0, 2**32 - 1))
def test_bound_inequalities_random(seed):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((8, 8))
    cov = b @ b.T / 8
    w = normalize(rng.standard_normal(8))
    assert rates.commutator_identity_check(cov, w) <= 1e-9
    assert rates.quadratic_form_bound_check(cov, w) >= -1e-12
    data = DataMatrix(rng.standard_normal((10, 8)))
    batch = rng.choice(10, size=3, replace=False)
    m_u, m_p, proj = rates.variance_matrices(data, batch, rng.standard_normal(8), w)
    x = rng.standard_normal(8)
    assert rates.trace_bound_check(m_u, proj, x) >= -1e-12
    assert rates.trace_bound_check(m_p, proj, x) >= -1e-12


def test_K_monte_carlo_close_to_exact():
    data, _ = synthetic_spectrum((1.0, 0.5, 0.2), 6, seed=1)
    exact = rates.estimate_K(data, 2).K
    mc = rates.estimate_K(data, 2, "monte-carlo", samples=20_000, rng=np.random.default_rng(1)).K
    assert mc == pytest.approx(exact, rel=0.05)
    assert math.isfinite(exact) and exact > 0
