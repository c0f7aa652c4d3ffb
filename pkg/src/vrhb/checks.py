"""Randomized numerical checks of the rate identities and bounds.

Each suite returns a list of ``CheckResult``; the ``check`` CLI subcommand
and the acceptance tests both run them.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import rates
from .matrix import DataMatrix


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: worst={self.worst:.3e} (tol {self.tolerance:g})"


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _envelope_rel(a, b, envelope):
    # Oscillatory values pass through zero; measure against their beta^t envelope.
    return abs(a - b) / max(abs(b), envelope, 1e-300)


def polynomial_regime_suite(seed=0, draws=200, tmax=40, rtol=1e-9):
    rng = np.random.default_rng(seed)
    out = []

    worst = 0.0
    for _ in range(draws):
        beta = rng.uniform(0.0, 1.0)
        alpha = 4 * beta + rng.uniform(0.05, 4.0)
        t = int(rng.integers(0, tmax + 1))
        worst = max(
            worst,
            _rel(rates.p_poly(t, alpha, beta), rates.p_closed_form(t, alpha, beta)),
            _rel(rates.q_poly(t, alpha, beta), rates.q_closed_form(t, alpha, beta)),
        )
    out.append(CheckResult("real roots: recurrence = closed form", worst <= rtol, worst, rtol))

    worst = 0.0
    betas = list(rng.uniform(0.01, 1.0, size=draws - 3)) + [0.25, 0.81, 1.0]
    for beta in betas:
        for t in range(tmax + 1):
            worst = max(
                worst,
                _rel(rates.p_poly(t, 4 * beta, beta), beta**t),
                _rel(rates.q_poly(t, 4 * beta, beta), (t + 1) ** 2 * beta**t),
            )
    exact_tol = 1e-12
    out.append(CheckResult("repeated root: p = beta^t, q = (t+1)^2 beta^t", worst <= exact_tol, worst, exact_tol))

    worst, excess = 0.0, -math.inf
    for _ in range(draws):
        beta = rng.uniform(0.05, 1.0)
        alpha = 4 * beta * rng.uniform(0.0, 0.99)
        t = int(rng.integers(0, tmax + 1))
        env = beta**t
        p, q = rates.p_poly(t, alpha, beta), rates.q_poly(t, alpha, beta)
        worst = max(
            worst,
            _envelope_rel(p, rates.p_oscillatory(t, alpha, beta), env),
            _envelope_rel(q, rates.q_oscillatory(t, alpha, beta), env),
        )
        excess = max(excess, (p - env) / env, (q - (t + 1) ** 2 * env) / ((t + 1) ** 2 * env))
    out.append(CheckResult("complex roots: recurrence = trigonometric form", worst <= rtol, worst, rtol))
    out.append(
        CheckResult("complex roots: p_t <= p_t(4b,b), q_t <= q_t(4b,b)", excess <= 1e-12, excess, 1e-12)
    )
    return out


def _random_psd(rng, d):
    b = rng.standard_normal((d, d))
    return b @ b.T / d


def _random_unit(rng, d):
    w = rng.standard_normal(d)
    return w / np.linalg.norm(w)


def identity_suite(seed=0, draws=100, d=8):
    rng = np.random.default_rng(seed)
    quad = trace_m = math.inf
    comm = 0.0
    for _ in range(draws):
        cov = _random_psd(rng, d)
        w = _random_unit(rng, d)
        comm = max(comm, rates.commutator_identity_check(cov, w))
        quad = min(quad, rates.quadratic_form_bound_check(cov, w))

        # M_u and M_P built from one sampled mini-batch covariance deviation
        n = 12
        rows = rng.standard_normal((n, d))
        data = DataMatrix(rows)
        batch = rng.choice(n, size=int(rng.integers(1, n)), replace=False)
        anchor = rng.standard_normal(d)
        u = _random_unit(rng, d)
        m_u, m_p, proj = rates.variance_matrices(data, batch, anchor, u)
        x = rng.standard_normal(d)
        trace_m = min(
            trace_m,
            rates.trace_bound_check(m_u, proj, x),
            rates.trace_bound_check(m_p, proj, x),
            rates.trace_bound_check(_random_psd(rng, d), proj, x),
        )
    return [
        CheckResult("||PC - CP||^2 = w'C^2w - (w'Cw)^2", comm <= 1e-9, comm, 1e-9),
        CheckResult("quadratic-form bound margin >= 0", quad >= -1e-12, quad, -1e-12),
        CheckResult("trace bound margin >= 0", trace_m >= -1e-12, trace_m, -1e-12),
    ]


def g_calculus_suite(seed=0, draws=50, h=1e-5):
    rng = np.random.default_rng(seed)
    g0 = max(abs(rates.g_of_eta(0.0, l1, l2, m) - 1.0) for l1, l2, m in [(1, 0.5, 1), (2, 0.1, 20), (1, 0.95, 100)])
    slope_err = 0.0
    worst_step = -math.inf
    lower = math.inf
    grid = np.round(np.arange(1, 101) / 100, 2)
    for _ in range(draws):
        l1 = rng.uniform(0.2, 2.0)
        l2 = l1 * rng.uniform(0.0, 0.99)
        m = int(rng.integers(1, 21))
        fd = (rates.g_of_eta(h, l1, l2, m) - rates.g_of_eta(0.0, l1, l2, m)) / h
        exact = -2 * m * m * (l1 - l2)
        slope_err = max(slope_err, abs(fd - exact) / abs(exact))
        vals = np.array([rates.g_of_eta(e, l1, l2, m) for e in grid])
        worst_step = max(worst_step, float(np.max(np.diff(vals))))
        lower = min(lower, float(np.min(vals - vals[-1])))
    return [
        CheckResult("g(0) = 1", g0 == 0.0, g0, 0.0),
        CheckResult("g'(0) = -2 m^2 (l1 - l2) by finite difference", slope_err <= 0.02, slope_err, 0.02),
        CheckResult("g strictly decreasing on eta grid", worst_step < 0, worst_step, 0.0),
        CheckResult("g(eta) >= g(1)", lower >= 0, lower, 0.0),
    ]


SUITES = {
    "polynomials": polynomial_regime_suite,
    "identities": identity_suite,
    "g-calculus": g_calculus_suite,
}


def run_all(seed=0):
    results = []
    for suite in SUITES.values():
        results.extend(suite(seed=seed))
    return results
