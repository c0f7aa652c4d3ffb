"""Convergence-rate machinery for the heavy-ball recursion.

Squaring the scalar recursion x_{t+1} = 2c x_t - beta x_{t-1} with
x_1 = c x_0 gives x_t^2 = p_t(4c^2, beta) x_0^2, where p_t obeys a
three-term cubic recurrence.  This module evaluates p_t, q_t and r_t by
recurrence and in closed form (real-root, repeated-root and oscillatory
regimes), the single-epoch rate g(eta), the variance scale K of the
mini-batch covariance, and numeric checks of the supporting inequalities.
"""
import math
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np

from .errors import CapacityError, NumericError, RegimeError

MAX_ENUMERATION = 100_000


@dataclass(frozen=True)
class RateParams:
    eta: float
    lambda1: float
    lambda2: float
    m: int

    def __post_init__(self):
        if not 0 <= self.eta <= 1:
            raise ValueError("eta must lie in [0, 1]")
        if not self.lambda1 > self.lambda2 >= 0:
            raise ValueError("need lambda1 > lambda2 >= 0")
        if self.m < 1:
            raise ValueError("m must be >= 1")

    @property
    def alpha1(self):
        return alpha_of_eta(self.eta, self.lambda1)

    @property
    def alpha2(self):
        return alpha_of_eta(self.eta, self.lambda2)

    @property
    def beta(self):
        return beta_of_eta(self.eta, self.lambda2)

    @property
    def gamma(self):
        return gamma_of_eta(self.eta, self.lambda1, self.lambda2)

    @property
    def g(self):
        return g_of_eta(self.eta, self.lambda1, self.lambda2, self.m)


@dataclass(frozen=True)
class VarianceEstimate:
    K: float
    method: str
    samples: int


def alpha_of_eta(eta, lam):
    return 4.0 * (1.0 - eta + eta * lam) ** 2


def beta_of_eta(eta, lambda2):
    return (1.0 - eta + eta * lambda2) ** 2


def _check_t(t):
    if t < 0 or int(t) != t:
        raise ValueError(f"t must be a non-negative integer, got {t}")
    return int(t)


def _cubic_recurrence(t, alpha, beta, x0, x1, x2):
    """x_t = (a-b) x_{t-1} - b(a-b) x_{t-2} + b^3 x_{t-3}, iteratively.

    The sequence is carried as x_t / s^t with s = max(beta, alpha/4), the
    size of the dominant characteristic root up to a factor 4, which keeps
    the intermediate values O(1) (exactly so in the critical regime).
    """
    t = _check_t(t)
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be non-negative")
    if t < 3:
        return (x0, x1, x2)[t]
    s = max(beta, alpha / 4.0)
    if s == 0:
        return 0.0
    a, b = alpha / s, beta / s
    c1, c2, c3 = a - b, b * (a - b), b**3
    y = [x0, x1 / s, x2 / s**2]
    for _ in range(3, t + 1):
        y = [y[1], y[2], c1 * y[2] - c2 * y[1] + c3 * y[0]]
    return y[2] * s**t


def p_poly(t, alpha, beta):
    return _cubic_recurrence(t, alpha, beta, 1.0, alpha / 4.0, (alpha / 2.0 - beta) ** 2)


def q_poly(t, alpha, beta):
    return _cubic_recurrence(t, alpha, beta, 1.0, alpha, (alpha - beta) ** 2)


def r_poly(t, alpha, beta):
    """r_t = alpha r_{t-1} + beta r_{t-2}, r_0 = 1, r_1 = alpha."""
    t = _check_t(t)
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be non-negative")
    prev, cur = 1.0, alpha
    if t == 0:
        return prev
    for _ in range(t - 1):
        prev, cur = cur, alpha * cur + beta * prev
    return cur


def _real_roots(alpha, beta):
    if not alpha > 4.0 * beta >= 0:
        raise RegimeError(f"closed form needs alpha > 4 beta >= 0, got alpha={alpha}, beta={beta}")
    s, d = math.sqrt(alpha), math.sqrt(alpha - 4.0 * beta)
    return 0.5 * (s + d), 0.5 * (s - d)


def p_closed_form(t, alpha, beta):
    """[ (r+^t + r-^t) / 2 ]^2 with r+- = (sqrt(a) +- sqrt(a - 4b)) / 2.

    Evaluated as exp(2t log r+) (1 + (r-/r+)^t)^2 / 4 so that large t only
    overflows when the value itself does.
    """
    t = _check_t(t)
    hi, lo = _real_roots(alpha, beta)
    if t == 0:
        return 1.0
    ratio = lo / hi
    return math.exp(2 * t * math.log(hi)) * (1.0 + ratio**t) ** 2 / 4.0


def q_closed_form(t, alpha, beta):
    """(r+^{t+1} - r-^{t+1})^2 / (a - 4b).

    Written as [sum_{j=0}^{t} r+^j r-^{t-j}]^2, the same polynomial with the
    (r+ - r-)^2 = a - 4b factor cancelled; this avoids the cancellation that
    the literal difference suffers when alpha is close to 4 beta.
    """
    t = _check_t(t)
    hi, lo = _real_roots(alpha, beta)
    if t == 0:
        return 1.0
    if alpha - 4.0 * beta > 1e-3 * alpha:
        ratio = lo / hi
        return math.exp(2 * (t + 1) * math.log(hi)) * (1.0 - ratio ** (t + 1)) ** 2 / (alpha - 4.0 * beta)
    total = sum(hi**j * lo ** (t - j) for j in range(t + 1))
    return total * total


def p_critical(t, beta):
    """p_t(4 beta, beta) = beta^t."""
    return float(beta) ** _check_t(t)


def q_critical(t, beta):
    """q_t(4 beta, beta) = (t + 1)^2 beta^t."""
    t = _check_t(t)
    return (t + 1) ** 2 * float(beta) ** t


def _angles(alpha, beta):
    if not 0 <= alpha < 4.0 * beta:
        raise RegimeError(f"oscillatory form needs 0 <= alpha < 4 beta, got alpha={alpha}, beta={beta}")
    root = math.sqrt(4.0 * alpha * beta - alpha * alpha)
    theta = math.atan2(root, alpha - 2.0 * beta)
    phi = math.atan2(-root, 2.0 * beta - alpha)
    return theta, phi


def p_oscillatory(t, alpha, beta):
    """p_t = beta^t (1 + cos(t theta)) / 2 with cos theta = (a - 2b) / (2b)."""
    t = _check_t(t)
    theta, _ = _angles(alpha, beta)
    return beta**t * 0.5 * (1.0 + math.cos(t * theta))


def q_oscillatory(t, alpha, beta):
    """q_t = 2b / (4b - a) (1 + cos(phi + t theta)) beta^t with cos phi = 1 - a / (2b)."""
    t = _check_t(t)
    theta, phi = _angles(alpha, beta)
    return 2.0 * beta / (4.0 * beta - alpha) * (1.0 + math.cos(phi + t * theta)) * beta**t


def p_any(t, alpha, beta, rtol=1e-12):
    """Closed-form p_t in whichever regime (alpha, beta) falls."""
    if abs(alpha - 4 * beta) <= rtol * max(alpha, 4 * beta, 1e-300):
        return p_critical(t, beta)
    if alpha > 4 * beta:
        return p_closed_form(t, alpha, beta)
    return p_oscillatory(t, alpha, beta)


def gamma_of_eta(eta, lambda1, lambda2):
    beta = beta_of_eta(eta, lambda2)
    return alpha_of_eta(eta, lambda1) / beta if beta > 0 else math.inf


def g_of_eta(eta, lambda1, lambda2, m):
    """Deterministic single-epoch rate p_m(alpha_2, beta) / p_m(alpha_1, beta)

    = [2^{m+1} / ((sqrt(gamma) + sqrt(gamma-4))^m + (sqrt(gamma) - sqrt(gamma-4))^m)]^2.
    """
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    if not lambda1 > lambda2 >= 0:
        raise ValueError("need lambda1 > lambda2 >= 0")
    if m < 1:
        raise ValueError("m must be >= 1")
    if eta == 0:
        return 1.0
    if beta_of_eta(eta, lambda2) == 0:
        # eta = 1, lambda2 = 0: p_m(0, 0) = 0 for m >= 1
        return 0.0
    gamma = gamma_of_eta(eta, lambda1, lambda2)
    if gamma < 4:
        raise ValueError(f"gamma = {gamma} < 4; inputs inconsistent")
    s, d = math.sqrt(gamma), math.sqrt(gamma - 4.0)
    # 2^{m+1} / (x^m + y^m) with x = s + d, y = s - d, scaled by x^m
    x, y = s + d, s - d
    log_ratio = (m + 1) * math.log(2.0) - m * math.log(x) - math.log1p((y / x) ** m)
    return math.exp(2.0 * log_ratio)


def predicted_full_batch_gap(eta, lambda_spectrum, w0_coeffs, t, beta=None):
    """sum_{k>=2} p_t(alpha_k, beta) c_k^2 / (p_t(alpha_1, beta) c_1^2).

    `w0_coeffs` are the coordinates u_k^T w_0; beta defaults to beta(eta).
    Exact for the full-batch (no variance) iteration.
    """
    lam = np.asarray(lambda_spectrum, dtype=np.float64)
    c = np.asarray(w0_coeffs, dtype=np.float64)
    if lam.shape != c.shape:
        raise ValueError("spectrum and coefficients must have the same length")
    if beta is None:
        beta = beta_of_eta(eta, lam[1])
    p = np.array([p_poly(t, alpha_of_eta(eta, l), beta) for l in lam])
    top = p[0] * c[0] ** 2
    if not p[0] > 0:
        raise NumericError("p_t(alpha_1, beta) is not positive")
    if c[0] == 0:
        raise NumericError("starting vector is orthogonal to u_1")
    return float(np.sum(p[1:] * c[1:] ** 2) / top)


def _batch_cov(rows, idx):
    xs = rows[list(idx)]
    cov = xs.T @ xs / len(idx)
    return cov.toarray() if hasattr(cov, "toarray") else np.asarray(cov)


def _spectral_norm_psd(mat, iters=10_000, tol=1e-15):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    d = mat.shape[0]
    if not np.any(mat):
        return 0.0
    w = np.ones(d) / math.sqrt(d) + 1e-3 * np.arange(d) / d
    w /= np.linalg.norm(w)
    lam = 0.0
    for _ in range(iters):
        v = mat @ w
        nrm = np.linalg.norm(v)
        if nrm == 0:
            return 0.0
        new = float(w @ v)
        w = v / nrm
        if abs(new - lam) <= tol * max(abs(new), 1e-300):
            lam = new
            break
        lam = new
    return float(max(lam, float(w @ mat @ w)))


def estimate_K(data, batch_size, method="exact", samples=10_000, rng=None):
    """K = || E[(C_S - C)^2] || for uniform mini-batches drawn without replacement."""
    n, d = data.n, data.d
    if not 1 <= batch_size <= n:
        raise ValueError(f"batch size {batch_size} invalid for n={n}")
    cov = data.explicit_covariance()
    if batch_size == n:
        return VarianceEstimate(0.0, method, 0)
    if method == "exact":
        count = comb(n, batch_size)
        if count > MAX_ENUMERATION or d > 512:
            raise CapacityError(f"{count} batches in dimension {d} is too many to enumerate")
        acc = np.zeros((d, d))
        for idx in combinations(range(n), batch_size):
            diff = _batch_cov(data.rows, idx) - cov
            acc += diff @ diff
        acc /= count
        return VarianceEstimate(_spectral_norm_psd(acc), "exact", count)
    if method == "monte-carlo":
        rng = rng if rng is not None else np.random.default_rng()
        acc = np.zeros((d, d))
        for _ in range(samples):
            idx = rng.choice(n, size=batch_size, replace=False)
            diff = _batch_cov(data.rows, idx) - cov
            acc += diff @ diff
        acc /= samples
        return VarianceEstimate(_spectral_norm_psd(acc), "monte-carlo", samples)
    raise ValueError(f"unknown method {method!r}")


def commutator_identity_check(cov, w):
    """| ||PC - CP||^2 - (w^T C^2 w - (w^T C w)^2) | for P = I - w w^T."""
    cov = np.asarray(cov, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    p = np.eye(len(w)) - np.outer(w, w)
    u = p @ cov - cov @ p
    lhs = _spectral_norm_psd(u.T @ u)
    cw = cov @ w
    rhs = float(cw @ cw - (w @ cw) ** 2)
    return abs(lhs - rhs)


def quadratic_form_bound_check(cov, w, lambda1=None, u1=None):
    """2 lambda_1^2 (1 - (u_1^T w)^2) - (w^T C^2 w - (w^T C w)^2); >= 0 for PSD C."""
    cov = np.asarray(cov, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if lambda1 is None or u1 is None:
        vals, vecs = np.linalg.eigh(cov)
        lambda1, u1 = vals[-1], vecs[:, -1]
    cw = cov @ w
    return float(2 * lambda1**2 * (1 - (u1 @ w) ** 2) - (cw @ cw - (w @ cw) ** 2))


def trace_bound_check(mat, proj, w):
    """||M|| ||P w||^2 - w^T P M P w for symmetric M and P."""
    mat = np.asarray(mat, dtype=np.float64)
    pw = np.asarray(proj, dtype=np.float64) @ np.asarray(w, dtype=np.float64)
    norm = float(np.max(np.abs(np.linalg.eigvalsh(mat)))) if mat.size else 0.0
    return float(norm * (pw @ pw) - pw @ mat @ pw)


def variance_matrices(data, batch, anchor, u):
    """M_u = (C_S - C) u u^T (C_S - C) and M_P = (C_S - C) P (C_S - C) for one batch."""
    cov = data.explicit_covariance()
    diff = _batch_cov(data.rows, batch) - cov
    anchor = np.asarray(anchor, dtype=np.float64)
    p = np.eye(data.d) - np.outer(anchor, anchor) / (anchor @ anchor)
    du = diff @ u
    return np.outer(du, du), diff @ p @ diff, p
