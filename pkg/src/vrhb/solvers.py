"""Top-eigenvector solvers: power iteration, heavy-ball power iteration and
their variance-reduced stochastic versions.

Every solver takes a unit starting vector and returns a :class:`RunTrace`.
When a :class:`~vrhb.data.SpectralReference` is passed it is used only to
score iterates (error gap) and, for ``Momentum.oracle()``, to read lambda_2;
the iteration itself never looks at u_1.
"""
import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, NumericError
from .matrix import (
    MiniBatch,
    covariance_matvec,
    error_gap,
    minibatch_matvec,
    normalize,
    sample_minibatch,
)
from .trace import RunTrace

# Norm window for a freshly computed iterate before it is rescaled.
NORM_WINDOW = (1e-8, 1e8)
DEGENERATE_THETA = 1e-10

IterateCallback = Callable[[int, int, np.ndarray, float], None]


@dataclass(frozen=True)
class Momentum:
    """Momentum policy: ``none``, ``fixed`` (explicit beta), ``oracle``
    (beta from the true lambda_2) or ``adaptive`` (beta from lambda_2
    estimated on the fly)."""

    kind: str = "none"
    beta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "fixed", "oracle", "adaptive"):
            raise ValueError(f"unknown momentum kind {self.kind!r}")
        if self.kind == "fixed" and not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ValueError("fixed momentum needs a finite beta >= 0")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def fixed(cls, beta):
        return cls("fixed", float(beta))

    @classmethod
    def oracle(cls):
        return cls("oracle")

    @classmethod
    def adaptive(cls):
        return cls("adaptive")

    @classmethod
    def parse(cls, text):
        """Parse ``none``, ``oracle``, ``adaptive`` or ``fixed:<beta>``."""
        text = text.strip()
        if text.startswith("fixed:"):
            return cls.fixed(float(text.split(":", 1)[1]))
        return cls(text)

    def __str__(self):
        return f"fixed:{self.beta:g}" if self.kind == "fixed" else self.kind


@dataclass(frozen=True)
class SolverConfig:
    eta: float = 1.0
    momentum: Momentum = Momentum()
    batch_size: int = 1
    epoch_len: int = 1
    epochs: int = 1
    seed: int = 0
    estimator_warmup: int = 2
    with_replacement: bool = False

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epoch_len < 1 or self.epochs < 1:
            raise ValueError("epoch_len and epochs must be >= 1")
        if self.estimator_warmup < 0:
            raise ValueError("estimator_warmup must be >= 0")


@dataclass(frozen=True)
class IterateState:
    """(w_{t-1}, w_t) plus the epoch anchor w~ and its exact gradient C w~.

    The iterates are kept jointly rescaled; ``log_scale`` is the log of the
    factor that recovers the unscaled recursion, w_t = w_cur * exp(log_scale).
    """

    w_prev: np.ndarray
    w_cur: np.ndarray
    outer: np.ndarray
    outer_grad: np.ndarray
    inner_t: int = 0
    log_scale: float = 0.0


def stability_rescale(state):
    """Divide both w_t and w_{t+1} by ||w_{t+1}||; directions are unchanged."""
    nrm = float(np.linalg.norm(state.w_cur))
    if not (math.isfinite(nrm) and nrm > 0):
        raise DivergenceError(f"cannot rescale iterate with norm {nrm!r}", iteration=state.inner_t)
    return replace(
        state,
        w_prev=state.w_prev / nrm,
        w_cur=state.w_cur / nrm,
        log_scale=state.log_scale + math.log(nrm),
    )


def vr_gradient(state, data, batch):
    """Variance-reduced gradient at ``state.w_cur``.

    The component along the anchor uses the exact gradient C w~; the
    orthogonal remainder is pushed through the mini-batch covariance:

        g = a g~ + C_S (w - a w~) = C_S w + a (g~ - C_S w~),  a = w~^T w / ||w~||^2.

    The second form is used.  With the first, a coordinate of g that is
    small relative to ||w|| comes out of a cancellation between two large
    terms; with the second, g~ - C_S w~ vanishes exactly for a full batch
    and the result is C w to rounding.
    """
    w, anchor = state.w_cur, state.outer
    nn = anchor @ anchor
    if not nn > 0:
        raise ValueError("outer iterate must be nonzero")
    along = (anchor @ w) / nn
    return minibatch_matvec(data, batch, w) + along * (state.outer_grad - minibatch_matvec(data, batch, anchor))


def momentum_from_lambda2(eta, lambda2_hat):
    return (1.0 - eta + eta * lambda2_hat) ** 2


def estimate_lambda2(prev_outer, prev_outer_grad, outer, outer_grad):
    """lambda_2 estimate from two consecutive unit outer iterates and their
    exact gradients, or None when they are (nearly) parallel.

    The Rayleigh quotient is taken at u = w~_{s-1} - theta w~_s with
    C u = C w~_{s-1} - theta C w~_s, so no extra product with C is needed.
    Expanding u^T C u / u^T u gives the usual three-inner-product formula.
    """
    theta = float(prev_outer @ outer)
    u = prev_outer - theta * outer
    denom = float(u @ u)
    if denom < DEGENERATE_THETA or 1.0 - theta * theta < DEGENERATE_THETA:
        return None
    cu = prev_outer_grad - theta * outer_grad
    return float(u @ cu) / denom


@dataclass
class Lambda2Estimator:
    """Running lambda_2 estimate refreshed once per outer iteration."""

    prev_outer: Optional[np.ndarray] = None
    prev_outer_grad: Optional[np.ndarray] = None
    lambda2_hat: Optional[float] = None
    theta: Optional[float] = None
    warmup: int = 2
    updates: int = 0

    def update(self, epoch, outer, outer_grad):
        """Feed the new outer iterate; returns the current estimate (maybe None)."""
        if self.prev_outer is not None and epoch >= self.warmup:
            self.theta = float(self.prev_outer @ outer)
            est = estimate_lambda2(self.prev_outer, self.prev_outer_grad, outer, outer_grad)
            upper = float(outer @ outer_grad) / float(outer @ outer)
            if est is not None and 0.0 < est < upper:
                self.lambda2_hat = est
                self.updates += 1
        self.prev_outer = outer.copy()
        self.prev_outer_grad = outer_grad.copy()
        return self.lambda2_hat


def _check_start(w0, d):
    w0 = np.asarray(w0, dtype=np.float64)
    if w0.shape != (d,):
        raise ValueError(f"starting vector has shape {w0.shape}, expected ({d},)")
    if abs(np.linalg.norm(w0) - 1.0) > 1e-9:
        raise ValueError("starting vector must have unit norm")
    return w0


def _gap(ref, w):
    if ref is None:
        return None
    return error_gap(normalize(w), ref.u1)


def _check_norm(w, epoch, t, window=True):
    nrm = float(np.linalg.norm(w))
    if not np.all(np.isfinite(w)):
        raise DivergenceError(f"non-finite iterate at epoch {epoch}, iteration {t}", epoch, t)
    if window and not NORM_WINDOW[0] <= nrm <= NORM_WINDOW[1]:
        raise DivergenceError(
            f"iterate norm {nrm:.3e} left [{NORM_WINDOW[0]:g}, {NORM_WINDOW[1]:g}] "
            f"at epoch {epoch}, iteration {t}",
            epoch,
            t,
        )


def _diverge(trace, err):
    trace.diverged = True
    trace.message = str(err)
    err.trace = trace
    raise err


def power_run(data, w0, iters, ref=None, on_iterate=None):
    """Plain power iteration w <- C w / ||C w||; one row per iteration."""
    w = _check_start(w0, data.d)
    trace = RunTrace("power")
    start = time.perf_counter()
    trace.record(0, 0.0, _gap(ref, w))
    if on_iterate:
        on_iterate(0, 0, w, 0.0)
    for it in range(1, iters + 1):
        try:
            w = normalize(covariance_matvec(data, w))
        except NumericError as err:
            _diverge(trace, DivergenceError(str(err), iteration=it))
        if on_iterate:
            on_iterate(0, it, w, 0.0)
        trace.record(it, float(it), _gap(ref, w), wallclock=time.perf_counter() - start)
    trace.final = w
    return trace


def power_momentum_run(data, w0, beta, iters, ref=None, rescale=True, on_iterate=None):
    """Heavy-ball power iteration w_{t+1} = 2 C w_t - beta w_{t-1}.

    The first step is w_1 = C w_0 (no momentum), which is the eta = 1,
    full-batch case of the variance-reduced epoch.  With ``rescale`` the pair
    (w_t, w_{t+1}) is divided by ||w_{t+1}|| after each step; ``on_iterate``
    receives (0, t, w_t, log_scale) with the unscaled iterate equal to
    w_t * exp(log_scale).
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    w0 = _check_start(w0, data.d)
    trace = RunTrace("power-m")
    start = time.perf_counter()
    trace.record(0, 0.0, _gap(ref, w0))
    state = IterateState(w0, covariance_matvec(data, w0), w0, w0, inner_t=1)
    if on_iterate:
        on_iterate(0, 0, w0, 0.0)
    for it in range(1, iters + 1):
        if it > 1:
            w_next = 2.0 * covariance_matvec(data, state.w_cur) - beta * state.w_prev
            state = replace(state, w_prev=state.w_cur, w_cur=w_next, inner_t=it)
        try:
            _check_norm(state.w_cur, 0, it, window=rescale)
            if rescale:
                state = stability_rescale(state)
        except DivergenceError as err:
            _diverge(trace, err)
        if on_iterate:
            on_iterate(0, it, state.w_cur, state.log_scale)
        trace.record(it, float(it), _gap(ref, state.w_cur), wallclock=time.perf_counter() - start)
    trace.final = normalize(state.w_cur)
    return trace


def resolve_beta(momentum, eta, ref):
    """Static beta for a momentum policy (adaptive starts from lambda_2 = 0)."""
    if momentum.kind == "none":
        return 0.0
    if momentum.kind == "fixed":
        return momentum.beta
    if momentum.kind == "oracle":
        if ref is None:
            raise ValueError("oracle momentum needs a spectral reference")
        return momentum_from_lambda2(eta, ref.lambda2)
    return momentum_from_lambda2(eta, 0.0)


def vr_hb_power_run(data, w0, config, ref=None, on_iterate=None, name="vr-hb-power"):
    """Variance-reduced heavy-ball power iteration.

    Each epoch computes the exact gradient g~ = C w~, takes w_1 = (1-eta) w~
    + eta g~, then m-1 mini-batch steps

        w_{t+1} = 2((1-eta) w_t + eta g_t) - beta w_{t-1},

    rescaling (w_t, w_{t+1}) after every step, and ends with w~ <- w_m.
    Data passes: 1 per exact gradient, |S|/n per mini-batch step.
    """
    w_tilde = _check_start(w0, data.d)
    n, eta, m = data.n, config.eta, config.epoch_len
    if config.batch_size > n and not config.with_replacement:
        raise ValueError(f"batch size {config.batch_size} exceeds n={n}")
    rng = np.random.default_rng(config.seed)
    adaptive = config.momentum.kind == "adaptive"
    beta = resolve_beta(config.momentum, eta, ref)
    estimator = Lambda2Estimator(warmup=config.estimator_warmup) if adaptive else None
    step_cost = config.batch_size / n
    full = MiniBatch(np.arange(n)) if config.batch_size == n and not config.with_replacement else None

    trace = RunTrace(name, seed=config.seed)
    trace.outer_iterates.append(w_tilde)
    start = time.perf_counter()
    trace.record(0, 0.0, _gap(ref, w_tilde))
    passes = 0.0
    for s in range(config.epochs):
        g_tilde = covariance_matvec(data, w_tilde)
        passes += 1.0
        if adaptive:
            lam = estimator.update(s, w_tilde, g_tilde)
            beta = momentum_from_lambda2(eta, 0.0 if lam is None else lam)
        state = IterateState(w_tilde, (1 - eta) * w_tilde + eta * g_tilde, w_tilde, g_tilde, inner_t=1)
        try:
            _check_norm(state.w_cur, s, 1)
            state = stability_rescale(state)
            if on_iterate:
                on_iterate(s, 0, w_tilde, 0.0)
                on_iterate(s, 1, state.w_cur, state.log_scale)
            for t in range(1, m):
                batch = full or sample_minibatch(n, config.batch_size, rng, config.with_replacement)
                g = vr_gradient(state, data, batch)
                w_next = 2.0 * ((1 - eta) * state.w_cur + eta * g) - beta * state.w_prev
                passes += step_cost
                _check_norm(w_next, s, t + 1)
                state = stability_rescale(
                    replace(state, w_prev=state.w_cur, w_cur=w_next, inner_t=t + 1)
                )
                if on_iterate:
                    on_iterate(s, t + 1, state.w_cur, state.log_scale)
        except DivergenceError as err:
            err.epoch = s if err.epoch is None else err.epoch
            _diverge(trace, err)
        w_tilde = state.w_cur
        trace.outer_iterates.append(w_tilde)
        trace.record(
            s + 1,
            passes,
            _gap(ref, w_tilde),
            lambda2_hat=estimator.lambda2_hat if adaptive else None,
            wallclock=time.perf_counter() - start,
        )
    trace.final = w_tilde
    return trace


def vr_power_m_run(data, w0, config, ref=None, on_iterate=None):
    """Variance-reduced Power+M: the eta = 1 case of :func:`vr_hb_power_run`."""
    return vr_hb_power_run(data, w0, replace(config, eta=1.0), ref, on_iterate, name="vr-power-m")


def vr_pca_run(data, w0, config, ref=None):
    """Variance-reduced Oja iteration (SVRG applied to the PCA objective).

    Epoch: u~ = C w~, then m steps
    w <- normalize(w + eta (C_S w - C_S w~ + u~)).  Momentum is ignored.
    """
    w_tilde = _check_start(w0, data.d)
    n, eta = data.n, config.eta
    rng = np.random.default_rng(config.seed)
    step_cost = config.batch_size / n
    full = MiniBatch(np.arange(n)) if config.batch_size == n and not config.with_replacement else None
    trace = RunTrace("vr-pca", seed=config.seed)
    trace.outer_iterates.append(w_tilde)
    start = time.perf_counter()
    trace.record(0, 0.0, _gap(ref, w_tilde))
    passes = 0.0
    for s in range(config.epochs):
        u_tilde = covariance_matvec(data, w_tilde)
        passes += 1.0
        w = w_tilde
        try:
            for t in range(config.epoch_len):
                batch = full or sample_minibatch(n, config.batch_size, rng, config.with_replacement)
                step = minibatch_matvec(data, batch, w - w_tilde) + u_tilde
                w_next = w + eta * step
                passes += step_cost
                _check_norm(w_next, s, t + 1)
                w = normalize(w_next)
        except NumericError as err:
            if not isinstance(err, DivergenceError):
                err = DivergenceError(str(err), s, t + 1)
            _diverge(trace, err)
        w_tilde = w
        trace.outer_iterates.append(w_tilde)
        trace.record(s + 1, passes, _gap(ref, w_tilde), wallclock=time.perf_counter() - start)
    trace.final = w_tilde
    return trace


SOLVERS = {
    "power": power_run,
    "power-m": power_momentum_run,
    "vr-pca": vr_pca_run,
    "vr-power-m": vr_power_m_run,
    "vr-hb-power": vr_hb_power_run,
}
