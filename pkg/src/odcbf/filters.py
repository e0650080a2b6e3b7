"""Closed-form safety filters.

Every filter modifies a nominal controller ``k_d`` along
``b = Gamma^{-1} L_g h^T``:

* ``cbf_filter``: min 1/2 |u - k_d|_Gamma^2 s.t. L_f h + L_g h u >= -alpha(h)
* ``od_cbf_filter``: adds a decay variable w >= theta_d penalized by
  p/2 (w - theta_d)^2, with constraint L_f h + L_g h u >= -w alpha(h)
* ``fixed_theta_filter``: the standard filter with alpha(h) scaled by a
  state-dependent theta(x)
"""

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .barriers import ClassKe, lie
from .errors import ContractViolation, DegenerateDenominator, DomainError, FilterInfeasible
from .numerics import SpdMatrix

EPS_B = kernels.EPS_B
EPS_H = 1e-12


def zero_controller(m):
    zeros = np.zeros(m)
    zeros.setflags(write=False)
    return lambda x: zeros


@dataclass(frozen=True)
class FilterConfig:
    gamma: SpdMatrix
    p: float
    theta_d: float
    alpha: ClassKe
    k_d: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if not isinstance(self.gamma, SpdMatrix):
            object.__setattr__(self, "gamma", SpdMatrix(self.gamma))
        if not self.p > 0.0:
            raise ContractViolation(f"p must be positive, got {self.p}")
        if not self.theta_d >= 0.0:
            raise ContractViolation(f"theta_d must be nonnegative, got {self.theta_d}")

    @classmethod
    def default(cls, m, alpha, p=1.0, theta_d=1.0):
        """Gamma = I, k_d = 0."""
        return cls(SpdMatrix.identity(m), p, theta_d, alpha, zero_controller(m))


@dataclass(frozen=True)
class FilterDiagnostics:
    a: float
    b_norm: float
    c: float
    gain: float
    slack: float


@dataclass(frozen=True)
class FilterResult:
    u: np.ndarray
    theta: float
    diagnostics: FilterDiagnostics


def lambda_gain(a, b_norm):
    """ReLU(-a) / b^2, or 0 when b vanishes."""
    if b_norm < 0.0:
        raise ContractViolation("b_norm must be nonnegative")
    return kernels.cbf_gain(float(a), float(b_norm), EPS_B)[0]


def _od_gains_checked(a, b_norm, c, p):
    if b_norm < 0.0:
        raise ContractViolation("b_norm must be nonnegative")
    if not p > 0.0:
        raise ContractViolation(f"p must be positive, got {p}")
    phi, chi, status = kernels.od_gains(float(a), float(b_norm), float(c), float(p), EPS_B)
    if status:
        raise DegenerateDenominator(
            f"b = {b_norm:.3e}, c = {c:.3e}, a = {a:.3e}: no feasible input", a=a, b_norm=b_norm, c=c)
    return phi, chi


def phi_gain(a, b_norm, c, p):
    """Input gain ReLU(-a) / (b^2 + p ReLU(c)^2) of the optimal-decay filter."""
    return _od_gains_checked(a, b_norm, c, p)[0]


def chi_gain(a, b_norm, c, p):
    """Decay gain ReLU(-a) ReLU(c) / (b^2 + p c^2) of the optimal-decay filter."""
    return _od_gains_checked(a, b_norm, c, p)[1]


class _Terms(NamedTuple):
    lf: float
    lg: np.ndarray
    kd: np.ndarray
    alpha_h: float
    b: np.ndarray
    b_norm: float


def _terms(sys, h, cfg, x):
    lf, lg = lie(sys, h, x)
    kd = np.asarray(cfg.k_d(x), dtype=float)
    b = cfg.gamma.inverse @ lg
    b_norm = float(np.sqrt(max(lg @ b, 0.0)))
    return _Terms(lf, lg, kd, float(cfg.alpha(h(x))), b, b_norm)


def _reduced_filter(t, a, theta, cfg, x):
    gain, status = kernels.cbf_gain(a, t.b_norm, EPS_B)
    c = t.alpha_h / cfg.p
    if status:
        raise FilterInfeasible(
            f"L_g h = 0 and a = {a:.6g} < 0 at x = {np.asarray(x).tolist()}",
            x=x, a=a, b_norm=t.b_norm, c=c)
    u = t.kd + gain * t.b
    slack = t.lf + float(t.lg @ u) + theta * t.alpha_h
    return FilterResult(u, theta, FilterDiagnostics(a, t.b_norm, c, gain, slack))


def cbf_filter(sys, h, cfg, x):
    """Explicit solution of the standard CBF-QP; ``theta`` is reported as 1."""
    t = _terms(sys, h, cfg, x)
    a = t.lf + float(t.lg @ t.kd) + t.alpha_h
    return _reduced_filter(t, a, 1.0, cfg, x)


def fixed_theta_filter(sys, h, cfg, theta_fn, x):
    """Standard CBF-QP with the decay coefficient fixed to ``theta_fn(x)``."""
    theta = float(theta_fn(x))
    if not theta >= 0.0:
        raise ContractViolation(f"theta(x) must be nonnegative, got {theta}")
    t = _terms(sys, h, cfg, x)
    a = t.lf + float(t.lg @ t.kd) + theta * t.alpha_h
    return _reduced_filter(t, a, theta, cfg, x)


def od_cbf_filter(sys, h, cfg, x):
    """Explicit solution of the optimal-decay CBF-QP: input and decay rate."""
    t = _terms(sys, h, cfg, x)
    a = t.lf + float(t.lg @ t.kd) + cfg.theta_d * t.alpha_h
    c = t.alpha_h / cfg.p
    phi, chi, status = kernels.od_gains(a, t.b_norm, c, cfg.p, EPS_B)
    if status:
        raise FilterInfeasible(
            f"b = {t.b_norm:.3e}, c = {c:.3e}, a = {a:.6g}: optimal-decay QP infeasible "
            f"at x = {np.asarray(x).tolist()}", x=x, a=a, b_norm=t.b_norm, c=c)
    u = t.kd + phi * t.b
    theta = cfg.theta_d + chi
    slack = t.lf + float(t.lg @ u) + theta * t.alpha_h
    return FilterResult(u, theta, FilterDiagnostics(a, t.b_norm, c, phi, slack))


def converse_decay(F, h, alpha, x):
    """Smallest decay rate making the closed-loop field F satisfy
    L_F h >= -theta alpha(h) at x (zero on the boundary h = 0)."""
    hx = h(x)
    if hx < -EPS_H:
        raise DomainError(f"converse decay needs h(x) >= 0, got {hx}")
    if abs(hx) <= EPS_H:
        return 0.0
    lfh = float(h.grad(x) @ np.asarray(F(x), dtype=float))
    return max(-lfh, 0.0) / float(alpha(hx))


def bind(kind, sys, h, cfg, theta_fn=None):
    """Freeze a filter into a function x -> FilterResult."""
    if kind == "cbf":
        return lambda x: cbf_filter(sys, h, cfg, x)
    if kind == "od":
        return lambda x: od_cbf_filter(sys, h, cfg, x)
    if kind == "fixed-theta":
        if theta_fn is None:
            raise ContractViolation("fixed-theta filter needs theta_fn")
        return lambda x: fixed_theta_filter(sys, h, cfg, theta_fn, x)
    raise ContractViolation(f"unknown filter kind {kind!r}")


class BatchResult(NamedTuple):
    u: np.ndarray  # (N, m)
    theta: np.ndarray  # (N,)
    status: np.ndarray  # (N,) 0 feasible, 1 infeasible
    a: np.ndarray
    b_norm: np.ndarray
    c: np.ndarray


def _batch_terms(sys, h, cfg, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N = X.shape[0]
    lf = np.empty(N)
    lg = np.empty((N, sys.m))
    kd = np.empty((N, sys.m))
    alpha_h = np.empty(N)
    for i, x in enumerate(X):
        lf[i], lg[i] = lie(sys, h, x)
        kd[i] = cfg.k_d(x)
        alpha_h[i] = cfg.alpha(h(x))
    b = lg @ cfg.gamma.inverse  # Gamma^{-1} symmetric
    b_norm = np.sqrt(np.maximum(np.einsum("ij,ij->i", lg, b), 0.0))
    return lf, lg, kd, alpha_h, b, b_norm


def od_cbf_filter_batch(sys, h, cfg, X, backend=None):
    """:func:`od_cbf_filter` over the rows of ``X``; infeasible rows are flagged, not raised."""
    lf, lg, kd, alpha_h, b, b_norm = _batch_terms(sys, h, cfg, X)
    a = lf + np.einsum("ij,ij->i", lg, kd) + cfg.theta_d * alpha_h
    c = alpha_h / cfg.p
    phi, chi, status = kernels.od_gains_batch(a, b_norm, c, cfg.p, backend=backend)
    return BatchResult(kd + phi[:, None] * b, cfg.theta_d + chi, status, a, b_norm, c)


def cbf_filter_batch(sys, h, cfg, X, backend=None):
    """:func:`cbf_filter` over the rows of ``X``; infeasible rows are flagged, not raised."""
    lf, lg, kd, alpha_h, b, b_norm = _batch_terms(sys, h, cfg, X)
    a = lf + np.einsum("ij,ij->i", lg, kd) + alpha_h
    gain, status = kernels.cbf_gain_batch(a, b_norm, backend=backend)
    return BatchResult(kd + gain[:, None] * b, np.ones_like(a), status, a, b_norm, alpha_h / cfg.p)
