"""Small dense linear algebra, finite differences and ODE integrators."""

import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ContractViolation, DomainError, NotPositiveDefinite, NumericalFailure, StiffnessFailure


def as_vector(v, name="vector"):
    """Copy ``v`` into a finite 1-D float array."""
    arr = np.array(v, dtype=float).reshape(-1)
    if arr.size == 0:
        raise ContractViolation(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} has non-finite entries: {arr}")
    return arr


class SpdMatrix:
    """Symmetric positive definite matrix, factored once at construction."""

    __slots__ = ("matrix", "inverse", "_factor")

    def __init__(self, entries):
        mat = np.array(entries, dtype=float)
        if mat.ndim == 0:
            mat = mat.reshape(1, 1)
        elif mat.ndim == 1:
            mat = np.diag(mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
            raise ContractViolation(f"SPD matrix must be square, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise ContractViolation("SPD matrix has non-finite entries")
        scale = max(np.max(np.abs(mat)), 1e-300)
        if np.max(np.abs(mat - mat.T)) > 1e-12 * scale:
            raise NotPositiveDefinite("matrix is not symmetric")
        mat = 0.5 * (mat + mat.T)
        try:
            self._factor = cho_factor(mat, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(f"Cholesky factorization failed: {exc}") from None
        if not np.all(np.diag(self._factor[0]) > 0.0):
            raise NotPositiveDefinite("Cholesky factor has a non-positive pivot")
        self.matrix = mat
        self.inverse = cho_solve(self._factor, np.eye(mat.shape[0]), check_finite=False)
        self.matrix.setflags(write=False)
        self.inverse.setflags(write=False)

    @classmethod
    def identity(cls, m):
        return cls(np.eye(m))

    @property
    def dim(self):
        return self.matrix.shape[0]

    def solve(self, rhs):
        return cho_solve(self._factor, rhs, check_finite=False)

    def __repr__(self):
        return f"SpdMatrix({self.matrix.tolist()})"


def _spd(G):
    return G if isinstance(G, SpdMatrix) else SpdMatrix(G)


def _check_dim(v, G):
    if v.shape != (G.dim,):
        raise ContractViolation(f"dimension mismatch: vector {v.shape}, matrix {G.dim}x{G.dim}")


def weighted_norm(v, G):
    """sqrt(v^T G v)."""
    G = _spd(G)
    v = np.asarray(v, dtype=float).reshape(-1)
    _check_dim(v, G)
    return math.sqrt(max(float(v @ G.matrix @ v), 0.0))


def solve_spd(G, rhs):
    """Solve ``G z = rhs`` with the cached Cholesky factor of ``G``."""
    G = _spd(G)
    rhs = np.asarray(rhs, dtype=float).reshape(-1)
    _check_dim(rhs, G)
    return G.solve(rhs)


def fd_step(x):
    """Per-coordinate central-difference step 1e-6 * (1 + |x_i|)."""
    return 1e-6 * (1.0 + np.abs(x))


def central_gradient(field, x):
    """Central finite-difference gradient of a scalar function at ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    delta = fd_step(x)
    grad = np.empty_like(x)
    xp = x.copy()
    for i in range(x.size):
        xp[i] = x[i] + delta[i]
        f_plus = field(xp)
        xp[i] = x[i] - delta[i]
        f_minus = field(xp)
        xp[i] = x[i]
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise NumericalFailure(f"non-finite field value near x[{i}]", state=x)
        grad[i] = (f_plus - f_minus) / (2.0 * delta[i])
    return grad


def _finite_or_raise(v, t, state, stage):
    if not np.all(np.isfinite(v)):
        raise NumericalFailure(f"non-finite derivative at stage {stage}", t=t, state=state)
    return v


def rk4_step(deriv, x, dt, t=0.0):
    """One classical fourth-order Runge-Kutta step of an autonomous field.

    ``t`` only labels a :class:`NumericalFailure` raised on a non-finite stage.
    """
    if not dt > 0.0:
        raise ContractViolation(f"dt must be positive, got {dt}")
    k1 = _finite_or_raise(deriv(x), t, x, 1)
    x2 = x + 0.5 * dt * k1
    k2 = _finite_or_raise(deriv(x2), t + 0.5 * dt, x2, 2)
    x3 = x + 0.5 * dt * k2
    k3 = _finite_or_raise(deriv(x3), t + 0.5 * dt, x3, 3)
    x4 = x + dt * k3
    k4 = _finite_or_raise(deriv(x4), t + dt, x4, 4)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Fehlberg 4(5) tableau
_C = (0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2)
_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)
_B5 = (16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55)
_E = tuple(b5 - b4 for b4, b5 in zip(_B4, _B5))


def rkf45_step(deriv, x, dt, t=0.0):
    """One Fehlberg step: returns (fourth-order update, error estimate)."""
    ks = []
    for stage, row in enumerate(_A):
        xs = x.copy()
        for coeff, k in zip(row, ks):
            xs += dt * coeff * k
        ks.append(_finite_or_raise(deriv(xs), t + _C[stage] * dt, xs, stage + 1))
    x4 = x.copy()
    err = np.zeros_like(x)
    for b4, e, k in zip(_B4, _E, ks):
        x4 += dt * b4 * k
        err += dt * e * k
    return x4, err


def iter_rkf45(deriv, x0, t_span, rel_tol=1e-9, abs_tol=1e-12,
               first_step=None, max_step=None, max_steps=1_000_000):
    """Yield accepted ``(t, x)`` pairs of an adaptive Fehlberg 4(5) run.

    The initial point is yielded first.  Every accepted step satisfies
    ``|err_i| <= abs_tol + rel_tol * max(|x_i|, |x_new_i|)``.  A trial step
    whose stages leave the domain or go non-finite is rejected and retried
    with a tenth of the step.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ContractViolation(f"t_span must be increasing, got {t_span}")
    if not (rel_tol > 0.0 and abs_tol > 0.0):
        raise ContractViolation("tolerances must be positive")
    span = t1 - t0
    h_min = 1e-14 * span
    h_max = span if max_step is None else float(max_step)
    x = np.array(x0, dtype=float)
    t = t0
    h = min(first_step or span * 1e-3, h_max)
    yield t, x.copy()
    steps = 0
    while t < t1:
        if steps >= max_steps:
            raise NumericalFailure(f"step budget of {max_steps} exhausted", t=t, state=x)
        h = min(h, t1 - t)
        try:
            x_new, err = rkf45_step(deriv, x, h, t)
        except (NumericalFailure, DomainError):
            # a trial stage left the domain: reject and shrink
            ratio = math.inf
        else:
            scale = abs_tol + rel_tol * np.maximum(np.abs(x), np.abs(x_new))
            ratio = float(np.max(np.abs(err) / scale))
        if ratio <= 1.0:
            t = t1 if t1 - t - h <= 1e-15 * span else t + h
            x = x_new
            steps += 1
            yield t, x.copy()
        factor = 5.0 if ratio == 0.0 else min(5.0, max(0.1, 0.9 * ratio ** -0.2))
        h = min(h * factor, h_max)
        if t < t1 and h < h_min:
            raise StiffnessFailure(f"step size {h:.3e} below floor {h_min:.3e}", t=t, state=x)


def rkf45_integrate(deriv, x0, t_span, rel_tol=1e-9, abs_tol=1e-12, **kwargs):
    """Adaptive Fehlberg 4(5) integration; list of accepted ``(t, x)`` pairs."""
    return list(iter_rkf45(deriv, x0, t_span, rel_tol, abs_tol, **kwargs))
