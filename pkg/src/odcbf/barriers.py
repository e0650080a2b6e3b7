"""Barrier candidates: scalar fields, class-K^e functions, Lie derivatives,
and the high-order (HOCBF) and rectified (ReCBF) constructions for
relative-degree-two constraints."""

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import ContractViolation
from .numerics import central_gradient


@dataclass(frozen=True)
class ScalarField:
    """A scalar function of the state with optional analytic gradient.

    Without ``gradient`` the central finite-difference gradient is used.
    ``smooth=False`` exempts the field from gradient cross-validation.
    """

    value: Callable[[np.ndarray], float]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    smooth: bool = True
    name: str = "h"

    def __call__(self, x):
        return float(self.value(x))

    def grad(self, x):
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float)
        return central_gradient(self.value, np.asarray(x, dtype=float))

    def fd_grad(self, x):
        return central_gradient(self.value, np.asarray(x, dtype=float))


def gradient_mismatch(g, g_ref):
    """Relative gradient error ||g - g_ref|| / max(1, ||g_ref||)."""
    g_ref = np.asarray(g_ref, dtype=float)
    return float(np.linalg.norm(np.asarray(g) - g_ref) / max(1.0, np.linalg.norm(g_ref)))


def cross_validate_gradient(field, states, rtol=1e-5):
    """Raise ContractViolation if the analytic gradient disagrees with finite differences."""
    if field.gradient is None or not field.smooth:
        return
    for x in states:
        err = gradient_mismatch(field.grad(x), field.fd_grad(x))
        if err > rtol:
            raise ContractViolation(
                f"{field.name}: analytic gradient off by {err:.2e} (relative) at x={np.asarray(x).tolist()}")


KE_GRID = np.linspace(-10.0, 10.0, 401)


@dataclass(frozen=True)
class ClassKe:
    """Strictly increasing alpha with alpha(0) = 0, checked on a grid at construction."""

    value: Callable[[float], float]
    derivative: Callable[[float], float]
    name: str = "alpha"

    def __post_init__(self):
        if self.value(0.0) != 0.0:
            raise ContractViolation(f"{self.name}: alpha(0) = {self.value(0.0)} != 0")
        vals = np.array([self.value(s) for s in KE_GRID])
        if not np.all(np.diff(vals) > 0.0):
            raise ContractViolation(f"{self.name}: not strictly increasing on [-10, 10]")

    def __call__(self, s):
        return self.value(s)

    @classmethod
    def linear(cls, k):
        k = float(k)
        if not k > 0.0:
            raise ContractViolation(f"linear class-K^e slope must be positive, got {k}")
        return cls(lambda s: k * s, lambda s: k, name=f"linear({k:g})")

    @classmethod
    def cubic(cls, k):
        k = float(k)
        if not k > 0.0:
            raise ContractViolation(f"cubic class-K^e coefficient must be positive, got {k}")
        return cls(lambda s: k * s**3, lambda s: 3.0 * k * s**2, name=f"cubic({k:g})")


class LieData(NamedTuple):
    lf: float
    lg: np.ndarray


def lie(sys, field, x):
    """L_f h(x) and L_g h(x) from the field gradient."""
    dh = field.grad(x)
    return LieData(float(dh @ sys.drift(x)), dh @ sys.input_matrix(x))


def lf_field(sys, psi, gradient=None):
    """The scalar field x -> L_f psi(x), optionally with an analytic gradient."""

    def value(x):
        return float(psi.grad(x) @ sys.drift(x))

    return ScalarField(value, gradient, name=f"Lf_{psi.name}")


def check_relative_degree(sys, psi, states, tol=1e-10):
    """Require L_g psi = 0 at every sampled state (relative degree >= 2)."""
    for x in states:
        lg = lie(sys, psi, x).lg
        if np.max(np.abs(lg)) > tol:
            raise ContractViolation(
                f"{psi.name}: L_g psi = {lg.tolist()} at x={np.asarray(x).tolist()}; relative degree < 2")


@dataclass(frozen=True)
class HocbfSpec:
    psi: ScalarField
    alpha1: ClassKe
    lf_psi_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass(frozen=True)
class RecbfSpec:
    psi: ScalarField
    alpha1: ClassKe
    c1: float
    eps: float
    lf_psi_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if not self.c1 > 0.0:
            raise ContractViolation(f"c1 must be positive, got {self.c1}")
        if not self.eps > 0.0:
            raise ContractViolation(f"eps must be positive, got {self.eps}")


def hocbf_build(sys, spec, check_states=None):
    """h(x) = L_f psi(x) + alpha1(psi(x)).

    An analytic ``lf_psi_gradient`` is cross-checked against finite
    differences at ``check_states`` when those are given.
    """
    psi, a1 = spec.psi, spec.alpha1
    lfpsi = lf_field(sys, psi, spec.lf_psi_gradient)
    if check_states is not None:
        cross_validate_gradient(lfpsi, check_states)

    def value(x):
        return lfpsi(x) + a1(psi(x))

    def gradient(x):
        return lfpsi.grad(x) + a1.derivative(psi(x)) * psi.grad(x)

    return ScalarField(value, gradient, name=f"hocbf({psi.name})")


def rect_gamma(s, c1):
    """ReLU(-c1 s^3)."""
    return np.maximum(-c1 * s**3, 0.0)


def rect_gamma_prime(s, c1):
    """Derivative of :func:`rect_gamma`: -ReLU(-3 c1 s |s|)."""
    return -np.maximum(-3.0 * c1 * s * np.abs(s), 0.0)


def recbf_shift(sys, spec):
    """The field w(x) = L_f psi(x) + alpha1(psi(x)) - eps inside the rectifier."""
    psi, a1, eps = spec.psi, spec.alpha1, spec.eps
    lfpsi = lf_field(sys, psi, spec.lf_psi_gradient)

    def value(x):
        return lfpsi(x) + a1(psi(x)) - eps

    def gradient(x):
        return lfpsi.grad(x) + a1.derivative(psi(x)) * psi.grad(x)

    return ScalarField(value, gradient, name=f"w({psi.name})")


def recbf_build(sys, spec, check_states=None):
    """h(x) = psi(x) - ReLU(-c1 w(x)^3) with w = L_f psi + alpha1(psi) - eps."""
    psi, c1 = spec.psi, spec.c1
    w = recbf_shift(sys, spec)
    if check_states is not None:
        cross_validate_gradient(lf_field(sys, psi, spec.lf_psi_gradient), check_states)

    def value(x):
        return psi(x) - float(rect_gamma(w(x), c1))

    def gradient(x):
        dpsi = psi.grad(x)
        s = w(x)
        if s >= 0.0:
            return dpsi
        return dpsi - float(rect_gamma_prime(s, c1)) * w.grad(x)

    return ScalarField(value, gradient, name=f"recbf({psi.name})")
