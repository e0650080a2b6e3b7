"""Control-affine plants x' = f(x) + g(x) u."""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractViolation, DomainError


@dataclass(frozen=True)
class ControlAffineSystem:
    """A plant with drift ``f`` and input matrix ``g``.

    ``drift(x)`` returns shape (n,), ``input_matrix(x)`` shape (n, m).
    """

    n: int
    m: int
    drift: Callable[[np.ndarray], np.ndarray]
    input_matrix: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"

    def __post_init__(self):
        if self.n <= 0 or self.m <= 0:
            raise ContractViolation(f"dimensions must be positive, got n={self.n}, m={self.m}")

    def f(self, x):
        return self.drift(x)

    def g(self, x):
        return self.input_matrix(x)

    def field(self, x, u):
        """x' = f(x) + g(x) u."""
        return self.drift(x) + self.input_matrix(x) @ u

    def check_shapes(self, x):
        """Evaluate once at ``x`` and verify output shapes and finiteness."""
        x = np.asarray(x, dtype=float)
        fx = np.asarray(self.drift(x))
        gx = np.asarray(self.input_matrix(x))
        if fx.shape != (self.n,) or gx.shape != (self.n, self.m):
            raise ContractViolation(
                f"{self.name}: drift {fx.shape}, input matrix {gx.shape}; "
                f"expected ({self.n},), ({self.n}, {self.m})")
        if not (np.all(np.isfinite(fx)) and np.all(np.isfinite(gx))):
            raise ContractViolation(f"{self.name}: non-finite dynamics at {x}")


def closed_loop_field(sys, controller):
    """Return F(x) = f(x) + g(x) k(x)."""

    def F(x):
        return sys.drift(x) + sys.input_matrix(x) @ np.asarray(controller(x), dtype=float)

    return F


_DI_G = np.array([[0.0], [1.0]])
_DI_G.setflags(write=False)


def double_integrator():
    """State (x, x'), scalar acceleration input."""

    def drift(x):
        return np.array([x[1], 0.0])

    def input_matrix(x):
        return _DI_G

    return ControlAffineSystem(2, 1, drift, input_matrix, name="double-integrator")


@dataclass(frozen=True)
class SatelliteParams:
    mu: float = 2.346e-9  # km^3/s^2
    R: float = 0.3097  # km

    def __post_init__(self):
        if not (self.mu > 0.0 and self.R > 0.0):
            raise ContractViolation(f"mu and R must be positive, got mu={self.mu}, R={self.R}")


def satellite(params=None):
    """Planar orbit in polar coordinates, state (r, theta, r', theta').

    Inputs are radial and tangential accelerations; the tangential one
    enters the angular equation divided by r.
    """
    params = params or SatelliteParams()
    mu = params.mu

    def _radius(x):
        r = x[0]
        if not r > 0.0:
            raise DomainError(f"satellite dynamics need r > 0, got r={r}")
        return r

    def drift(x):
        r = _radius(x)
        rdot, thdot = x[2], x[3]
        # mu r / (r^2)^(3/2) == mu / r^2 for r > 0
        return np.array([rdot, thdot, r * thdot * thdot - mu / (r * r), -2.0 * rdot * thdot / r])

    def input_matrix(x):
        r = _radius(x)
        return np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0 / r]])

    return ControlAffineSystem(4, 2, drift, input_matrix, name="satellite")


def circular_orbit_rate(params, r):
    """Angular rate sqrt(mu / r^3) of the circular orbit of radius r."""
    return float(np.sqrt(params.mu / r**3))
