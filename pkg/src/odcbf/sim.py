"""Closed-loop simulation of a filtered control-affine system."""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractViolation, DomainError, FilterInfeasible, NumericalFailure
from .numerics import iter_rkf45, rk4_step


@dataclass(frozen=True)
class SimConfig:
    x0: tuple
    t_final: float
    integrator: str = "rk4"
    dt: float = 1e-3
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: Optional[float] = None
    max_steps: int = 2_000_000
    record_stride: int = 1

    def __post_init__(self):
        if self.integrator not in ("rk4", "rkf45"):
            raise ContractViolation(f"integrator must be rk4 or rkf45, got {self.integrator!r}")
        if not self.t_final > 0.0:
            raise ContractViolation("t_final must be positive")
        if self.integrator == "rk4" and not self.dt > 0.0:
            raise ContractViolation("dt must be positive")
        if self.integrator == "rkf45" and not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise ContractViolation("tolerances must be positive")
        if self.record_stride < 1:
            raise ContractViolation("record_stride must be >= 1")
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    h: np.ndarray
    psi: np.ndarray
    steps: int = 0
    completed: bool = True

    def __len__(self):
        return self.t.size


@dataclass(frozen=True)
class SimMetrics:
    min_h: float
    min_psi: float
    max_input_norm: float
    final_h: float
    wall_steps: int


class _Recorder:
    def __init__(self, filter_fn, h_field, psi_field):
        self.filter_fn = filter_fn
        self.h_field = h_field
        self.psi_field = psi_field
        self.rows = []

    def record(self, t, x):
        res = self.filter_fn(x)
        self.rows.append((t, x.copy(), np.asarray(res.u, dtype=float).copy(), float(res.theta),
                          self.h_field(x), self.psi_field(x)))

    def trajectory(self, steps, completed):
        if not self.rows:
            return None
        t, x, u, theta, h, psi = (np.array(col) for col in zip(*self.rows))
        return Trajectory(t, x, u, theta, h, psi, steps, completed)


def simulate(sys, h_field, psi_field, filter_fn, cfg):
    """Integrate x' = f(x) + g(x) k(x) with the filter evaluated at every stage.

    Rows hold (t, x, u, theta, h, psi) every ``record_stride`` steps plus
    the final state.  A FilterInfeasible or NumericalFailure propagates
    with the partial trajectory attached as ``exc.trajectory``.
    """

    def deriv(x):
        return sys.drift(x) + sys.input_matrix(x) @ filter_fn(x).u

    rec = _Recorder(filter_fn, h_field, psi_field)
    x = np.array(cfg.x0, dtype=float)
    if x.shape != (sys.n,):
        raise ContractViolation(f"x0 has {x.size} entries, system has n={sys.n}")
    steps = 0
    t = 0.0
    try:
        # overflow surfaces through the integrators' finiteness checks instead
        with _quiet():
            rec.record(0.0, x)
            if cfg.integrator == "rk4":
                n_steps = max(1, math.ceil(cfg.t_final / cfg.dt - 1e-9))
                for k in range(n_steps):
                    dt = min(cfg.dt, cfg.t_final - k * cfg.dt)
                    x = rk4_step(deriv, x, dt, t)
                    steps = k + 1
                    t = cfg.t_final if steps == n_steps else steps * cfg.dt
                    if steps % cfg.record_stride == 0 or steps == n_steps:
                        rec.record(t, x)
            else:
                it = iter_rkf45(deriv, x, (0.0, cfg.t_final), cfg.rel_tol, cfg.abs_tol,
                                max_step=cfg.max_step, max_steps=cfg.max_steps)
                next(it)
                for t, x in it:
                    steps += 1
                    if steps % cfg.record_stride == 0 or t >= cfg.t_final:
                        rec.record(t, x)
    except DomainError as exc:
        failure = NumericalFailure(f"left the dynamics domain: {exc}", t=t, state=x)
        failure.trajectory = rec.trajectory(steps, completed=False)
        raise failure from exc
    except (FilterInfeasible, NumericalFailure) as exc:
        if exc.t is None:
            exc.t = t
        exc.trajectory = rec.trajectory(steps, completed=False)
        raise
    return rec.trajectory(steps, completed=True)


def _quiet():
    return np.errstate(over="ignore", invalid="ignore", divide="ignore")


def metrics(tr):
    """Extremes over the recorded rows."""
    with _quiet():
        norms = np.linalg.norm(tr.u, axis=1)
    return SimMetrics(
        min_h=float(np.min(tr.h)),
        min_psi=float(np.min(tr.psi)),
        max_input_norm=float(np.max(norms)),
        final_h=float(tr.h[-1]),
        wall_steps=int(tr.steps),
    )
