"""Exact small dense convex QP solver used to cross-check the closed forms.

    minimize 1/2 z^T H z + q^T z   subject to   A z >= lb

All 2^k active sets are enumerated; for each one the equality-constrained
KKT system is solved and the candidate is kept if it is primal feasible
and dual nonnegative.  Deliberately shares nothing with ``filters``.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .barriers import lie
from .errors import ContractViolation, NumericalFailure, QpInfeasible

MAX_CONSTRAINTS = 16
PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-12
COND_LIMIT = 1e12


@dataclass(frozen=True)
class QpProblem:
    H: np.ndarray
    q: np.ndarray
    A: np.ndarray
    lb: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        q = np.asarray(self.q, dtype=float).reshape(-1)
        d = q.size
        A = np.asarray(self.A, dtype=float).reshape(-1, d)
        lb = np.asarray(self.lb, dtype=float).reshape(-1)
        if H.shape != (d, d):
            raise ContractViolation(f"H has shape {H.shape}, expected {(d, d)}")
        if A.shape[0] != lb.size:
            raise ContractViolation("A and lb disagree on the number of constraints")
        if lb.size > MAX_CONSTRAINTS:
            raise ContractViolation(f"at most {MAX_CONSTRAINTS} constraints, got {lb.size}")
        try:
            np.linalg.cholesky(0.5 * (H + H.T))
        except np.linalg.LinAlgError:
            raise ContractViolation("H must be positive definite") from None
        for name, val in (("H", H), ("q", q), ("A", A), ("lb", lb)):
            object.__setattr__(self, name, val)

    @property
    def dim(self):
        return self.q.size

    @property
    def n_constraints(self):
        return self.lb.size

    def objective(self, z):
        return float(0.5 * z @ self.H @ z + self.q @ z)


@dataclass(frozen=True)
class QpSolution:
    z: np.ndarray
    multipliers: np.ndarray
    active_set: tuple
    objective: float
    candidates: int = field(default=0, compare=False)


def _solve_active(p, active):
    d, W = p.dim, list(active)
    if not W:
        return np.linalg.solve(p.H, -p.q), np.zeros(0)
    Aw = p.A[W]
    K = np.zeros((d + len(W), d + len(W)))
    K[:d, :d] = p.H
    K[:d, d:] = -Aw.T
    K[d:, :d] = Aw
    if np.linalg.cond(K) > COND_LIMIT:
        return None
    sol = np.linalg.solve(K, np.concatenate([-p.q, p.lb[W]]))
    return sol[:d], sol[d:]


def _active_sets(k):
    for size in range(k + 1):
        yield from combinations(range(k), size)


def solve_small_qp(p):
    """Global minimizer of a strictly convex QP by active-set enumeration.

    Among valid candidates the lowest objective wins; near-ties go to the
    lexicographically smallest active set.
    """
    k = p.n_constraints
    best = None
    solvable = 0
    for active in _active_sets(k):
        sol = _solve_active(p, active)
        if sol is None:
            continue
        solvable += 1
        z, mu_w = sol
        if not np.all(np.isfinite(z)):
            continue
        if np.any(mu_w < -DUAL_TOL):
            continue
        scale = 1.0 + np.abs(p.lb)
        if np.any(p.A @ z - p.lb < -PRIMAL_TOL * scale):
            continue
        mu = np.zeros(k)
        mu[list(active)] = np.maximum(mu_w, 0.0)
        obj = p.objective(z)
        if best is None or obj < best[3] - 1e-12 * (1.0 + abs(best[3])) or (
                abs(obj - best[3]) <= 1e-12 * (1.0 + abs(best[3])) and active < best[2]):
            best = (z, mu, active, obj)
    if best is None:
        if solvable == 0:
            raise NumericalFailure("every KKT system was singular")
        _confirm_empty(p)
        raise NumericalFailure("no KKT candidate survived although the feasible set looks nonempty")
    z, mu, active, obj = best
    return QpSolution(z, mu, tuple(active), obj, solvable)


def _confirm_empty(p):
    """Raise QpInfeasible when the constraint set is provably or apparently empty."""
    row_norm = np.linalg.norm(p.A, axis=1)
    zero_rows = row_norm <= 1e-14
    if np.any(zero_rows & (p.lb > PRIMAL_TOL)):
        bad = int(np.flatnonzero(zero_rows & (p.lb > PRIMAL_TOL))[0])
        raise QpInfeasible(f"constraint {bad} reads 0 >= {p.lb[bad]:.6g}")
    z0 = np.linalg.solve(p.H, -p.q)
    points = [z0]
    for i in np.flatnonzero(~zero_rows):
        gap = p.lb[i] - p.A[i] @ z0
        points.append(z0 + max(gap, 0.0) * p.A[i] / row_norm[i] ** 2)
    worst = [np.max(p.lb - p.A @ z) for z in points]
    if min(worst) > PRIMAL_TOL:
        raise QpInfeasible(f"no single-constraint projection is feasible (best violation {min(worst):.3e})")


def kkt_residuals(p, sol):
    """(stationarity, worst primal violation, worst complementarity, most negative multiplier)."""
    z, mu = sol.z, sol.multipliers
    stat = float(np.linalg.norm(p.H @ z + p.q - p.A.T @ mu)) if p.dim else 0.0
    if p.n_constraints == 0:
        return stat, 0.0, 0.0, 0.0
    slack = p.A @ z - p.lb
    return stat, float(max(0.0, -slack.min())), float(np.max(np.abs(mu * slack))), float(min(0.0, mu.min()))


def _lie_terms(sys, h, cfg, x):
    lf, lg = lie(sys, h, x)
    return lf, lg, np.asarray(cfg.k_d(x), dtype=float), float(cfg.alpha(h(x)))


def build_cbf_program(sys, h, cfg, x):
    """Decision u; min 1/2 |u - k_d|_Gamma^2 s.t. L_g h u >= -L_f h - alpha(h)."""
    lf, lg, kd, ah = _lie_terms(sys, h, cfg, x)
    G = cfg.gamma.matrix
    return QpProblem(G, -G @ kd, lg.reshape(1, -1), np.array([-lf - ah]))


def build_od_program(sys, h, cfg, x):
    """Decision (u, w); min 1/2 |u - k_d|_Gamma^2 + p/2 (w - theta_d)^2
    s.t. L_g h u + alpha(h) w >= -L_f h and w >= theta_d."""
    lf, lg, kd, ah = _lie_terms(sys, h, cfg, x)
    return od_program_from_terms(lf, lg, kd, ah, cfg.gamma.matrix, cfg.p, cfg.theta_d)


def od_program_from_terms(lf, lg, kd, alpha_h, gamma, p, theta_d):
    m = lg.size
    H = np.zeros((m + 1, m + 1))
    H[:m, :m] = gamma
    H[m, m] = p
    q = np.concatenate([-gamma @ kd, [-p * theta_d]])
    A = np.zeros((2, m + 1))
    A[0, :m] = lg
    A[0, m] = alpha_h
    A[1, m] = 1.0
    return QpProblem(H, q, A, np.array([-lf, theta_d]))


LEMMA_CASES = {(): 1, (0,): 2, (1,): 3, (0, 1): 4}


def proof_case(sol, tol=1e-10):
    """Classify an optimal-decay solution by which multipliers are positive.

    Case 1: none, case 2: barrier only, case 3: decay bound only,
    case 4: both.
    """
    positive = tuple(i for i in range(2) if sol.multipliers[i] > tol)
    return LEMMA_CASES[positive]
