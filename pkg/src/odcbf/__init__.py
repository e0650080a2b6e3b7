"""Optimal-decay control barrier function safety filters.

Closed-form CBF and optimal-decay CBF quadratic-program filters for
control-affine systems, HOCBF/ReCBF barrier constructions, a sampling
verifier, an independent QP oracle and a closed-loop scenario runner.
"""

from ._jit import BACKEND
from .barriers import (ClassKe, HocbfSpec, LieData, RecbfSpec, ScalarField, hocbf_build, lie,
                       rect_gamma, rect_gamma_prime, recbf_build)
from .errors import (ConfigError, ContractViolation, DegenerateDenominator, DomainError,
                     FilterInfeasible, Infeasible, NotPositiveDefinite, NumericalFailure,
                     QpInfeasible, StiffnessFailure)
from .filters import (FilterConfig, FilterDiagnostics, FilterResult, cbf_filter, chi_gain,
                      converse_decay, fixed_theta_filter, lambda_gain, od_cbf_filter, phi_gain)
from .numerics import SpdMatrix, central_gradient, rk4_step, rkf45_integrate, solve_spd, weighted_norm
from .qp_oracle import QpProblem, QpSolution, build_cbf_program, build_od_program, solve_small_qp
from .sim import SimConfig, SimMetrics, Trajectory, metrics, simulate
from .systems import ControlAffineSystem, SatelliteParams, closed_loop_field, double_integrator, satellite

__version__ = "0.1.0"
