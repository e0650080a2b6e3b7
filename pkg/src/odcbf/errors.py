"""Exception hierarchy shared by every odcbf module."""

import numpy as np


class OdcbfError(Exception):
    """Base class for all odcbf errors."""


class ContractViolation(OdcbfError, ValueError):
    """An argument broke a documented precondition (shape, sign, ...)."""


class NotPositiveDefinite(OdcbfError, ValueError):
    """Cholesky factorization of a supposedly SPD matrix failed."""


class DomainError(OdcbfError, ValueError):
    """A function was evaluated outside its domain."""


class NumericalFailure(OdcbfError, ArithmeticError):
    """A non-finite value appeared during a computation.

    ``t`` and ``state`` locate the failure when it happens inside an
    integrator; both may be ``None``.
    """

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = None if state is None else np.array(state, dtype=float)
        self.trajectory = None


class StiffnessFailure(NumericalFailure):
    """Adaptive step size collapsed below the allowed floor."""


class Infeasible(OdcbfError):
    """A quadratic program has an empty feasible set."""


class FilterInfeasible(Infeasible):
    """A safety filter cannot satisfy its barrier constraint at ``x``."""

    def __init__(self, message, x=None, a=None, b_norm=None, c=None, t=None):
        super().__init__(message)
        self.x = None if x is None else np.array(x, dtype=float)
        self.a = a
        self.b_norm = b_norm
        self.c = c
        self.t = t
        self.trajectory = None


class DegenerateDenominator(FilterInfeasible):
    """b = 0, c <= 0 and a < 0: the optimal-decay program is infeasible."""


class QpInfeasible(Infeasible):
    """The oracle proved the constraint set empty."""


class ConfigError(OdcbfError, ValueError):
    """Bad scenario configuration; ``key`` names the offending entry."""

    def __init__(self, key, message=None):
        super().__init__(f"{key}: {message}" if message else key)
        self.key = key
