"""Closed-form gain kernels for the CBF and optimal-decay filters.

Scalar kernels are compiled with numba when available.  Batch kernels have
two implementations, an explicit loop (compiled) and a vectorized numpy
version, and ``BACKEND`` picks between them.  Status codes: 0 feasible,
1 infeasible (b = 0, c <= 0, a < 0 in exact arithmetic).
"""

import numpy as np

from ._jit import BACKEND, USE_NUMBA, njit

EPS_B = 1e-12

FEASIBLE = 0
INFEASIBLE = 1


@njit
def cbf_gain(a, b_norm, eps_b):
    """Standard CBF-QP multiplier ReLU(-a)/b^2 and status code."""
    if b_norm <= eps_b:
        if a < 0.0:
            return 0.0, 1
        return 0.0, 0
    if a >= 0.0:
        return 0.0, 0
    return -a / (b_norm * b_norm), 0


@njit
def od_gains(a, b_norm, c, p, eps_b):
    """Input gain phi, decay gain chi and status for the optimal-decay QP."""
    if b_norm <= eps_b and c <= 0.0:
        if a < 0.0:
            return 0.0, 0.0, 1
        return 0.0, 0.0, 0
    if a >= 0.0:
        return 0.0, 0.0, 0
    if b_norm <= eps_b and c <= eps_b:
        return 0.0, 0.0, 1
    relu_c = c if c > 0.0 else 0.0
    b2 = b_norm * b_norm
    phi = -a / (b2 + p * relu_c * relu_c)
    chi = -a * relu_c / (b2 + p * c * c)
    return phi, chi, 0


@njit
def _cbf_gain_loop(a, b_norm, eps_b):
    n = a.shape[0]
    gain = np.empty(n)
    status = np.empty(n, dtype=np.int8)
    for i in range(n):
        g, s = cbf_gain(a[i], b_norm[i], eps_b)
        gain[i] = g
        status[i] = s
    return gain, status


@njit
def _od_gains_loop(a, b_norm, c, p, eps_b):
    n = a.shape[0]
    phi = np.empty(n)
    chi = np.empty(n)
    status = np.empty(n, dtype=np.int8)
    for i in range(n):
        f, x, s = od_gains(a[i], b_norm[i], c[i], p, eps_b)
        phi[i] = f
        chi[i] = x
        status[i] = s
    return phi, chi, status


def _cbf_gain_numpy(a, b_norm, eps_b):
    tiny = b_norm <= eps_b
    status = (tiny & (a < 0.0)).astype(np.int8)
    active = ~tiny & (a < 0.0)
    gain = np.zeros_like(a)
    gain[active] = -a[active] / b_norm[active] ** 2
    return gain, status


def _od_gains_numpy(a, b_norm, c, p, eps_b):
    tiny = b_norm <= eps_b
    infeasible = tiny & (c <= eps_b) & (a < 0.0)
    active = (a < 0.0) & ~infeasible & ~(tiny & (c <= 0.0))
    relu_c = np.maximum(c, 0.0)
    b2 = b_norm**2
    phi = np.zeros_like(a)
    chi = np.zeros_like(a)
    neg_a = -a[active]
    phi[active] = neg_a / (b2[active] + p * relu_c[active] ** 2)
    chi[active] = neg_a * relu_c[active] / (b2[active] + p * c[active] ** 2)
    return phi, chi, infeasible.astype(np.int8)


def _as_1d(v):
    return np.ascontiguousarray(np.atleast_1d(np.asarray(v, dtype=np.float64)))


def cbf_gain_batch(a, b_norm, eps_b=EPS_B, backend=None):
    """Vectorized :func:`cbf_gain`; returns ``(gain, status)`` arrays."""
    a, b_norm = _as_1d(a), _as_1d(b_norm)
    if (backend or BACKEND) == "numba" and USE_NUMBA:
        return _cbf_gain_loop(a, b_norm, eps_b)
    return _cbf_gain_numpy(a, b_norm, eps_b)


def od_gains_batch(a, b_norm, c, p, eps_b=EPS_B, backend=None):
    """Vectorized :func:`od_gains`; returns ``(phi, chi, status)`` arrays."""
    a, b_norm, c = _as_1d(a), _as_1d(b_norm), _as_1d(c)
    if (backend or BACKEND) == "numba" and USE_NUMBA:
        return _od_gains_loop(a, b_norm, c, float(p), eps_b)
    return _od_gains_numpy(a, b_norm, c, float(p), eps_b)
