import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odcbf.barriers import ClassKe, ScalarField, lie
from odcbf.errors import ContractViolation, DegenerateDenominator, DomainError, FilterInfeasible
from odcbf.filters import (
    FilterConfig,
    bind,
    cbf_filter,
    cbf_filter_batch,
    chi_gain,
    converse_decay,
    fixed_theta_filter,
    lambda_gain,
    od_cbf_filter,
    od_cbf_filter_batch,
    phi_gain,
)
from odcbf.numerics import SpdMatrix
from odcbf.qp_oracle import QpProblem, build_cbf_program, build_od_program, od_program_from_terms, solve_small_qp
from odcbf.systems import ControlAffineSystem, closed_loop_field

from conftest import random_instance

PROBE = np.array([0.001, 1.5])

# Reference values at PROBE for the double-integrator HOCBF with the nominal
# parameters, computed with the active-set QP oracle and confirmed by hand:
# h = 1.996998, L_f h = -4.506, L_g h = -0.002, alpha2(h) = 3.993996.
PROBE_A = -0.512004
PROBE_CBF_GAIN = 128001.0
PROBE_CBF_U = -256.002
PROBE_OD_GAIN = 0.032096523425693704
PROBE_OD_U = -6.41930469e-05
PROBE_OD_THETA = 1.128193386176127

# Largest adjacent-pair difference quotient of the OD-HOCBF input on the
# 200x200 grid over [-0.9, 0.9] x [-3, 3] intersected with C.
LIPSCHITZ_BASELINE = 595.68


class TestGains:
    def test_lambda(self):
        assert lambda_gain(1.0, 2.0) == 0.0
        assert lambda_gain(-3.0, 0.0) == 0.0
        assert lambda_gain(-1.0, 2.0) == 0.25

    def test_lambda_against_oracle(self):
        # one-constraint program min 1/2 u^2 s.t. 2u >= 1
        z = solve_small_qp(od_free(2.0, 1.0)).z[0]
        assert lambda_gain(-1.0, 2.0) * 2.0 == pytest.approx(z, abs=1e-15)

    def test_phi(self):
        assert phi_gain(5.0, 0.0, -1.0, 1.0) == 0.0
        assert phi_gain(3.0, 2.0, 0.5, 1.0) == 0.0
        assert phi_gain(-2.0, 1.0, 1.0, 1.0) == 1.0

    def test_chi(self):
        assert chi_gain(4.0, 0.3, 2.0, 1.0) == 0.0
        assert chi_gain(-2.0, 1.0, -0.5, 1.0) == 0.0
        assert chi_gain(-2.0, 1.0, 1.0, 1.0) == 1.0

    def test_phi_chi_against_oracle(self):
        sol = solve_small_qp(od_program_from_terms(-2.0, np.array([1.0]), np.zeros(1), 1.0,
                                                   np.eye(1), 1.0, 0.0))
        assert sol.z[0] == pytest.approx(phi_gain(-2.0, 1.0, 1.0, 1.0) * 1.0, abs=1e-14)
        assert sol.z[1] == pytest.approx(chi_gain(-2.0, 1.0, 1.0, 1.0), abs=1e-14)

    @pytest.mark.parametrize("c", [0.0, -1.0, 1e-13])
    def test_degenerate_denominator(self, c):
        with pytest.raises(DegenerateDenominator):
            phi_gain(-1.0, 0.0, c, 1.0)
        with pytest.raises(DegenerateDenominator):
            chi_gain(-1.0, 1e-13, c, 1.0)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ContractViolation):
            lambda_gain(1.0, -1.0)
        with pytest.raises(ContractViolation):
            phi_gain(1.0, 1.0, 1.0, 0.0)


def od_free(lg, lb):
    return QpProblem(np.eye(1), np.zeros(1), np.array([[lg]]), np.array([lb]))


@settings(max_examples=300, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(1e-6, 1e3), st.floats(-1e3, 1e3), st.floats(0.1, 10.0))
def test_gains_nonnegative_and_consistent(a, b, c, p):
    phi = phi_gain(a, b, c, p)
    chi = chi_gain(a, b, c, p)
    assert phi >= 0.0 and chi >= 0.0
    if a >= 0:
        assert phi == 0.0 and chi == 0.0
    else:
        # the constraint a + phi b^2 + chi p c >= 0 holds at the solution (tight)
        assert a + phi * b * b + chi * p * c == pytest.approx(0.0, abs=1e-9 * (1 + abs(a)))


class TestProbeState:
    def test_standard_filter_blows_up(self, di):
        r = cbf_filter(di.sys, di.h, di.cfg, PROBE)
        assert r.diagnostics.a == pytest.approx(PROBE_A, abs=1e-12)
        assert r.diagnostics.b_norm == pytest.approx(0.002, abs=1e-15)
        assert r.diagnostics.gain == pytest.approx(PROBE_CBF_GAIN, rel=1e-10)
        assert r.u[0] == pytest.approx(PROBE_CBF_U, rel=1e-10)
        assert r.theta == 1.0
        # |u| = |a| / |b| grows like 1/|x| and passes 1e3 once |x| < 2.56e-4
        closer = cbf_filter(di.sys, di.h, di.cfg, np.array([1e-4, 1.5]))
        assert abs(closer.u[0]) > 1e3

    def test_optimal_decay_filter_stays_small(self, di):
        r = od_cbf_filter(di.sys, di.h, di.cfg, PROBE)
        assert r.diagnostics.a == pytest.approx(PROBE_A, abs=1e-12)
        assert r.diagnostics.c == pytest.approx(3.993996, abs=1e-12)
        assert r.diagnostics.gain == pytest.approx(PROBE_OD_GAIN, rel=1e-10)
        assert r.u[0] == pytest.approx(PROBE_OD_U, rel=1e-8)
        assert r.theta == pytest.approx(PROBE_OD_THETA, rel=1e-12)

    def test_oracle_reproduces_probe(self, di):
        sol = solve_small_qp(build_od_program(di.sys, di.h, di.cfg, PROBE))
        r = od_cbf_filter(di.sys, di.h, di.cfg, PROBE)
        assert abs(sol.z[0] - r.u[0]) <= 1e-6 and abs(sol.z[1] - r.theta) <= 1e-6
        sol = solve_small_qp(build_cbf_program(di.sys, di.h, di.cfg, PROBE))
        assert sol.z[0] == pytest.approx(PROBE_CBF_U, rel=1e-9)


class TestOracleEquivalence:
    def test_random_instances(self):
        rng = np.random.default_rng(30)
        for _ in range(300):
            sys, h, cfg, x = random_instance(rng)
            r = od_cbf_filter(sys, h, cfg, x)
            sol = solve_small_qp(build_od_program(sys, h, cfg, x))
            np.testing.assert_allclose(r.u, sol.z[:-1], rtol=0, atol=1e-6)
            assert abs(r.theta - sol.z[-1]) <= 1e-6
            s = cbf_filter(sys, h, cfg, x)
            sol = solve_small_qp(build_cbf_program(sys, h, cfg, x))
            np.testing.assert_allclose(s.u, sol.z, rtol=0, atol=1e-6)

    def test_fixed_theta_zero_is_nagumo(self, di):
        zero = lambda x: 0.0
        for x in np.random.default_rng(31).uniform([-1, -3], [1, 3], size=(50, 2)):
            if abs(x[0]) < 1e-3:
                continue
            r = fixed_theta_filter(di.sys, di.h, di.cfg, zero, x)
            lf, lg = lie(di.sys, di.h, x)
            # min 1/2 u^2 s.t. L_f h + L_g h u >= 0
            sol = solve_small_qp(QpProblem(np.eye(1), np.zeros(1), lg.reshape(1, 1), np.array([-lf])))
            assert abs(r.u[0] - sol.z[0]) <= 1e-6
            assert r.diagnostics.slack >= -1e-9


class TestInvariants:
    def test_slack_and_complementarity(self):
        rng = np.random.default_rng(32)
        for _ in range(300):
            sys, h, cfg, x = random_instance(rng)
            r = od_cbf_filter(sys, h, cfg, x)
            d = r.diagnostics
            assert d.slack >= -1e-9 * (1 + abs(d.a))
            assert d.gain >= 0.0
            assert r.theta >= cfg.theta_d - 1e-12
            if d.slack > 1e-7:
                np.testing.assert_allclose(r.u, cfg.k_d(x), rtol=0, atol=1e-9)
                assert abs(r.theta - cfg.theta_d) <= 1e-9

    def test_inactive_region_returns_nominal(self):
        rng = np.random.default_rng(33)
        hits = 0
        for _ in range(200):
            sys, h, cfg, x = random_instance(rng)
            r = od_cbf_filter(sys, h, cfg, x)
            if r.diagnostics.a >= 0:
                hits += 1
                assert np.array_equal(r.u, cfg.k_d(x))
                assert r.theta == cfg.theta_d
            s = cbf_filter(sys, h, cfg, x)
            if s.diagnostics.a >= 0:
                assert np.array_equal(s.u, cfg.k_d(x))
            f = fixed_theta_filter(sys, h, cfg, lambda x: 0.5, x)
            if f.diagnostics.a >= 0:
                assert np.array_equal(f.u, cfg.k_d(x))
        assert hits > 20

    def test_fixed_theta_one_equals_standard(self):
        rng = np.random.default_rng(34)
        for _ in range(100):
            sys, h, cfg, x = random_instance(rng)
            a = cbf_filter(sys, h, cfg, x)
            b = fixed_theta_filter(sys, h, cfg, lambda x: 1.0, x)
            np.testing.assert_array_equal(a.u, b.u)
            assert a.theta == b.theta == 1.0

    def test_predefined_decay_on_center_line(self, di):
        for v in np.linspace(-5, 5, 41):
            x = np.array([0.0, v])
            theta = di.theta_fn(x)
            lf = float(di.h.grad(x) @ di.sys.drift(x))
            assert lf == pytest.approx(-2 * v * v, abs=1e-12)
            assert di.h(x) == 2.0 and di.alpha2(di.h(x)) == 4.0
            assert lf > -theta * 4.0
            r = fixed_theta_filter(di.sys, di.h, di.cfg, di.theta_fn, x)
            assert r.u[0] == 0.0 and r.theta == theta

    def test_rejects_negative_theta(self, di):
        with pytest.raises(ContractViolation):
            fixed_theta_filter(di.sys, di.h, di.cfg, lambda x: -1.0, np.array([0.2, 0.1]))


class TestInfeasibility:
    def setup_method(self):
        self.sys = ControlAffineSystem(1, 1, lambda x: np.array([-1.0]), lambda x: np.array([[0.0]]))
        self.h = ScalarField(lambda x: x[0], lambda x: np.array([1.0]))

    def cfg(self, alpha_slope):
        return FilterConfig.default(1, ClassKe.linear(alpha_slope))

    def test_standard_filter_infeasible(self):
        with pytest.raises(FilterInfeasible) as info:
            cbf_filter(self.sys, self.h, self.cfg(1.0), np.array([0.5]))
        assert info.value.a == pytest.approx(-0.5)

    def test_od_filter_infeasible_outside(self):
        # c < 0 and b = 0: no decay rate helps
        with pytest.raises(FilterInfeasible):
            od_cbf_filter(self.sys, self.h, self.cfg(1.0), np.array([-0.5]))

    def test_od_filter_feasible_inside(self):
        # b = 0 but c > 0: the decay rate absorbs the deficit
        r = od_cbf_filter(self.sys, self.h, self.cfg(1.0), np.array([0.5]))
        assert r.u[0] == 0.0
        assert r.theta == pytest.approx(2.0, abs=1e-12)
        assert r.diagnostics.slack == pytest.approx(0.0, abs=1e-12)


class TestConditioning:
    def test_probe_grid_contrast(self, di):
        grid = np.column_stack([np.linspace(-0.01, 0.01, 201), np.full(201, 1.5)])
        od = od_cbf_filter_batch(di.sys, di.h, di.cfg, grid)
        std = cbf_filter_batch(di.sys, di.h, di.cfg, grid)
        assert np.all(od.status == 0)
        assert np.max(np.abs(od.u)) <= 10.0
        assert np.max(np.abs(std.u)) > 1e3
        denom_od = od.b_norm**2 + di.cfg.p * np.maximum(od.c, 0.0) ** 2
        assert np.min(denom_od) >= 1.0
        assert np.min(std.b_norm**2) < 1e-5

    def test_lipschitz_regression(self, di):
        xs = np.linspace(-0.9, 0.9, 200)
        vs = np.linspace(-3.0, 3.0, 200)
        X = np.stack(np.meshgrid(xs, vs, indexing="ij"), -1).reshape(-1, 2)
        res = od_cbf_filter_batch(di.sys, di.h, di.cfg, X)
        assert np.all(res.status == 0)
        U = res.u[:, 0].reshape(200, 200)
        inside = np.array([di.h(x) >= 0 for x in X]).reshape(200, 200)
        quotients = []
        for axis, step in ((0, xs[1] - xs[0]), (1, vs[1] - vs[0])):
            dU = np.abs(np.diff(U, axis=axis)) / step
            both = (inside[:-1] & inside[1:]) if axis == 0 else (inside[:, :-1] & inside[:, 1:])
            quotients.append(dU[both].max())
        worst = max(quotients)
        assert np.isfinite(worst)
        assert worst <= 10 * LIPSCHITZ_BASELINE


class TestBatch:
    def test_batch_matches_pointwise(self):
        rng = np.random.default_rng(35)
        for _ in range(30):
            sys, h, cfg, _ = random_instance(rng)
            X = rng.normal(size=(20, sys.n))
            od = od_cbf_filter_batch(sys, h, cfg, X)
            std = cbf_filter_batch(sys, h, cfg, X)
            for i, x in enumerate(X):
                r = od_cbf_filter(sys, h, cfg, x)
                np.testing.assert_allclose(od.u[i], r.u, rtol=1e-12, atol=1e-14)
                assert od.theta[i] == pytest.approx(r.theta, rel=1e-12)
                np.testing.assert_allclose(std.u[i], cbf_filter(sys, h, cfg, x).u, rtol=1e-12, atol=1e-14)

    def test_bind(self, di):
        x = np.array([0.2, 0.4])
        assert np.array_equal(bind("od", di.sys, di.h, di.cfg)(x).u, od_cbf_filter(di.sys, di.h, di.cfg, x).u)
        with pytest.raises(ContractViolation):
            bind("fixed-theta", di.sys, di.h, di.cfg)
        with pytest.raises(ContractViolation):
            bind("nope", di.sys, di.h, di.cfg)


class TestConverseDecay:
    def test_zero_on_boundary(self, di):
        x = np.array([1.0, 0.0])  # h = 0
        F = closed_loop_field(di.sys, lambda x: np.array([-3.0]))
        assert di.h(x) == 0.0
        assert converse_decay(F, di.h, di.alpha2, x) == 0.0

    def test_zero_when_flow_increases_h(self, di):
        x = np.array([0.0, 0.0])
        F = lambda x: np.array([0.0, 0.0])
        assert converse_decay(F, di.h, di.alpha2, x) == 0.0

    def test_tight_example(self):
        h = ScalarField(lambda x: x[0], lambda x: np.array([1.0]))
        alpha = ClassKe.linear(2.0)
        F = lambda x: np.array([-2.0])
        x = np.array([2.0])  # alpha(h) = 4, L_F h = -2
        theta = converse_decay(F, h, alpha, x)
        assert theta == 0.5
        assert -theta * alpha(h(x)) == -2.0

    def test_outside_set_rejected(self, di):
        with pytest.raises(DomainError):
            converse_decay(lambda x: np.zeros(2), di.h, di.alpha2, np.array([2.0, 0.0]))

    def test_filter_closed_loop_satisfies_bound(self, di):
        F = closed_loop_field(di.sys, lambda x: od_cbf_filter(di.sys, di.h, di.cfg, x).u)
        for x in np.random.default_rng(36).uniform([-0.9, -3], [0.9, 3], size=(200, 2)):
            hx = di.h(x)
            if hx < 0:
                continue
            theta = converse_decay(F, di.h, di.alpha2, x)
            assert np.isfinite(theta) and theta >= 0
            lfh = float(di.h.grad(x) @ F(x))
            assert lfh + theta * di.alpha2(hx) >= -1e-8


def test_filter_config_validation(di):
    with pytest.raises(ContractViolation):
        FilterConfig(SpdMatrix.identity(1), -1.0, 1.0, di.alpha2, lambda x: np.zeros(1))
    with pytest.raises(ContractViolation):
        FilterConfig(SpdMatrix.identity(1), 1.0, -0.5, di.alpha2, lambda x: np.zeros(1))
    cfg = FilterConfig([2.0], 1.0, 0.0, di.alpha2, lambda x: np.zeros(1))
    assert isinstance(cfg.gamma, SpdMatrix)
