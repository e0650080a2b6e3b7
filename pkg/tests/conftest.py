import numpy as np
import pytest

from odcbf.barriers import ClassKe, HocbfSpec, RecbfSpec, ScalarField, hocbf_build, recbf_build
from odcbf.filters import FilterConfig, zero_controller
from odcbf.numerics import SpdMatrix
from odcbf.scenarios import double_integrator_scenario, satellite_scenario
from odcbf.systems import ControlAffineSystem

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion_report():
    def emit(number, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return emit


def random_spd(rng, m, floor=0.1):
    L = rng.normal(size=(m, m))
    return L @ L.T + floor * np.eye(m)


def random_instance(rng):
    """A random control-affine system, barrier field, filter config and state."""
    n = int(rng.integers(1, 7))
    m = int(rng.integers(1, 5))
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, n))
    G0 = rng.normal(size=(n, m))
    G1 = 0.3 * rng.normal(size=(n, m))
    sys = ControlAffineSystem(
        n, m,
        lambda x: A @ x + 0.2 * np.tanh(B @ x),
        lambda x: G0 + G1 * np.cos(x.sum()),
        "random",
    )
    Q = rng.normal(size=(n, n))
    Q = Q + Q.T
    q = rng.normal(size=n)
    r0 = rng.normal()
    w = rng.normal(size=n)
    h = ScalarField(
        lambda x: 0.5 * x @ Q @ x + q @ x + r0 + 0.3 * np.sin(w @ x),
        lambda x: Q @ x + q + 0.3 * np.cos(w @ x) * w,
    )
    K = rng.normal(size=(m, n))
    cfg = FilterConfig(
        gamma=SpdMatrix(random_spd(rng, m)),
        p=float(10 ** rng.uniform(-1, 1)),
        theta_d=float(rng.uniform(0, 2)),
        alpha=ClassKe.linear(rng.uniform(0.1, 5.0)),
        k_d=lambda x: K @ x,
    )
    x = rng.normal(size=n)
    return sys, h, cfg, x


@pytest.fixture(scope="session")
def di():
    """Double integrator with the nominal parameters wired into both barrier constructions."""
    sc = double_integrator_scenario()
    a1 = ClassKe.linear(2.0)
    a2 = ClassKe.linear(2.0)
    hspec = HocbfSpec(sc.psi, a1, sc.lf_psi_gradient)
    rspec = RecbfSpec(sc.psi, a1, c1=1.0, eps=0.1, lf_psi_gradient=sc.lf_psi_gradient)
    ns = type("DI", (), {})()
    ns.scenario = sc
    ns.sys = sc.system
    ns.psi = sc.psi
    ns.alpha1 = a1
    ns.alpha2 = a2
    ns.hspec = hspec
    ns.rspec = rspec
    ns.h = hocbf_build(sc.system, hspec)
    ns.h_re = recbf_build(sc.system, rspec)
    ns.cfg = FilterConfig.default(1, a2)
    ns.theta_fn = sc.theta_fn_factory(a1, a2)
    return ns


@pytest.fixture(scope="session")
def sat():
    sc = satellite_scenario()
    a1 = ClassKe.linear(1 / 600)
    a2 = ClassKe.linear(1 / 200)
    ns = type("Sat", (), {})()
    ns.scenario = sc
    ns.sys = sc.system
    ns.psi = sc.psi
    ns.alpha1 = a1
    ns.alpha2 = a2
    ns.hspec = HocbfSpec(sc.psi, a1, sc.lf_psi_gradient)
    ns.rspec = RecbfSpec(sc.psi, a1, c1=271.44, eps=0.0141, lf_psi_gradient=sc.lf_psi_gradient)
    ns.h = hocbf_build(sc.system, ns.hspec)
    ns.h_re = recbf_build(sc.system, ns.rspec)
    ns.cfg = FilterConfig(SpdMatrix.identity(2), 1.0, 1.0, a2, zero_controller(2))
    return ns
