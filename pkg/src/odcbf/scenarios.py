"""The double-integrator and satellite scenarios: plants, constraint
functions with analytic derivatives, presets and reference parameters."""

import importlib
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .barriers import ScalarField
from .errors import ConfigError
from .systems import ControlAffineSystem, SatelliteParams, circular_orbit_rate, double_integrator, satellite


@dataclass(frozen=True)
class ScenarioDefinition:
    """Everything a run needs besides the filter parameters."""

    system: ControlAffineSystem
    psi: ScalarField
    lf_psi_gradient: Optional[Callable] = None
    presets: dict = field(default_factory=dict)
    default_preset: Optional[str] = None
    experimental_presets: tuple = ()
    theta_fn_factory: Optional[Callable] = None  # (alpha1, alpha2) -> theta(x)
    h_override: Optional[ScalarField] = None  # custom scenarios may bypass the constructions


# double integrator -------------------------------------------------------

DI_PRESETS = {"nominal": (-0.1, 1.5), "outside": (0.5, 3.0)}


def di_psi():
    """psi(x) = 1 - x^2: stay inside |x| <= 1."""
    return ScalarField(lambda x: 1.0 - x[0] * x[0],
                       lambda x: np.array([-2.0 * x[0], 0.0]), name="psi")


def di_lf_psi_gradient(x):
    # L_f psi = -2 x x'
    return np.array([-2.0 * x[1], -2.0 * x[0]])


def di_theta_factory(alpha1, alpha2):
    """theta(x) = 4 x'^2 / alpha2(alpha1(1)) + 1."""
    denom = float(alpha2(alpha1(1.0)))

    def theta(x):
        return 4.0 * x[1] * x[1] / denom + 1.0

    return theta


def double_integrator_scenario():
    return ScenarioDefinition(
        system=double_integrator(),
        psi=di_psi(),
        lf_psi_gradient=di_lf_psi_gradient,
        presets=dict(DI_PRESETS),
        default_preset="nominal",
        theta_fn_factory=di_theta_factory,
    )


# satellite ----------------------------------------------------------------

SATELLITE_LITERAL_X0 = (0.6649, 2.034, 2.346, 8.097)


def satellite_psi(params):
    """psi = 1 - (r - 2R)^2 / (0.2 R)^2: radius inside [1.8R, 2.2R]."""
    R = params.R
    w2 = (0.2 * R) ** 2

    def value(x):
        return 1.0 - (x[0] - 2.0 * R) ** 2 / w2

    def gradient(x):
        return np.array([-2.0 * (x[0] - 2.0 * R) / w2, 0.0, 0.0, 0.0])

    return ScalarField(value, gradient, name="psi")


def satellite_lf_psi_gradient(params):
    R = params.R
    w2 = (0.2 * R) ** 2

    # L_f psi = psi'(r) r'
    def gradient(x):
        return np.array([-2.0 * x[2] / w2, 0.0, -2.0 * (x[0] - 2.0 * R) / w2, 0.0])

    return gradient


def satellite_presets(params):
    r, th = SATELLITE_LITERAL_X0[:2]
    return {
        "paper-literal": SATELLITE_LITERAL_X0,
        "consistent-orbit": (r, th, 0.0, circular_orbit_rate(params, r)),
    }


def satellite_scenario(params=None):
    params = params or SatelliteParams()
    return ScenarioDefinition(
        system=satellite(params),
        psi=satellite_psi(params),
        lf_psi_gradient=satellite_lf_psi_gradient(params),
        presets=satellite_presets(params),
        default_preset="consistent-orbit",
        experimental_presets=("paper-literal",),
    )


def load_custom(factory_path):
    """Import ``module:callable`` and call it to get a ScenarioDefinition."""
    mod_name, _, attr = factory_path.partition(":")
    if not mod_name or not attr:
        raise ConfigError("custom.factory", "expected 'module:callable'")
    try:
        factory = getattr(importlib.import_module(mod_name), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError("custom.factory", str(exc)) from None
    definition = factory()
    if not isinstance(definition, ScenarioDefinition):
        raise ConfigError("custom.factory", "factory must return a ScenarioDefinition")
    return definition
