"""Scenario configuration: TOML tables of scalars and lists.

Every key is optional except ``scenario``; defaults for the two named
scenarios reproduce the reference parameter sets.  Unknown keys are
rejected so typos never silently fall back to a default.
"""

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

SCHEMA_VERSION = 1
SCENARIOS = ("double-integrator", "satellite", "custom")
METHODS = ("cbf", "od-cbf", "hocbf", "od-hocbf", "fixed-theta", "recbf", "od-recbf")
FATAL_CHECKS = ("abort", "safety", "decay", "verification")

# section -> key -> default (None means "no default / scenario decides")
_SCHEMA = {
    "": {"scenario": None, "method": "od-hocbf", "name": None},
    "barrier": {"alpha1": None, "alpha2": None, "theta_d": 1.0, "p": 1.0, "gamma": None,
                "eps": None, "c1": None},
    "system": {"mu": 2.346e-9, "R": 0.3097},
    "sim": {"preset": None, "x0": None, "integrator": None, "dt": None, "rel_tol": 1e-9,
            "abs_tol": 1e-12, "t_final": None, "max_step": None, "max_steps": None,
            "record_stride": 1},
    "verify": {"lower": None, "upper": None, "samples": None, "sampler": "grid", "n_samples": None,
               "seed": 0, "tol_h": None, "tol_g": None, "cbc_slopes": []},
    "checks": {"fatal": ["abort", "safety", "decay"], "tol_inv": 1e-6, "verify": False},
    "output": {"dir": "out"},
    "custom": {"factory": None},
}

SCENARIO_DEFAULTS = {
    "double-integrator": {
        "barrier": {"alpha1": 2.0, "alpha2": 2.0, "theta_d": 1.0, "p": 1.0, "gamma": [1.0],
                    "eps": 0.1, "c1": 1.0},
        "sim": {"preset": "nominal", "integrator": "rk4", "dt": 1e-3, "t_final": 10.0,
                "max_steps": 2_000_000},
        "verify": {"lower": [-1.2, -15.0], "upper": [1.2, 15.0], "samples": [121, 121],
                   "tol_h": 0.05, "cbc_slopes": [0.1, 1.0, 10.0, 100.0]},
    },
    "satellite": {
        "barrier": {"alpha1": 1.0 / 600.0, "alpha2": 1.0 / 200.0, "theta_d": 1.0, "p": 1.0,
                    "gamma": [1.0, 1.0], "eps": 0.0141, "c1": 271.44},
        "sim": {"preset": "consistent-orbit", "integrator": "rkf45", "dt": 1.0,
                "t_final": 172800.0, "max_step": 100.0, "max_steps": 50_000},
        "verify": {"lower": [0.5420, 0.0, -2e-4, 5e-5], "upper": [0.6968, 6.2832, 2e-4, 1.3e-4],
                   "samples": [81, 2, 81, 3], "tol_h": 1e-4},
    },
    "custom": {
        "barrier": {"alpha1": 1.0, "alpha2": 1.0, "eps": 0.1, "c1": 1.0},
        "sim": {"integrator": "rk4", "dt": 1e-3, "t_final": 1.0, "max_steps": 2_000_000},
    },
}


@dataclass
class ScenarioConfig:
    scenario: str
    method: str
    name: str
    alpha1: float
    alpha2: float
    theta_d: float
    p: float
    gamma: list
    eps: float
    c1: float
    mu: float
    R: float
    preset: object
    x0: object
    integrator: str
    dt: float
    rel_tol: float
    abs_tol: float
    t_final: float
    max_step: object
    max_steps: int
    record_stride: int
    verify_lower: object
    verify_upper: object
    verify_samples: object
    sampler: str
    n_samples: object
    seed: int
    tol_h: object
    tol_g: object
    cbc_slopes: list
    fatal: list
    tol_inv: float
    run_verify: bool
    out_dir: str
    custom_factory: object = None
    raw: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if k != "raw"}


def _load_text(source):
    if isinstance(source, Path) or (isinstance(source, str) and source.strip()
                                    and "\n" not in source and "=" not in source):
        path = Path(source)
        try:
            return path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from None
    return source


def _split(doc):
    flat = {}
    for key, val in doc.items():
        if isinstance(val, dict):
            if key not in _SCHEMA or key == "":
                raise ConfigError(key, "unknown section")
            for sub, v in val.items():
                if isinstance(v, dict):
                    raise ConfigError(f"{key}.{sub}", "nested tables are not allowed")
                if sub not in _SCHEMA[key]:
                    raise ConfigError(f"{key}.{sub}", "unknown key")
                flat[(key, sub)] = v
        else:
            if key not in _SCHEMA[""]:
                raise ConfigError(key, "unknown key")
            flat[("", key)] = val
    return flat


def _num(key, val, positive=False, nonneg=False, allow_none=False):
    if val is None and allow_none:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(key, f"expected a number, got {val!r}")
    val = float(val)
    if not math.isfinite(val):
        raise ConfigError(key, "must be finite")
    if positive and not val > 0.0:
        raise ConfigError(key, f"must be positive, got {val}")
    if nonneg and not val >= 0.0:
        raise ConfigError(key, f"must be nonnegative, got {val}")
    return val


def _vec(key, val, allow_none=True, positive=False):
    if val is None and allow_none:
        return None
    if not isinstance(val, list) or not val:
        raise ConfigError(key, f"expected a non-empty list, got {val!r}")
    return [_num(key, v, positive=positive) for v in val]


def parse_config(source, overrides=None):
    """Parse TOML text or a file path into a fully resolved ScenarioConfig.

    ``overrides`` maps dotted keys (``"sim.dt"``) to values applied after
    the file, as the CLI flags do.
    """
    text = _load_text(source)
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"invalid TOML: {exc}") from None
    flat = _split(doc)
    for dotted, val in (overrides or {}).items():
        section, _, key = dotted.rpartition(".")
        if key not in _SCHEMA.get(section, {}):
            raise ConfigError(dotted, "unknown key")
        flat[(section, key)] = val

    scenario = flat.get(("", "scenario"))
    if scenario is None:
        raise ConfigError("scenario", "missing required key")
    if scenario not in SCENARIOS:
        raise ConfigError("scenario", f"must be one of {SCENARIOS}, got {scenario!r}")

    merged = copy.deepcopy(_SCHEMA)
    for section, vals in SCENARIO_DEFAULTS[scenario].items():
        merged[section].update(copy.deepcopy(vals))
    for (section, key), val in flat.items():
        merged[section][key] = val
    return _resolve(merged, doc)


def _resolve(c, raw):
    top, bar, sy, sim, ver, chk = c[""], c["barrier"], c["system"], c["sim"], c["verify"], c["checks"]
    scenario, method = top["scenario"], top["method"]
    if method not in METHODS:
        raise ConfigError("method", f"must be one of {METHODS}, got {method!r}")
    if method == "fixed-theta" and scenario != "double-integrator":
        raise ConfigError("method", "fixed-theta is defined for the double-integrator scenario only")
    if scenario == "custom" and not c["custom"]["factory"]:
        raise ConfigError("custom.factory", "custom scenarios need a factory")

    integrator = sim["integrator"]
    if integrator not in ("rk4", "rkf45"):
        raise ConfigError("sim.integrator", f"must be rk4 or rkf45, got {integrator!r}")
    if not isinstance(sim["record_stride"], int) or sim["record_stride"] < 1:
        raise ConfigError("sim.record_stride", "must be an integer >= 1")
    max_steps = sim["max_steps"]
    if max_steps is not None and (not isinstance(max_steps, int) or max_steps < 1):
        raise ConfigError("sim.max_steps", "must be a positive integer")
    if ver["sampler"] not in ("grid", "sobol"):
        raise ConfigError("verify.sampler", "must be grid or sobol")
    fatal = chk["fatal"]
    if not isinstance(fatal, list) or any(f not in FATAL_CHECKS for f in fatal):
        raise ConfigError("checks.fatal", f"entries must be among {FATAL_CHECKS}")
    if not isinstance(chk["verify"], bool):
        raise ConfigError("checks.verify", "must be true or false")
    samples = ver["samples"]
    if samples is not None and (not isinstance(samples, list)
                                or any(not isinstance(k, int) or k < 2 for k in samples)):
        raise ConfigError("verify.samples", "must be a list of integers >= 2")
    lower, upper = _vec("verify.lower", ver["lower"]), _vec("verify.upper", ver["upper"])
    if lower is not None and upper is not None and (
            len(lower) != len(upper) or any(not l < u for l, u in zip(lower, upper))):
        raise ConfigError("verify.upper", "box needs lower < upper in every dimension")
    preset = sim["preset"]
    if preset is not None and not isinstance(preset, str):
        raise ConfigError("sim.preset", "must be a string")

    return ScenarioConfig(
        scenario=scenario,
        method=method,
        name=top["name"] or f"{scenario}_{method}",
        alpha1=_num("barrier.alpha1", bar["alpha1"], positive=True),
        alpha2=_num("barrier.alpha2", bar["alpha2"], positive=True),
        theta_d=_num("barrier.theta_d", bar["theta_d"], nonneg=True),
        p=_num("barrier.p", bar["p"], positive=True),
        gamma=_vec("barrier.gamma", bar["gamma"], positive=True),
        eps=_num("barrier.eps", bar["eps"], positive=True),
        c1=_num("barrier.c1", bar["c1"], positive=True),
        mu=_num("system.mu", sy["mu"], positive=True),
        R=_num("system.R", sy["R"], positive=True),
        preset=preset,
        x0=_vec("sim.x0", sim["x0"]),
        integrator=integrator,
        dt=_num("sim.dt", sim["dt"], positive=True),
        rel_tol=_num("sim.rel_tol", sim["rel_tol"], positive=True),
        abs_tol=_num("sim.abs_tol", sim["abs_tol"], positive=True),
        t_final=_num("sim.t_final", sim["t_final"], positive=True),
        max_step=_num("sim.max_step", sim["max_step"], positive=True, allow_none=True),
        max_steps=max_steps or 2_000_000,
        record_stride=sim["record_stride"],
        verify_lower=lower,
        verify_upper=upper,
        verify_samples=samples,
        sampler=ver["sampler"],
        n_samples=ver["n_samples"],
        seed=int(ver["seed"]),
        tol_h=_num("verify.tol_h", ver["tol_h"], positive=True, allow_none=True),
        tol_g=_num("verify.tol_g", ver["tol_g"], positive=True, allow_none=True),
        cbc_slopes=_vec("verify.cbc_slopes", ver["cbc_slopes"] or None, positive=True) or [],
        fatal=list(fatal),
        tol_inv=_num("checks.tol_inv", chk["tol_inv"], positive=True),
        run_verify=chk["verify"],
        out_dir=str(c["output"]["dir"]),
        custom_factory=c["custom"]["factory"],
        raw=raw,
    )
