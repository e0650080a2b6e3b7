"""Scenario wiring, simulation runs, verification bundles and output files."""

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import verifier
from .barriers import ClassKe, HocbfSpec, RecbfSpec, check_relative_degree, hocbf_build, recbf_build
from .config import SCHEMA_VERSION
from .errors import ConfigError, ContractViolation, FilterInfeasible, NumericalFailure
from .filters import FilterConfig, bind, zero_controller
from .numerics import SpdMatrix
from .scenarios import double_integrator_scenario, load_custom, satellite_scenario
from .sim import SimConfig, metrics, simulate
from .systems import SatelliteParams

FAMILY = {"cbf": "raw", "od-cbf": "raw", "hocbf": "hocbf", "od-hocbf": "hocbf",
          "fixed-theta": "hocbf", "recbf": "recbf", "od-recbf": "recbf"}
FILTER_KIND = {"cbf": "cbf", "hocbf": "cbf", "recbf": "cbf", "od-cbf": "od", "od-hocbf": "od",
               "od-recbf": "od", "fixed-theta": "fixed-theta"}


@dataclass
class Wiring:
    definition: object
    system: object
    psi: object
    h: object
    alpha1: ClassKe
    alpha2: ClassKe
    filter_cfg: FilterConfig
    filter_fn: object
    theta_fn: object = None
    hocbf_spec: Optional[HocbfSpec] = None
    recbf_spec: Optional[RecbfSpec] = None


def scenario_definition(cfg):
    if cfg.scenario == "double-integrator":
        return double_integrator_scenario()
    if cfg.scenario == "satellite":
        return satellite_scenario(SatelliteParams(cfg.mu, cfg.R))
    return load_custom(cfg.custom_factory)


def _check_states(cfg, n, count=8):
    if cfg.verify_lower is None:
        return None
    rng = np.random.default_rng(cfg.seed)
    lo, hi = np.array(cfg.verify_lower), np.array(cfg.verify_upper)
    if lo.size != n:
        raise ConfigError("verify.lower", f"box has {lo.size} dimensions, system has n={n}")
    return lo + rng.random((count, n)) * (hi - lo)


def build(cfg):
    """Assemble system, constraint, barrier and filter for a scenario config."""
    d = scenario_definition(cfg)
    sys = d.system
    a1, a2 = ClassKe.linear(cfg.alpha1), ClassKe.linear(cfg.alpha2)
    gamma = cfg.gamma if cfg.gamma is not None else [1.0] * sys.m
    if len(gamma) != sys.m:
        raise ConfigError("barrier.gamma", f"needs {sys.m} diagonal entries, got {len(gamma)}")
    fcfg = FilterConfig(SpdMatrix(np.diag(gamma)), cfg.p, cfg.theta_d, a2, zero_controller(sys.m))
    family = FAMILY[cfg.method]
    states = _check_states(cfg, sys.n)
    hspec = rspec = None
    if d.h_override is not None:
        h = d.h_override
    elif family == "raw":
        h = d.psi
    else:
        if states is not None:
            try:
                check_relative_degree(sys, d.psi, states)
            except ContractViolation as exc:
                raise ConfigError("method", f"{cfg.method} needs a relative-degree-2 constraint: {exc}") from None
        if family == "hocbf":
            hspec = HocbfSpec(d.psi, a1, d.lf_psi_gradient)
            h = hocbf_build(sys, hspec, check_states=states)
        else:
            rspec = RecbfSpec(d.psi, a1, cfg.c1, cfg.eps, d.lf_psi_gradient)
            h = recbf_build(sys, rspec, check_states=states)
    theta_fn = None
    if cfg.method == "fixed-theta":
        if d.theta_fn_factory is None:
            raise ConfigError("method", "scenario defines no predefined decay rate")
        theta_fn = d.theta_fn_factory(a1, a2)
    fn = bind(FILTER_KIND[cfg.method], sys, h, fcfg, theta_fn)
    return Wiring(d, sys, d.psi, h, a1, a2, fcfg, fn, theta_fn, hspec, rspec)


def initial_state(cfg, d):
    if cfg.x0 is not None:
        x0 = tuple(cfg.x0)
    else:
        preset = cfg.preset or d.default_preset
        if preset not in d.presets:
            raise ConfigError("sim.preset", f"unknown preset {preset!r}; choose from {sorted(d.presets)}")
        x0 = tuple(d.presets[preset])
    if len(x0) != d.system.n:
        raise ConfigError("sim.x0", f"needs {d.system.n} entries, got {len(x0)}")
    return x0


def sim_config(cfg, x0):
    return SimConfig(x0=x0, t_final=cfg.t_final, integrator=cfg.integrator, dt=cfg.dt,
                     rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol, max_step=cfg.max_step,
                     max_steps=cfg.max_steps, record_stride=cfg.record_stride)


# verification ---------------------------------------------------------------

@dataclass
class VerificationBundle:
    entries: list = field(default_factory=list)  # (report, fatal)
    path: Optional[str] = None

    @property
    def ok(self):
        return all(r.passed for r, fatal in self.entries if fatal)

    def to_dict(self):
        return [{**r.to_dict(), "fatal": fatal} for r, fatal in self.entries]

    def to_text(self):
        return "\n".join(("" if fatal else "(informational) ") + r.to_text() for r, fatal in self.entries)


def _box(cfg):
    if cfg.verify_lower is None or cfg.verify_upper is None:
        raise ConfigError("verify.lower", "verification needs a box")
    return verifier.RegionBox(cfg.verify_lower, cfg.verify_upper,
                              samples_per_dim=cfg.verify_samples or 21,
                              n_samples=cfg.n_samples, sampler=cfg.sampler, seed=cfg.seed)


def run_verifications(cfg, w):
    box = _box(cfg)
    sys, h, method = w.system, w.h, cfg.method
    family = FAMILY[method]
    bundle = VerificationBundle()
    add = bundle.entries.append
    add((verifier.check_regular_value(w.psi, box, cfg.tol_h), True))
    if family != "raw":
        add((verifier.check_regular_value(h, box, cfg.tol_h), True))
    if FILTER_KIND[method] == "od":
        add((verifier.check_od_cbc(sys, h, box, cfg.tol_h, cfg.tol_g), True))
    else:
        add((verifier.check_cbc(sys, h, w.alpha2, box, cfg.tol_g), method != "fixed-theta"))
    if w.hocbf_spec is not None:
        add((verifier.check_od_hocbf(sys, w.hocbf_spec, box, cfg.tol_h, cfg.tol_g), method != "hocbf"))
    if w.recbf_spec is not None:
        add((verifier.check_od_recbc(sys, w.recbf_spec, box, cfg.tol_h, cfg.tol_g), method != "recbf"))
    for k in cfg.cbc_slopes:
        add((verifier.check_cbc(sys, h, ClassKe.linear(k), box, cfg.tol_g), False))
    return bundle


def verify_command(cfg, write=True):
    """Run every check applicable to the configured method; write a JSON bundle."""
    w = build(cfg)
    bundle = run_verifications(cfg, w)
    if write:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{cfg.name}.verify.json"
        _write_json(path, {"schema_version": SCHEMA_VERSION, "kind": "verification",
                           "scenario": cfg.scenario, "method": cfg.method, "ok": bundle.ok,
                           "checks": bundle.to_dict()})
        bundle.path = str(path)
    return bundle


# output files ---------------------------------------------------------------

def trajectory_header(n, m):
    return ["t", *(f"x{i + 1}" for i in range(n)), *(f"u{j + 1}" for j in range(m)), "theta", "h", "psi"]


def write_trajectory_csv(tr, path):
    """Header plus one row per recorded step, 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n, m = tr.x.shape[1], tr.u.shape[1]
    lines = [",".join(trajectory_header(n, m))]
    for i in range(len(tr)):
        vals = (tr.t[i], *tr.x[i], *tr.u[i], tr.theta[i], tr.h[i], tr.psi[i])
        lines.append(",".join(f"{v:.17g}" for v in vals))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_trajectory_csv(path):
    """Inverse of :func:`write_trajectory_csv`: (header, float array)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    return header, np.array(rows).reshape(-1, len(header))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer, np.bool_)):
        return obj.item()
    return obj


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


# runs -------------------------------------------------------------------------

@dataclass
class RunReport:
    config: dict
    metrics: Optional[dict]
    checks: dict
    verification: list
    outputs: dict
    duration_s: float
    error: Optional[str] = None
    notes: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c["passed"] for c in self.checks.values() if c["fatal"])

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, "kind": "run", "ok": self.ok, "config": self.config,
                "metrics": self.metrics, "checks": self.checks, "verification": self.verification,
                "outputs": self.outputs, "duration_s": self.duration_s, "error": self.error,
                "notes": self.notes}

    def to_text(self):
        lines = [f"run {self.config['name']}: {'OK' if self.ok else 'FAILED'} ({self.duration_s:.2f} s)"]
        if self.error:
            lines.append(f"  aborted: {self.error}")
        if self.metrics:
            lines += [f"  {k} = {v}" for k, v in self.metrics.items()]
        for name, c in self.checks.items():
            tag = "PASS" if c["passed"] else "FAIL"
            lines.append(f"  [{tag}]{'' if c['fatal'] else ' (informational)'} {name}: {c['detail']}")
        lines += [f"  note: {n}" for n in self.notes]
        lines += [f"  wrote {k}: {v}" for k, v in self.outputs.items()]
        return "\n".join(lines)


def run_scenario(cfg, write=True):
    """Build, optionally verify, simulate, check and write outputs for one scenario."""
    start = time.perf_counter()
    w = build(cfg)
    d = w.definition
    x0 = initial_state(cfg, d)
    notes, checks = [], {}
    preset = None if cfg.x0 is not None else (cfg.preset or d.default_preset)
    if preset in d.experimental_presets:
        notes.append(f"preset {preset!r} is experimental: its values are not acceptance targets")

    verification = []
    if cfg.run_verify:
        bundle = run_verifications(cfg, w)
        verification = bundle.to_dict()
        required = [r.passed for r, fatal in bundle.entries if fatal]
        checks["verification"] = {"passed": bundle.ok, "fatal": "verification" in cfg.fatal,
                                  "detail": f"{sum(required)}/{len(required)} required checks passed, "
                                            f"{len(bundle.entries) - len(required)} informational"}

    error = None
    try:
        tr = simulate(w.system, w.h, w.psi, w.filter_fn, sim_config(cfg, x0))
    except (FilterInfeasible, NumericalFailure) as exc:
        tr = exc.trajectory
        error = f"{type(exc).__name__} at t={exc.t}: {exc}"
    checks["abort"] = {"passed": error is None, "fatal": "abort" in cfg.fatal,
                       "detail": error or "ran to t_final"}

    met = metrics(tr) if tr is not None else None
    xa = np.array(x0)
    if met is not None and w.h(xa) >= 0.0 and w.psi(xa) >= 0.0:
        safe = met.min_h >= -cfg.tol_inv and met.min_psi >= -cfg.tol_inv
        checks["safety"] = {"passed": safe, "fatal": "safety" in cfg.fatal,
                            "detail": f"min h = {met.min_h:.3e}, min psi = {met.min_psi:.3e}, tol {cfg.tol_inv:g}"}
    elif met is not None:
        notes.append("x0 starts outside the safe set; safety check skipped")
    if met is not None and FILTER_KIND[cfg.method] == "od":
        floor = float(np.min(tr.theta))
        checks["decay"] = {"passed": floor >= cfg.theta_d - 1e-12, "fatal": "decay" in cfg.fatal,
                           "detail": f"min theta = {floor:.12g}, theta_d = {cfg.theta_d:g}"}

    outputs = {}
    if write:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if tr is not None:
            outputs["trajectory"] = str(write_trajectory_csv(tr, out / f"{cfg.name}.csv"))
        outputs["report"] = str(out / f"{cfg.name}.report.json")
        outputs["summary"] = str(out / f"{cfg.name}.report.txt")
    report = RunReport(
        config={**cfg.to_dict(), "x0": list(x0)},
        metrics=asdict(met) if met is not None else None,
        checks=checks, verification=verification, outputs=outputs,
        duration_s=time.perf_counter() - start, error=error, notes=notes)
    if write:
        _write_json(outputs["report"], report.to_dict())
        Path(outputs["summary"]).write_text(report.to_text() + "\n", encoding="utf-8")
    return report
