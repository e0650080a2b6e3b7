"""Sampling-based falsification of barrier validity conditions.

Each check evaluates the relevant Lie derivatives on every sample of a
box, selects the samples where the condition's hypothesis holds (a band
around h = 0, a near-zero input direction, ...) and flags those where the
conclusion fails.  A pass means no counterexample was found on the
samples.  It is not a proof.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .barriers import hocbf_build, lf_field, lie, recbf_build
from .errors import ContractViolation

NOT_A_PROOF = "sampling-based, not a proof"
VACUOUS = "vacuous: no qualifying samples"
REGULAR_GRAD_TOL = 1e-8


@dataclass(frozen=True)
class RegionBox:
    lower: tuple
    upper: tuple
    samples_per_dim: object = 21  # int or per-dimension sequence
    n_samples: Optional[int] = None  # Sobol sample count
    sampler: str = "grid"
    seed: int = 0

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or not lo:
            raise ContractViolation("box bounds must be non-empty and equally long")
        if any(not l < u for l, u in zip(lo, hi)):
            raise ContractViolation(f"box needs lower < upper in every dimension: {lo}, {hi}")
        if self.sampler not in ("grid", "sobol"):
            raise ContractViolation(f"sampler must be 'grid' or 'sobol', got {self.sampler!r}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return len(self.lower)

    def _counts(self):
        k = self.samples_per_dim
        counts = [int(k)] * self.dim if np.isscalar(k) else [int(v) for v in k]
        if len(counts) != self.dim or min(counts) < 2:
            raise ContractViolation(f"need >= 2 grid samples in each of {self.dim} dimensions")
        return counts

    def points(self):
        lo, hi = np.array(self.lower), np.array(self.upper)
        if self.sampler == "sobol":
            n = self.n_samples or 1024
            unit = qmc.Sobol(self.dim, scramble=True, seed=self.seed).random(n)
            return lo + unit * (hi - lo)
        axes = [np.linspace(l, u, k) for l, u, k in zip(lo, hi, self._counts())]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def cell_diagonal(self):
        widths = np.array(self.upper) - np.array(self.lower)
        if self.sampler == "sobol":
            n = self.n_samples or 1024
            return float(np.sqrt(self.dim) * (np.prod(widths) / n) ** (1.0 / self.dim))
        return float(np.linalg.norm(widths / (np.array(self._counts()) - 1)))


@dataclass
class Violation:
    state: list
    quantities: dict


@dataclass
class VerificationReport:
    condition: str
    samples_tested: int
    band_samples: int
    violations: list
    tolerances: dict
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations

    @property
    def vacuous(self):
        return self.band_samples == 0

    def to_dict(self, max_violations=50):
        return {
            "condition": self.condition,
            "passed": self.passed,
            "samples_tested": self.samples_tested,
            "band_samples": self.band_samples,
            "violation_count": len(self.violations),
            "violations": [{"state": v.state, **v.quantities} for v in self.violations[:max_violations]],
            "tolerances": self.tolerances,
            "notes": self.notes,
        }

    def to_text(self):
        head = f"[{'PASS' if self.passed else 'FAIL'}] {self.condition}"
        lines = [head,
                 f"  samples: {self.samples_tested}, in band: {self.band_samples}, "
                 f"violations: {len(self.violations)}",
                 "  tolerances: " + ", ".join(f"{k}={v:.3g}" for k, v in self.tolerances.items())]
        lines += [f"  note: {n}" for n in self.notes]
        for v in self.violations[:5]:
            q = ", ".join(f"{k}={val:.4g}" for k, val in v.quantities.items())
            lines.append(f"  at x={[round(s, 6) for s in v.state]}: {q}")
        if len(self.violations) > 5:
            lines.append(f"  ... {len(self.violations) - 5} more")
        return "\n".join(lines)


def _points(box, points):
    if points is not None:
        return np.atleast_2d(np.asarray(points, dtype=float))
    return box.points()


def _default_tol_h(box, grad_norms):
    if box is None:
        raise ContractViolation("tol_h must be given when sampling explicit points")
    return 0.5 * box.cell_diagonal() * float(np.max(grad_norms))


def _default_tol_g(norms):
    return 1e-6 * (1.0 + float(np.max(norms)))


def _report(name, X, band, bad, quantities, tolerances):
    idx = np.flatnonzero(band & bad)
    violations = [Violation(X[i].tolist(), {k: float(v[i]) for k, v in quantities.items()}) for i in idx]
    notes = [NOT_A_PROOF]
    if not band.any():
        notes.append(VACUOUS)
    return VerificationReport(name, int(X.shape[0]), int(band.sum()), violations, tolerances, notes)


def _lie_arrays(sys, h, X):
    hv = np.empty(len(X))
    lf = np.empty(len(X))
    lg_norm = np.empty(len(X))
    grad_norm = np.empty(len(X))
    for i, x in enumerate(X):
        hv[i] = h(x)
        dh = h.grad(x)
        grad_norm[i] = np.linalg.norm(dh)
        lf[i] = dh @ sys.drift(x)
        lg_norm[i] = np.linalg.norm(dh @ sys.input_matrix(x))
    return hv, lf, lg_norm, grad_norm


def check_od_cbc(sys, h, box, tol_h=None, tol_g=None, margin=0.0, points=None):
    """h = 0 and L_g h = 0 must imply L_f h > margin."""
    X = _points(box, points)
    hv, lf, lg_norm, grad_norm = _lie_arrays(sys, h, X)
    tol_h = _default_tol_h(box, grad_norm) if tol_h is None else tol_h
    tol_g = _default_tol_g(lg_norm) if tol_g is None else tol_g
    band = (np.abs(hv) <= tol_h) & (lg_norm <= tol_g)
    return _report("od-cbc", X, band, lf <= margin,
                   {"h": hv, "lf_h": lf, "lg_h_norm": lg_norm},
                   {"tol_h": tol_h, "tol_g": tol_g, "margin": margin})


def check_cbc(sys, h, alpha, box, tol_g=None, points=None):
    """L_g h = 0 must imply L_f h > -alpha(h) (on h >= 0)."""
    X = _points(box, points)
    hv, lf, lg_norm, _ = _lie_arrays(sys, h, X)
    tol_g = _default_tol_g(lg_norm) if tol_g is None else tol_g
    neg_alpha = -np.array([alpha(v) for v in hv])
    band = (lg_norm <= tol_g) & (hv >= 0.0)
    return _report(f"cbc[{getattr(alpha, 'name', 'alpha')}]", X, band, lf <= neg_alpha,
                   {"h": hv, "lf_h": lf, "minus_alpha_h": neg_alpha, "lg_h_norm": lg_norm},
                   {"tol_g": tol_g})


def _region_mask(region, X, psi_v, h_v):
    if region in (None, "s_and_c"):
        return (psi_v >= 0.0) & (h_v >= 0.0)
    if region == "c":
        return h_v >= 0.0
    if callable(region):
        return np.array([bool(region(x)) for x in X])
    raise ContractViolation(f"region must be 's_and_c', 'c' or a predicate, got {region!r}")


def _lglf_norms(sys, spec, X):
    lfpsi = lf_field(sys, spec.psi, spec.lf_psi_gradient)
    lf = np.empty(len(X))
    norms = np.empty(len(X))
    for i, x in enumerate(X):
        lf[i] = lfpsi(x)
        norms[i] = np.linalg.norm(lie(sys, lfpsi, x).lg)
    return lf, norms


def check_od_hocbf(sys, spec, box, tol_h=None, tol_g=None, region="s_and_c", points=None):
    """On the region (default psi >= 0 and h >= 0), h = 0 must imply L_g L_f psi != 0."""
    X = _points(box, points)
    h = hocbf_build(sys, spec)
    hv, _, _, grad_norm = _lie_arrays(sys, h, X)
    psi_v = np.array([spec.psi(x) for x in X])
    _, lglf = _lglf_norms(sys, spec, X)
    tol_h = _default_tol_h(box, grad_norm) if tol_h is None else tol_h
    tol_g = _default_tol_g(lglf) if tol_g is None else tol_g
    band = _region_mask(region, X, psi_v, hv) & (np.abs(hv) <= tol_h)
    return _report("od-hocbf", X, band, lglf <= tol_g,
                   {"psi": psi_v, "h": hv, "lglf_psi_norm": lglf},
                   {"tol_h": tol_h, "tol_g": tol_g})


def check_od_recbc(sys, spec, box, tol_h=None, tol_g=None, points=None):
    """On C, h = 0 and L_g L_f psi = 0 must imply L_f psi >= -alpha1(psi) + eps."""
    X = _points(box, points)
    h = recbf_build(sys, spec)
    hv, _, _, grad_norm = _lie_arrays(sys, h, X)
    psi_v = np.array([spec.psi(x) for x in X])
    lfpsi, lglf = _lglf_norms(sys, spec, X)
    bound = -np.array([spec.alpha1(v) for v in psi_v]) + spec.eps
    tol_h = _default_tol_h(box, grad_norm) if tol_h is None else tol_h
    tol_g = _default_tol_g(lglf) if tol_g is None else tol_g
    band = (hv >= 0.0) & (np.abs(hv) <= tol_h) & (lglf <= tol_g)
    return _report("od-recbc", X, band, lfpsi < bound,
                   {"h": hv, "lf_psi": lfpsi, "bound": bound, "lglf_psi_norm": lglf},
                   {"tol_h": tol_h, "tol_g": tol_g})


def check_regular_value(h, box, tol_h=None, points=None):
    """The gradient of h must not vanish where h = 0."""
    X = _points(box, points)
    hv = np.array([h(x) for x in X])
    grad_norm = np.array([np.linalg.norm(h.grad(x)) for x in X])
    tol_h = _default_tol_h(box, grad_norm) if tol_h is None else tol_h
    band = np.abs(hv) <= tol_h
    return _report(f"regular-value[{h.name}]", X, band, grad_norm <= REGULAR_GRAD_TOL,
                   {"h": hv, "grad_norm": grad_norm},
                   {"tol_h": tol_h, "grad_tol": REGULAR_GRAD_TOL})
