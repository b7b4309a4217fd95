"""Isotropy-ansatz fitting, Riemannian-reducibility detection and the
finite-difference oracle harness.

Every fit minimises the g-norm residual summed over a fixed momentum sample
at one position. Reports say a metric is *consistent with* a theorem; a
finite sample can never establish the global hypothesis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from . import fd
from .curvature import (
    DistortionField,
    curvature_report,
    e_curvature,
    g_inner,
    g_norm,
    h_curvature_fd,
    s_curvature,
)
from .errors import DegenerateFit, DomainError
from .metric import EvalPoint, MetricSpec, evaluate, reducibility_combination, vertical_derivatives
from .spray import berwald_hierarchy, spray_coeffs
from .symtensor import contract

ANSATZE = ("Landsberg", "meanLandsberg", "meanBerwald_Kh", "meanBerwald_hOverK", "H_theta", "S_eta")

ISOTROPY_GATE = 1e-8
WITNESS = 1e-6
ZERO = 1e-10
C_LIMIT = 1e-8
SAMPLE_COND_LIMIT = 1e6


@dataclass(frozen=True, eq=False)
class SampleSet:
    x: np.ndarray
    momenta: tuple
    seed: int

    def points(self, spec):
        return [EvalPoint.make(spec, self.x, p) for p in self.momenta]


def make_samples(spec, x, count=64, seed=0, r_min=0.5, r_max=2.0):
    """Low-discrepancy momenta on an annulus, filtered to admissible, well-conditioned points."""
    x = np.asarray(x, dtype=float)
    sampler = qmc.Halton(d=spec.n, scramble=True, seed=seed)
    found = []
    for _ in range(200):
        for u in sampler.random(64):
            p = r_max * (2.0 * u - 1.0)
            if not r_min <= np.linalg.norm(p) <= r_max:
                continue
            try:
                b = evaluate(spec, EvalPoint.make(spec, x, p))
            except DomainError:
                continue
            if np.linalg.cond(b.a[2]) > SAMPLE_COND_LIMIT:
                continue
            found.append(p)
            if len(found) == count:
                return SampleSet(x, tuple(found), seed)
    raise ValueError(f"found only {len(found)} admissible momenta at x={x.tolist()}")


@dataclass(frozen=True, eq=False)
class SampleEval:
    pt: EvalPoint
    bundle: object
    jet: object
    report: object


def evaluate_samples(spec, samples):
    out = []
    for pt in samples.points(spec):
        bundle = evaluate(spec, pt)
        jet = berwald_hierarchy(spec, pt, bundle, x_derivatives=True)
        out.append(SampleEval(pt, bundle, jet, curvature_report(spec, pt, bundle, jet)))
    return out


@dataclass(frozen=True)
class IsotropyFit:
    ansatz: str
    c: float | None
    form: tuple | None
    residual: float
    baseline_norm: float
    basis_norm: float
    lhs_vanishes: bool
    samples: int

    @property
    def hypothesis_holds(self):
        return self.lhs_vanishes or self.residual < ISOTROPY_GATE

    def as_dict(self):
        return {
            "ansatz": self.ansatz,
            "c": self.c,
            "form": None if self.form is None else list(self.form),
            "residual": self.residual,
            "baselineNorm": self.baseline_norm,
            "basisNorm": self.basis_norm,
            "lhsVanishes": self.lhs_vanishes,
            "hypothesisHolds": self.hypothesis_holds,
            "samples": self.samples,
        }


def _ansatz_terms(ansatz, ev):
    """Left-hand field and basis tensors at one sample."""
    b, r = ev.bundle, ev.report
    n, K, p = b.n, b.K, b.p
    half = (n + 1) / 2.0
    if ansatz == "Landsberg":
        return r.L, [-K * b.C]
    if ansatz == "meanLandsberg":
        return r.J, [-K * b.I]
    if ansatz == "meanBerwald_Kh":
        return r.E, [half * K * b.h]
    if ansatz == "meanBerwald_hOverK":
        return r.E, [half / K * b.h]
    if ansatz == "H_theta":
        return r.H, [half / K * p[i] * b.h for i in range(n)]
    if ansatz == "S_eta":
        return np.array(r.S), [np.array((n + 1) * K)] + [np.array(p[i]) for i in range(n)]
    raise ValueError(f"unknown ansatz {ansatz!r}")


def _normal_equations(ansatz, evals):
    gram, rhs, lhs_sq = 0.0, 0.0, 0.0
    for ev in evals:
        lhs, basis = _ansatz_terms(ansatz, ev)
        g = ev.bundle.gDown
        gram = gram + np.array([[g_inner(u, v, g) for v in basis] for u in basis])
        rhs = rhs + np.array([g_inner(u, lhs, g) for u in basis])
        lhs_sq += g_inner(lhs, lhs, g)
    return np.atleast_2d(gram), np.atleast_1d(rhs), lhs_sq


def _objective(ansatz, evals, params):
    total = 0.0
    for ev in evals:
        lhs, basis = _ansatz_terms(ansatz, ev)
        diff = lhs - sum(c * u for c, u in zip(params, basis))
        total += g_inner(diff, diff, ev.bundle.gDown)
    return total


def fit_isotropy(spec, samples, ansatz, evals=None):
    if len(samples.momenta) < 8:
        raise ValueError("need at least 8 samples")
    if evals is None:
        evals = evaluate_samples(spec, samples)
    N = len(evals)
    gram, rhs, lhs_sq = _normal_equations(ansatz, evals)
    diag = np.diag(gram)
    if np.any(np.sqrt(np.maximum(diag, 0.0) / N) <= ZERO):
        raise DegenerateFit(f"{ansatz}: a basis tensor vanishes on every sample")
    scale = np.sqrt(diag)
    normalized = gram / np.outer(scale, scale)
    if np.linalg.cond(normalized) > 1e12:
        raise DegenerateFit(f"{ansatz}: basis Gram matrix is singular")
    params = np.linalg.solve(normalized, rhs / scale) / scale
    baseline = math.sqrt(max(lhs_sq, 0.0))
    basis_norm = float(scale[0])
    residual_sq = max(_objective(ansatz, evals, params), 0.0)
    vanishes = baseline <= ZERO * basis_norm
    # a left side that is zero to round-off is fitted exactly by c = 0
    residual = 0.0 if vanishes else min(math.sqrt(residual_sq) / baseline, 1.0)
    if ansatz == "H_theta":
        c, form = None, tuple(float(v) for v in params)
    elif ansatz == "S_eta":
        c, form = float(params[0]), tuple(float(v) for v in params[1:])
    else:
        c, form = float(params[0]), None
    return IsotropyFit(ansatz, c, form, residual, baseline, basis_norm, vanishes, N)


def fit_objective(spec, samples, fit, evals=None, c=None):
    """Least-squares objective of ``fit`` with its scalar replaced by ``c``."""
    if evals is None:
        evals = evaluate_samples(spec, samples)
    params = [fit.c if c is None else c] if fit.c is not None else []
    if fit.form is not None:
        params = params + list(fit.form)
    return _objective(fit.ansatz, evals, params)


@dataclass(frozen=True)
class RiemannCheck:
    is_reducible: bool
    max_c_norm: float
    identity_residual: float
    max_scaled_c_norm: float
    criteria_agree: bool

    def as_dict(self):
        return {
            "isReducible": self.is_reducible,
            "maxCnorm": self.max_c_norm,
            "maxKCnorm": self.max_scaled_c_norm,
            "identityResidual": self.identity_residual,
            "criteriaAgree": self.criteria_agree,
        }


def riemann_check(spec, samples, evals=None):
    if spec.m == 2:
        return RiemannCheck(True, 0.0, 0.0, 0.0, True)
    bundles = [ev.bundle for ev in evals] if evals else [evaluate(spec, pt) for pt in samples.points(spec)]
    c_norm = kc_norm = q_norm = 0.0
    for b in bundles:
        cn = g_norm(b.C, b.gDown)
        c_norm = max(c_norm, cn)
        kc_norm = max(kc_norm, b.K * cn)
        q = reducibility_combination(b.a[1], b.a[2], b.a[3])
        q_norm = max(q_norm, g_norm(q, b.gDown))
    by_c, by_q = kc_norm <= ZERO, q_norm <= ZERO
    return RiemannCheck(by_c and by_q, c_norm, q_norm, kc_norm, by_c == by_q)


THEOREMS = {
    "landsbergRigidity": ("Landsberg",),
    "meanLandsbergRigidity": ("meanLandsberg",),
    "meanBerwaldRigidity": ("meanBerwald_Kh", "meanBerwald_hOverK"),
    "hCurvatureRigidity": ("H_theta",),
}


def _fit_all(spec, samples, evals):
    fits = {}
    for ansatz in ANSATZE:
        try:
            fits[ansatz] = fit_isotropy(spec, samples, ansatz, evals)
        except DegenerateFit as exc:
            fits[ansatz] = exc
    return fits


def _judge(fit, witnessed):
    if isinstance(fit, Exception):
        return "degenerate", True
    if not fit.hypothesis_holds:
        return "hypothesis-not-met", True
    if not witnessed:
        return "no-witness", True
    small = abs(fit.c) < C_LIMIT if fit.c is not None else True
    if fit.form is not None and fit.ansatz == "H_theta":
        small = small and float(np.linalg.norm(fit.form)) < C_LIMIT
    return ("consistent" if small else "inconsistent"), small


def theorem_consistency(spec, samples, evals=None, fits=None):
    if evals is None:
        evals = evaluate_samples(spec, samples)
    if fits is None:
        fits = _fit_all(spec, samples, evals)
    riemann = riemann_check(spec, samples, evals)
    witnessed = riemann.max_scaled_c_norm > WITNESS
    theorems = {}
    for label, ansatze in THEOREMS.items():
        if riemann.is_reducible:
            theorems[label] = {"status": "vacuous-riemannian", "passed": True, "fits": list(ansatze)}
            continue
        verdicts = [_judge(fits[a], witnessed) for a in ansatze]
        passed = all(ok for _, ok in verdicts)
        theorems[label] = {
            "status": ", ".join(v for v, _ in verdicts),
            "passed": passed,
            "fits": list(ansatze),
        }
    theorems["meanBerwaldChain"] = _equivalence_chain(fits, riemann)
    return {
        "riemann": riemann.as_dict(),
        "theorems": theorems,
        "passed": all(t["passed"] for t in theorems.values()),
    }


def _holds(fit):
    return not isinstance(fit, Exception) and fit.hypothesis_holds


def _equivalence_chain(fits, riemann):
    """isotropic mean Berwald <=> E = 0 <=> almost isotropic S with c = 0."""
    if riemann.is_reducible:
        return {"status": "vacuous-riemannian", "passed": True}
    isotropic = _holds(fits["meanBerwald_Kh"]) or _holds(fits["meanBerwald_hOverK"])
    e_fits = [f for f in (fits["meanBerwald_Kh"], fits["meanBerwald_hOverK"]) if not isinstance(f, Exception)]
    e_zero = any(f.lhs_vanishes for f in e_fits)
    s_fit = fits["S_eta"]
    s_form = _holds(s_fit) and abs(s_fit.c) < C_LIMIT
    passed = isotropic == e_zero == s_form
    return {
        "status": "consistent" if passed else "inconsistent",
        "passed": passed,
        "isotropicMeanBerwald": isotropic,
        "vanishingE": e_zero,
        "sIsOneForm": s_form,
    }


def classify(spec, samples):
    evals = evaluate_samples(spec, samples)
    fits = _fit_all(spec, samples, evals)
    return {
        "fits": {
            a: (f.as_dict() if not isinstance(f, Exception) else {"ansatz": a, "degenerate": str(f)})
            for a, f in fits.items()
        },
        "consistency": theorem_consistency(spec, samples, evals, fits),
    }


@dataclass
class OracleRow:
    name: str
    tol: float
    max_error: float = 0.0
    count: int = 0

    def add(self, err):
        self.max_error = max(self.max_error, err)
        self.count += 1

    @property
    def passed(self):
        return self.max_error <= self.tol

    def as_dict(self):
        return {
            "name": self.name,
            "maxRelError": self.max_error,
            "tol": self.tol,
            "samples": self.count,
            "passed": self.passed,
        }


ORACLE_TOLERANCES = {
    "gUp_vs_hessian": 1e-6,
    "C_vs_dg": 1e-5,
    "d_a2": 1e-6,
    "d_a1": 1e-6,
    "d_a1a1": 1e-6,
    "berwald_level1": 1e-5,
    "berwald_level2": 1e-5,
    "berwald_level3": 1e-5,
    "berwald_level4": 1e-5,
    "tau_dp": 1e-6,
    "tau_dx": 1e-6,
    "E_vs_d2S": 1e-4,
    "H_vs_fd": 1e-6,
}


def _unit_volume(spec):
    return MetricSpec(spec.n, spec.m, spec.a, None, spec.name)


def _second_step(bundle):
    """Hessian step kept well inside the cone R > 0.

    R / |dR/dp| is the first-order distance to the zero set of the radicand.
    """
    R = float(bundle.raw[0])
    distance = R / (bundle.m * float(np.linalg.norm(bundle.raw[1])))
    return min(fd.step_for(bundle.p, fd.STEP_SECOND), 0.02 * distance)


ORACLE_GROUPS = {
    "metric": ("gUp_vs_hessian", "C_vs_dg", "d_a2", "d_a1", "d_a1a1"),
    "berwald": ("berwald_level1", "berwald_level2", "berwald_level3", "berwald_level4"),
    "distortion": ("tau_dp", "tau_dx"),
    "curvature": ("E_vs_d2S", "H_vs_fd"),
}


def _metric_oracle(spec, pt, b, rows):
    x, p = pt.x, pt.p
    pn = float(np.linalg.norm(p))

    def bundle_at(q):
        return evaluate(spec, EvalPoint.make(spec, x, q))

    A = spec.a.dense(x)
    k_squared = lambda q: contract(A, q, spec.m) ** (2.0 / spec.m)  # noqa: E731
    hess = 0.5 * fd.gradient(lambda q: fd.complex_step_gradient(k_squared, q), p)
    rows["gUp_vs_hessian"].add(fd.rel_error(b.gUp, hess, b.K ** 2 / pn ** 2))

    dg = fd.gradient(lambda q: bundle_at(q).gUp, p)
    rows["C_vs_dg"].add(fd.rel_error(b.C, -0.5 * dg, np.max(np.abs(b.gUp)) / pn))

    vd = vertical_derivatives(b)
    a_scale = max(np.max(np.abs(b.a[2])), np.max(np.abs(b.a[1])) ** 2) / pn
    rows["d_a2"].add(fd.rel_error(vd["a2"], fd.gradient(lambda q: bundle_at(q).a[2], p), a_scale))
    rows["d_a1"].add(fd.rel_error(vd["a1"], fd.gradient(lambda q: bundle_at(q).a[1], p), a_scale))
    rows["d_a1a1"].add(
        fd.rel_error(vd["a1a1"], fd.gradient(lambda q: np.outer(bundle_at(q).a[1], bundle_at(q).a[1]), p), a_scale)
    )


def _berwald_oracle(spec, pt, jet, rows):
    x, p = pt.x, pt.p
    pn = float(np.linalg.norm(p))
    for k in range(1, 5):
        if k == 1:
            lower = lambda q: spray_coeffs(spec, EvalPoint.make(spec, x, q))  # noqa: E731
        else:
            lower = lambda q, k=k: berwald_hierarchy(spec, EvalPoint.make(spec, x, q), levels=k - 1).levels[k - 1]  # noqa: E731
        numeric = np.moveaxis(fd.gradient(lower, p), -1, 0)
        # homogeneity-weighted size of the lower levels; G_{k-1} alone can vanish
        scale = max(float(np.max(np.abs(jet.levels[j]), initial=0.0)) * pn ** (j - k) for j in range(k))
        rows[f"berwald_level{k}"].add(fd.rel_error(jet.levels[k], numeric, scale))


def _distortion_oracle(spec, pt, rows):
    x, p = pt.x, pt.p
    tau = DistortionField(spec)
    d_x, d_p = tau.gradients(x, p)
    rows["tau_dp"].add(fd.rel_error(d_p, fd.gradient(lambda q: tau(x, q), p), 1.0 / float(np.linalg.norm(p))))
    rows["tau_dx"].add(fd.rel_error(d_x, fd.gradient(lambda z: tau(z, p), x), 1.0))


def _curvature_oracle(spec, pt, b, jet, rows):
    x, p = pt.x, pt.p
    pn = float(np.linalg.norm(p))
    unit = _unit_volume(spec)
    E = e_curvature(jet)
    d2S = 0.5 * fd.hessian(lambda q: s_curvature(unit, EvalPoint.make(unit, x, q)), p, _second_step(b))
    g2 = float(np.max(np.abs(jet.G2), initial=0.0))
    rows["E_vs_d2S"].add(fd.rel_error(E, d2S, g2 / pn))
    H = curvature_report(spec, pt, b, jet).H
    rows["H_vs_fd"].add(fd.rel_error(H, h_curvature_fd(spec, pt), g2))


def oracle_point(spec, pt, rows):
    """Record closed-form vs finite-difference comparisons at one point.

    Only the rows present in ``rows`` are computed, group by group.
    """
    b = evaluate(spec, pt)
    wanted = {g for g, names in ORACLE_GROUPS.items() if any(n in rows for n in names)}
    if "metric" in wanted:
        _metric_oracle(spec, pt, b, rows)
    jet = None
    if wanted & {"berwald", "curvature"}:
        jet = berwald_hierarchy(spec, pt, b, x_derivatives="curvature" in wanted)
    if "berwald" in wanted:
        _berwald_oracle(spec, pt, jet, rows)
    if "distortion" in wanted:
        _distortion_oracle(spec, pt, rows)
    if "curvature" in wanted:
        _curvature_oracle(spec, pt, b, jet, rows)


def fd_oracle(spec, samples, limit=None, groups=None):
    names = ORACLE_TOLERANCES if groups is None else [n for g in groups for n in ORACLE_GROUPS[g]]
    rows = {name: OracleRow(name, ORACLE_TOLERANCES[name]) for name in names}
    points = samples.points(spec)
    if limit is not None:
        points = points[:limit]
    for pt in points:
        oracle_point(spec, pt, rows)
    return {
        "comparisons": [r.as_dict() for r in rows.values()],
        "passed": all(r.passed for r in rows.values()),
    }

