"""Acceptance criteria 1-10, each at its stated tolerance and runtime budget.

Every test prints (and the terminal summary repeats) one PASS/FAIL line.
"""

import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from mroot import fixtures
from mroot.classify import ORACLE_GROUPS, classify, fd_oracle, make_samples
from mroot.curvature import curvature_report, g_norm
from mroot.errors import DomainError
from mroot.geodesic import integrate
from mroot.metric import EvalPoint, evaluate, reducibility_combination
from mroot.spray import berwald_hierarchy

ROOT = Path(__file__).resolve().parents[1]
ALL = list(fixtures.FIXTURES)
X_DEPENDENT = ["M_X", "M_GEN4"]


def _rel(a, b, floor=0.0):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    denom = max(float(np.max(np.abs(b))), floor)
    diff = float(np.max(np.abs(a - b)))
    return 0.0 if diff == 0.0 else diff / denom


def _random_points(rng, name, count):
    """Random admissible, well-conditioned (x, p) pairs near the fixture's default position."""
    spec = fixtures.fixture(name)
    x0 = np.asarray(fixtures.default_x(name), dtype=float)
    out = []
    while len(out) < count:
        x = x0 + rng.uniform(-0.2, 0.2, size=spec.n)
        p = rng.normal(size=spec.n)
        try:
            pt = EvalPoint.make(spec, x, p)
            b = evaluate(spec, pt)
        except DomainError:
            continue
        if np.linalg.cond(b.a[2]) <= 1e6:
            out.append((pt, b))
    return spec, out


def test_01_metric_identities(acceptance):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst, count = 0.0, 0
    for name in ALL:
        spec, points = _random_points(rng, name, 17)
        n, m = spec.n, spec.m
        for pt, b in points:
            p = b.p
            pn = np.linalg.norm(p)
            c_scale = max(np.max(np.abs(b.C)), np.max(np.abs(b.gUp)) / pn)
            worst = max(
                worst,
                _rel(p @ b.gUp @ p, b.K**2),
                _rel(b.gDown @ b.gUp, np.eye(n)),
                np.max(np.abs(b.h @ p)) / (np.max(np.abs(b.h)) * pn),
                np.max(np.abs(b.C @ p)) / (c_scale * pn),
                _rel(np.linalg.det(b.gUp), (m - 1) ** (n - 1) * np.linalg.det(b.a[2])),
            )
            count += 1
    elapsed = time.perf_counter() - start
    ok = count >= 100 and worst <= 1e-9 and elapsed < 5.0
    acceptance(1, "metric identity suite", ok, f"{count} triples, worst rel {worst:.2e} (tol 1e-9), {elapsed:.2f}s (<5s)")
    assert ok


def test_02_oracle_equivalence(acceptance):
    start = time.perf_counter()
    worst = {}
    for name in ALL:
        spec = fixtures.fixture(name)
        samples = make_samples(spec, fixtures.default_x(name), count=16)
        for row in fd_oracle(spec, samples, groups=["metric"])["comparisons"]:
            worst[row["name"]] = max(worst.get(row["name"], 0.0), row["maxRelError"])
    elapsed = time.perf_counter() - start
    tol = {"gUp_vs_hessian": 1e-6, "C_vs_dg": 1e-5, "d_a2": 1e-6, "d_a1": 1e-6, "d_a1a1": 1e-6}
    ok = all(worst[k] <= t for k, t in tol.items()) and elapsed < 10.0
    detail = ", ".join(f"{k} {worst[k]:.1e}/{tol[k]:.0e}" for k in tol)
    acceptance(2, "closed forms vs finite differences", ok, f"{detail}, {elapsed:.2f}s (<10s)")
    assert ok


def test_03_berwald_hierarchy(acceptance):
    start = time.perf_counter()
    low = top = contr = fd_worst = 0.0
    factorizations = set()
    for name in ALL:
        spec = fixtures.fixture(name)
        samples = make_samples(spec, fixtures.default_x(name), count=16)
        for pt in samples.points(spec):
            jet = berwald_hierarchy(spec, pt)
            low = max(low, *jet.residuals[:3])
            top = max(top, *jet.residuals[3:])
            contr = max(contr, jet.contraction_residual)
            factorizations.add(jet.factorizations)
        rows = fd_oracle(spec, samples, groups=["berwald"])["comparisons"]
        fd_worst = max(fd_worst, *(r["maxRelError"] for r in rows))
    elapsed = time.perf_counter() - start
    ok = low <= 1e-10 and top <= 1e-8 and contr <= 1e-8 and fd_worst <= 1e-5 and factorizations == {1} and elapsed < 10.0
    acceptance(
        3,
        "Berwald hierarchy",
        ok,
        f"residuals {low:.1e} (<=1e-10) / {top:.1e} (<=1e-8), FD {fd_worst:.1e} (<=1e-5), "
        f"contraction {contr:.1e} (<=1e-8), factorizations {sorted(factorizations)}, {elapsed:.2f}s (<10s)",
    )
    assert ok


def test_04_closed_form_fixture(acceptance):
    rng = np.random.default_rng(4)
    spec, points = _random_points(rng, "M_X", 20)
    g_err = g3 = curv = 0.0
    for pt, b in points:
        closed = np.array([pt.p[0] ** 2 / (6.0 * (1.0 + pt.x[0])), 0.0])
        jet = berwald_hierarchy(spec, pt, b, x_derivatives=True)
        g_err = max(g_err, _rel(jet.G, closed, 1.0))
        g3 = max(g3, float(np.max(np.abs(jet.G3))))
        r = curvature_report(spec, pt, b, jet)
        curv = max(curv, *(r.norms[k] for k in ("L", "J", "E", "H")))
    ok = len(points) == 20 and g_err <= 1e-12 and g3 <= 1e-12 and curv <= 1e-12
    acceptance(
        4, "M_X closed-form spray", ok,
        f"20 points, G err {g_err:.1e}, max|G3| {g3:.1e}, max g-norm L/J/E/H {curv:.1e} (all <=1e-12)",
    )
    assert ok


def test_05_riemannian_reduction(acceptance):
    detail, ok = [], True
    for name in ("M_EUC4", "M_RIEM2"):
        spec = fixtures.fixture(name)
        samples = make_samples(spec, fixtures.default_x(name), count=64)
        c_norm = q_norm = 0.0
        for pt in samples.points(spec):
            b = evaluate(spec, pt)
            c_norm = max(c_norm, g_norm(b.C, b.gDown))
            if spec.m >= 3:
                q_norm = max(q_norm, g_norm(reducibility_combination(b.a[1], b.a[2], b.a[3]), b.gDown))
        ok = ok and c_norm <= 1e-12 and q_norm <= 1e-12
        detail.append(f"{name} ||C|| {c_norm:.1e}, mean-Cartan residual {q_norm:.1e}")
    acceptance(5, "Riemannian reduction", ok, "; ".join(detail) + " (<=1e-12)")
    assert ok


def test_06_locally_minkowski(acceptance):
    exact_zero, s_max, curv = True, 0.0, 0.0
    for name in ("M_CUB", "M_BM"):
        spec = fixtures.fixture(name)
        samples = make_samples(spec, fixtures.default_x(name), count=32)
        for pt in samples.points(spec):
            b = evaluate(spec, pt)
            jet = berwald_hierarchy(spec, pt, b, x_derivatives=True)
            exact_zero = exact_zero and not any(np.any(level) for level in jet.levels)
            r = curvature_report(spec, pt, b, jet)
            s_max = max(s_max, abs(r.S))
            curv = max(curv, *(r.norms[k] for k in ("L", "J", "E", "H")))
    ok = exact_zero and s_max == 0.0 and curv <= 1e-12
    acceptance(6, "locally Minkowski", ok, f"G exactly zero: {exact_zero}, max|S| {s_max:.1e}, max curvature norm {curv:.1e}")
    assert ok


DEGREES = {"K": 1, "g": 0, "C": -1, "I": -1, "G": 2, "G1": 1, "G2": 0, "G3": -1, "L": 0, "J": 0, "E": -1, "S": 1, "H": 0}


def _fields(spec, pt):
    b = evaluate(spec, pt)
    jet = berwald_hierarchy(spec, pt, b, x_derivatives=True)
    r = curvature_report(spec, pt, b, jet)
    return b.K, {
        "K": b.K, "g": b.gUp, "C": b.C, "I": b.I,
        "G": jet.G, "G1": jet.G1, "G2": jet.G2, "G3": jet.G3,
        "L": r.L, "J": r.J, "E": r.E, "S": r.S, "H": r.H,
    }


def test_07_homogeneity_table(acceptance):
    worst = dict.fromkeys(DEGREES, 0.0)
    for name in X_DEPENDENT:
        spec = fixtures.fixture(name)
        for pt in make_samples(spec, fixtures.default_x(name), count=12).points(spec):
            K, base = _fields(spec, pt)
            for lam in (0.5, 2.0):
                _, scaled = _fields(spec, EvalPoint.make(spec, pt.x, lam * pt.p))
                for key, d in DEGREES.items():
                    # (lam K)^d floors the scale for fields that vanish identically
                    err = _rel(scaled[key], lam**d * np.asarray(base[key]), (lam * K) ** d)
                    worst[key] = max(worst[key], err)
    ok = all(v <= 1e-8 for v in worst.values())
    bad = [k for k, v in worst.items() if v > 1e-8]
    acceptance(7, "homogeneity table", ok, f"worst {max(worst.values()):.1e} over {len(DEGREES)} fields (tol 1e-8){' failing ' + str(bad) if bad else ''}")
    assert ok


def test_08_theorem_consistency(acceptance):
    start = time.perf_counter()
    checked, worst_c, chain_ok, all_passed = 0, 0.0, True, True
    for name in ALL:
        spec = fixtures.fixture(name)
        if spec.m < 3:
            continue
        report = classify(spec, make_samples(spec, fixtures.default_x(name), count=64))
        consistency = report["consistency"]
        all_passed = all_passed and consistency["passed"]
        chain_ok = chain_ok and consistency["theorems"]["meanBerwaldChain"]["status"] in ("consistent", "vacuous-riemannian")
        witnessed = consistency["riemann"]["maxKCnorm"] > 1e-6
        for fit in report["fits"].values():
            if "degenerate" in fit or not witnessed:
                continue
            if fit["residual"] < 1e-8 or fit["lhsVanishes"]:
                checked += 1
                size = abs(fit["c"]) if fit["c"] is not None else 0.0
                if fit["ansatz"] == "H_theta":
                    size = max(size, float(np.linalg.norm(fit["form"])))
                worst_c = max(worst_c, size)
    elapsed = time.perf_counter() - start
    ok = worst_c < 1e-8 and chain_ok and all_passed and elapsed < 30.0
    acceptance(
        8, "theorem consistency", ok,
        f"{checked} isotropic fits with witness, max |c|/||theta|| {worst_c:.1e} (<1e-8), "
        f"mean-Berwald chain consistent: {chain_ok}, {elapsed:.2f}s (<30s)",
    )
    assert ok


def test_09_geodesic_conservation(acceptance):
    spec = fixtures.fixture("M_X")
    drift = rev = 0.0
    for p0 in ([1.0, 1.0], [0.6, 1.3], [1.8, 0.4]):
        x0, p0 = np.zeros(2), np.array(p0)
        states = integrate(spec, x0, p0, 1.0)
        drift = max(drift, max(s.drift for s in states))
        end = states[-1]
        back = integrate(spec, end.x, end.p, -1.0)[-1]
        z0 = np.concatenate([x0, p0])
        rev = max(rev, np.max(np.abs(np.concatenate([back.x, back.p]) - z0)) / max(1.0, np.max(np.abs(z0))))
    ok = drift <= 1e-8 and rev <= 1e-7
    acceptance(9, "geodesic conservation on M_X", ok, f"K drift {drift:.1e} (<=1e-8), reversibility {rev:.1e} (<=1e-7)")
    assert ok


def test_10_end_to_end_check(acceptance):
    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "mroot.cli", "check", "--metric", str(ROOT / "metrics" / "M_BM.json")],
        capture_output=True, text=True, check=False,
    )
    elapsed = time.perf_counter() - start
    report = json.loads(proc.stdout)
    statuses = [c["status"] for r in report["results"] for c in r["checks"]]
    ok = proc.returncode == 0 and "FAIL" not in statuses and elapsed < 60.0
    acceptance(
        10, "mroot check end to end", ok,
        f"exit {proc.returncode}, {len(report['results'])} metrics, {statuses.count('PASS')} PASS / "
        f"{statuses.count('FAIL')} FAIL / {statuses.count('REPORTED')} reported, {elapsed:.1f}s (<60s)",
    )
    assert ok


def test_oracle_groups_cover_every_tolerance():
    from mroot.classify import ORACLE_TOLERANCES

    assert sorted(n for names in ORACLE_GROUPS.values() for n in names) == sorted(ORACLE_TOLERANCES)
