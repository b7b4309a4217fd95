"""Command-line entry point: ``mroot <command> [options]``.

Exit codes: 0 when every check passes, 1 when any check FAILs, 2 for usage
or input-file errors, 3 when a point lies outside the metric's domain.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .classify import ORACLE_TOLERANCES, classify, fd_oracle, make_samples
from .curvature import curvature_report
from .errors import DomainError, MRootError, ParseError, ResidualTooLarge, StepFailure
from .fixtures import FIXTURES, default_x, fixture
from .geodesic import IntegratorConfig, integrate
from .io import dump_report, parse_metric_file, spec_digest
from .metric import EvalPoint, evaluate, warn_if_low_degree
from .spray import berwald_hierarchy
from .suite import run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _vector(text):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {text!r}") from None
    if not all(np.isfinite(values)):
        raise argparse.ArgumentTypeError(f"non-finite component in {text!r}")
    return values


def build_parser():
    parser = argparse.ArgumentParser(prog="mroot", description="Curvature engine for m-th root Cartan metrics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--metric", help="metric JSON file, or the name of a built-in fixture (e.g. M_X)")
    common.add_argument("--x", type=_vector, help="position, comma-separated (default: origin)")
    common.add_argument("--format", choices=("json", "table"), default="json")
    common.add_argument("--seed", type=int, help="sampling seed (MROOT_SEED overrides the default of 0)")

    pointwise = argparse.ArgumentParser(add_help=False)
    pointwise.add_argument("--p", type=_vector, help="momentum, comma-separated")
    pointwise.add_argument("--points", help="file with one 'x;p' pair per line")

    sub.add_parser("eval", parents=[common, pointwise], help="metric-level tensors at points")
    sub.add_parser("curvatures", parents=[common, pointwise], help="spray jet and curvatures at points")
    geo = sub.add_parser("geodesic", parents=[common, pointwise], help="trace a geodesic")
    geo.add_argument("--t", type=float, required=True, help="end parameter (may be negative)")
    geo.add_argument("--rtol", type=float, default=IntegratorConfig.rtol)
    geo.add_argument("--atol", type=float, default=IntegratorConfig.atol)
    geo.add_argument("--max-steps", type=int, default=IntegratorConfig.max_steps, help="step budget before giving up")
    cls = sub.add_parser("classify", parents=[common], help="isotropy fits and theorem consistency")
    cls.add_argument("--samples", type=int, default=64)
    sub.add_parser("check", parents=[common], help="invariant suite over the fixtures plus --metric")
    orc = sub.add_parser("oracle", parents=[common], help="closed forms against finite differences")
    orc.add_argument("--samples", type=int, default=16)
    return parser


def resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MROOT_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"MROOT_SEED must be an integer, got {env!r}") from None


def load_metric(ref):
    if ref is None:
        raise UsageError("--metric is required")
    if ref in FIXTURES:
        return fixture(ref)
    try:
        return parse_metric_file(ref)
    except (ParseError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _position(spec, x):
    x = [0.0] * spec.n if x is None else x
    if len(x) != spec.n:
        raise UsageError(f"--x needs {spec.n} components, got {len(x)}")
    return np.asarray(x, dtype=float)


def read_points(path, n):
    points = []
    try:
        lines = open(path, encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise UsageError(f"{path}: cannot read points file: {exc.strerror}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(";")
        if len(parts) != 2:
            raise UsageError(f"{path}:{lineno}: expected 'x;p'")
        try:
            x, p = _vector(parts[0]), _vector(parts[1])
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from None
        if len(x) != n or len(p) != n:
            raise UsageError(f"{path}:{lineno}: x and p need {n} components each")
        points.append((np.asarray(x), np.asarray(p)))
    if not points:
        raise UsageError(f"{path}: no points")
    return points


def _points(spec, args):
    if args.points:
        if args.p is not None:
            raise UsageError("give either --p or --points, not both")
        return read_points(args.points, spec.n)
    if args.p is None:
        raise UsageError("--p or --points is required")
    if len(args.p) != spec.n:
        raise UsageError(f"--p needs {spec.n} components, got {len(args.p)}")
    return [(_position(spec, args.x), np.asarray(args.p, dtype=float))]


def _domain_entry(exc):
    return {"error": type(exc).__name__, "message": str(exc), "x": exc.x, "p": exc.p}


def eval_point(spec, x, p):
    b = evaluate(spec, EvalPoint.make(spec, x, p))
    return {
        "x": b.x,
        "p": b.p,
        "K": b.K,
        "a1": b.a[1],
        "a2": b.a[2],
        "gUp": b.gUp,
        "gDown": b.gDown,
        "detGUp": float(np.linalg.det(b.gUp)),
        "h": b.h,
        "C": b.C,
        "I": b.I,
    }


def curvatures_point(spec, x, p):
    pt = EvalPoint.make(spec, x, p)
    b = evaluate(spec, pt)
    jet = berwald_hierarchy(spec, pt, b, x_derivatives=True)
    r = curvature_report(spec, pt, b, jet)
    return {
        "x": pt.x,
        "p": pt.p,
        "K": b.K,
        "spray": {
            "G": jet.G,
            "G1": jet.G1,
            "G2": jet.G2,
            "G3": jet.G3,
            "residuals": list(jet.residuals),
            "contractionResidual": jet.contraction_residual,
            "factorizations": jet.factorizations,
        },
        "curvatures": {"L": r.L, "J": r.J, "E": r.E, "S": r.S, "H": r.H, "tau": r.tau},
        "norms": r.norms,
    }


def geodesic_point(spec, x, p, t_end, cfg):
    states = integrate(spec, x, p, t_end, cfg)
    return {
        "x0": x,
        "p0": p,
        "t": t_end,
        "steps": len(states) - 1,
        "maxDrift": max(s.drift for s in states),
        "columns": ["t"] + [f"x{i + 1}" for i in range(spec.n)] + [f"p{i + 1}" for i in range(spec.n)] + ["K", "drift"],
        "rows": [[s.t, *s.x, *s.p, s.K, s.drift] for s in states],
    }


def _pointwise(spec, args, fn):
    results, domain_error = [], False
    for x, p in _points(spec, args):
        try:
            results.append(fn(spec, x, p))
        except DomainError as exc:
            results.append(_domain_entry(exc))
            domain_error = True
    return results, (EXIT_DOMAIN if domain_error else EXIT_OK)


def run_command(argv):
    """Parse ``argv`` and execute; returns (exit code, report dict or None)."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return (EXIT_OK if exc.code == 0 else EXIT_USAGE), None
    return execute(args, argv)


def execute(args, argv):
    report = {"command": list(argv)}
    try:
        seed = resolve_seed(args)
        code = _dispatch(args, seed, report)
    except UsageError as exc:
        report["error"] = {"error": "UsageError", "message": str(exc)}
        code = EXIT_USAGE
    except DomainError as exc:
        report["error"] = _domain_entry(exc)
        code = EXIT_DOMAIN
    except (ResidualTooLarge, StepFailure, MRootError) as exc:
        report["error"] = {"error": type(exc).__name__, "message": str(exc)}
        code = EXIT_FAIL
    report["summary"] = {"status": {EXIT_OK: "PASS", EXIT_FAIL: "FAIL"}.get(code, "ERROR"), "exitCode": code}
    return code, report


def _metric_header(spec):
    return {"name": spec.name, "n": spec.n, "m": spec.m, "digest": spec_digest(spec)}


def _dispatch(args, seed, report):
    if args.command == "check":
        return _check(args, seed, report)
    spec = load_metric(args.metric)
    warn_if_low_degree(spec)
    report["metric"] = _metric_header(spec)
    if args.command == "eval":
        report["results"], code = _pointwise(spec, args, eval_point)
        return code
    if args.command == "curvatures":
        report["results"], code = _pointwise(spec, args, curvatures_point)
        return code
    if args.command == "geodesic":
        try:
            cfg = IntegratorConfig(rtol=args.rtol, atol=args.atol, max_steps=args.max_steps)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        report["tolerances"] = {"rtol": cfg.rtol, "atol": cfg.atol}
        report["results"], code = _pointwise(spec, args, lambda s, x, p: geodesic_point(s, x, p, args.t, cfg))
        return code
    x = _position(spec, args.x)
    report["seed"] = seed
    if args.samples < 8:
        raise UsageError("--samples must be at least 8")
    samples = make_samples(spec, x, count=args.samples, seed=seed)
    if args.command == "classify":
        result = classify(spec, samples)
        report["x"] = x
        report["results"] = result
        return EXIT_OK if result["consistency"]["passed"] else EXIT_FAIL
    result = fd_oracle(spec, samples)
    report["tolerances"] = dict(ORACLE_TOLERANCES)
    report["x"] = x
    report["results"] = result
    return EXIT_OK if result["passed"] else EXIT_FAIL


def _check(args, seed, report):
    targets = [(fixture(name), np.asarray(default_x(name), dtype=float)) for name in FIXTURES]
    if args.metric is not None:
        spec = load_metric(args.metric)
        targets.append((spec, _position(spec, args.x)))
    report["seed"] = seed
    results = []
    for spec, x in targets:
        entry = {"metric": _metric_header(spec)}
        try:
            entry.update(run_suite(spec, x, seed=seed))
        except DomainError as exc:
            entry["error"] = _domain_entry(exc)
            entry["passed"] = False
        results.append(entry)
    report["results"] = results
    failed = [r for r in results if not r["passed"]]
    if any("error" in r for r in failed):
        return EXIT_DOMAIN
    return EXIT_FAIL if failed else EXIT_OK


def _fmt(value):
    if isinstance(value, np.ndarray):
        return np.array2string(value, precision=15, max_line_width=160, floatmode="maxprec")
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_table(report, out):
    """Plain-text rendering; the geodesic rows become a fixed-width table."""

    def walk(obj, indent):
        pad = "  " * indent
        for key, value in obj.items():
            if key == "rows" and isinstance(value, list):
                cols = obj.get("columns", [])
                out.write(pad + "  ".join(f"{c:>22}" for c in cols) + "\n")
                for row in value:
                    out.write(pad + "  ".join(f"{v:>22.15g}" for v in row) + "\n")
            elif isinstance(value, dict):
                out.write(f"{pad}{key}:\n")
                walk(value, indent + 1)
            elif isinstance(value, list) and value and isinstance(value[0], dict):
                out.write(f"{pad}{key}:\n")
                for k, item in enumerate(value):
                    if "status" in item and "name" in item:
                        out.write(f"{pad}  [{item['status']}] {item.get('suite', '')} {item['name']}: "
                                  f"{_fmt(item['value'])} (tol {item['tol']:g})\n")
                    else:
                        out.write(f"{pad}  - [{k}]\n")
                        walk(item, indent + 2)
            elif key == "columns":
                continue
            else:
                text = _fmt(value)
                if "\n" in text:
                    out.write(f"{pad}{key}:\n" + "\n".join(pad + "  " + ln for ln in text.splitlines()) + "\n")
                else:
                    out.write(f"{pad}{key}: {text}\n")

    walk(report, 0)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    code, report = execute(args, argv)
    if args.format == "table":
        render_table(report, sys.stdout)
    else:
        sys.stdout.write(dump_report(report))
    if "error" in report:
        print(f"mroot: {report['error']['error']}: {report['error']['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
