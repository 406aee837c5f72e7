"""Command-line entry point.

    toricsolitons catalog
    toricsolitons check --polytope CP2 --field guillemin
    toricsolitons futaki --polytope Bl1CP2 --a 0.2 0.2 0
    toricsolitons soliton-vf --polytope Bl1CP2
    toricsolitons deform --polytope CP2 --t 0.1
    toricsolitons solve --polytope Bl1CP2 --auto-vf
    toricsolitons report --out runs/

Every command prints its run report as JSON and writes it to
``<out>/<command>.json``.  Exit status: 0 success, 1 input error, 2 a
requested tolerance was not met.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import curvature, deform, polytope, solve
from .futaki import SolverError, futaki_vector, normalization_residual, solve_soliton_vf
from .field import (check_boundary_conditions, dump_field, field_from_potential, grid_field,
                    guillemin_field, polynomial_field, read_field_csv)

log = logging.getLogger("toricsolitons")

EXIT_OK, EXIT_INPUT, EXIT_TOLERANCE = 0, 1, 2

DEFAULTS = {
    "polytope": "CP2",
    "out": None,
    "tol": 1e-8,
    "grid": 24,
    "seed": 0,
}


class InputError(Exception):
    pass


def _polytope_hash(P) -> str:
    text = json.dumps(P.to_dict(), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _clean(obj):
    """Make numpy scalars/arrays JSON-serializable."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def _load(args):
    try:
        return polytope.load_polytope(args.polytope)
    except polytope.PolytopeError as exc:
        raise InputError(str(exc)) from None


def _soliton_vector(args, P):
    if getattr(args, "auto_vf", False):
        a, _ = solve_soliton_vf(P)
        return a
    if getattr(args, "a", None):
        if len(args.a) != P.dim + 1:
            raise InputError(f"--a needs {P.dim + 1} numbers for a {P.dim}-dimensional polytope")
        return curvature.SolitonVector(tuple(args.a))
    return curvature.SolitonVector.zero(P.dim)


def _field(args, P):
    source = args.field
    if source == "guillemin":
        return field_from_potential(guillemin_field(P))
    if source == "identity":
        n = P.dim
        return polynomial_field((np.eye(n), np.zeros((n,) * 3), np.zeros((n,) * 4)), name="identity")
    path = Path(source)
    if path.exists():
        Z, H = read_field_csv(path)
        return grid_field(Z, H, polytope=P)
    raise InputError(f"unknown field source {source!r} (guillemin | identity | <csv path>)")


# --- commands -----------------------------------------------------------------


def cmd_catalog(args):
    rows = []
    for name in polytope.catalog_names():
        P = polytope.load_polytope(name)
        rows.append({"name": name, "dim": P.dim, "facets": len(P.facets),
                     "vertices": len(polytope.vertices(P)),
                     "delzant": polytope.is_delzant(P)[0], "reflexive": polytope.is_reflexive(P)})
    return {"polytopes": rows}, EXIT_OK


def cmd_check(args):
    P = _load(args)
    H = _field(args, P)
    a = _soliton_vector(args, P)
    grid = polytope.interior_grid(P, args.grid, 0.05)
    samples = curvature.sweep(H, a, grid)
    sc = np.array([s.s_c for s in samples])
    sx = np.array([s.s_c_xi for s in samples])
    sd = np.array([s.s_c_xi_div for s in samples])
    S = np.array([s.soliton_residual for s in samples])
    K = np.array([s.kahler_defect_norm for s in samples])
    bc = check_boundary_conditions(H, P, tolerance=max(args.tol, 1e-6))
    residuals = {
        "soliton_residual_sup": float(np.max(np.abs(S))),
        "s_c_xi_sup": float(np.max(np.abs(sx))),
        "s_c_xi_deviation": float(np.max(np.abs(sx - sx.mean()))),
        "kahler_defect_sup": float(np.max(K)),
        "identity_gap": float(np.max(np.abs(sx - sd))),
    }
    outputs = {"s_c_mean": float(sc.mean()), "s_c_min": float(sc.min()), "s_c_max": float(sc.max()),
               "s_c_xi_mean": float(sx.mean()), "boundary": bc.to_dict(), "grid_points": len(grid)}
    failed = []
    if not bc.passed:
        failed.append("boundary_conditions")
    if residuals["identity_gap"] > args.tol:
        failed.append("identity")
    for req in args.require or []:
        key = {"soliton": "soliton_residual_sup", "geakrs": "s_c_xi_sup", "kahler": "kahler_defect_sup"}[req]
        if residuals[key] > args.tol:
            failed.append(req)
    outputs["failed"] = failed
    if args.out:
        path = Path(args.out) / "check_samples.csv"
        path.write_text(curvature.samples_to_csv(samples))
        outputs["files"] = [str(path)]
    return {"outputs": outputs, "residuals": residuals,
            "inputs": {"field": args.field, "a": list(a.a)}}, EXIT_TOLERANCE if failed else EXIT_OK


def cmd_futaki(args):
    P = _load(args)
    a = _soliton_vector(args, P)
    F = futaki_vector(P, a)
    labels = ["1"] + [f"z{k + 1}" for k in range(P.dim)]
    report = {"a": list(a.a), "F": dict(zip(labels, F.tolist())),
              "normalization_residual": normalization_residual(P, a), "iterations": 0}
    return {"outputs": report, "inputs": {"a": list(a.a)}}, EXIT_OK


def cmd_soliton_vf(args):
    P = _load(args)
    try:
        a, rep = solve_soliton_vf(P, tol=min(args.tol, 1e-10))
        code = EXIT_OK
    except SolverError as exc:
        rep, code = exc.report, EXIT_TOLERANCE
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out = rep.to_dict()
    return {"outputs": out, "residuals": {"F_sup": max(abs(v) for v in rep.F.values())}}, code


def cmd_deform(args):
    P = _load(args)
    a = _soliton_vector(args, P)
    H = field_from_potential(guillemin_field(P))
    try:
        spec = deform.default_spec(P, a, pair=tuple(args.pair), half_width=args.half_width)
        fam = deform.build_deformation(H, a, spec, P, require_soliton=not args.allow_non_soliton)
    except deform.DeformationError as exc:
        raise InputError(str(exc)) from None
    ts = args.t if args.t else [0.5 * fam.t_minus, 0.5 * fam.t_plus]
    for t in ts:
        if not fam.t_minus < t < fam.t_plus:
            raise InputError(f"t = {t} outside admissible interval ({fam.t_minus:.4g}, {fam.t_plus:.4g})")
    rep = deform.verify_family(fam, t_samples=ts)
    files = []
    if args.out and args.dump:
        grid = polytope.interior_grid(P, args.grid, 0.05)
        for t in ts:
            path = Path(args.out) / f"deform_field_t{t:+.4g}.csv"
            dump_field(fam.at(t), grid, path)
            files.append(str(path))
    rep["files"] = files
    rep["spec"] = json.loads(spec.to_json())
    worst = max(s["s_c_xi_drift"] for s in rep["samples"])
    ok = rep["divergence_residual"] < 1e-10 and worst < args.tol and all(
        s["positivity_margin"] > 0 and s["boundary_same"] for s in rep["samples"])
    residuals = {"divergence_residual": rep["divergence_residual"], "s_c_xi_drift": worst}
    return {"outputs": rep, "residuals": residuals, "inputs": {"a": list(a.a), "t": ts}}, \
        EXIT_OK if ok else EXIT_TOLERANCE


def cmd_solve(args):
    P = _load(args)
    a = _soliton_vector(args, P)
    if P.dim == 1 and args.method == "auto":
        res = solve.solve_1d(P, a)
    else:
        cfg = solve.SolveConfig(resolution=args.resolution, tol=args.tol, max_iter=args.max_iter,
                                degree=args.degree, seed=args.seed)
        try:
            res = solve.solve_newton(P, a, cfg)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    out = res.to_dict()
    if args.out and args.dump:
        path = Path(args.out) / "solve_field.csv"
        dump_field(res.field, polytope.interior_grid(P, args.grid, 0.05), path)
        out["files"] = [str(path)]
    code = EXIT_OK if res.converged or res.reduction >= args.min_reduction else EXIT_TOLERANCE
    return {"outputs": out, "residuals": {"final": res.history[-1], "reduction": res.reduction},
            "inputs": {"a": list(a.a)}}, code


def cmd_report(args):
    if not args.out:
        raise InputError("report needs --out pointing at a run directory")
    rows = []
    for path in sorted(Path(args.out).glob("*.json")):
        if path.name == "report.json":
            continue
        data = json.loads(path.read_text())
        rows.append({"file": path.name, "command": data.get("command"),
                     "polytope": data.get("inputs", {}).get("polytope"),
                     "exit_code": data.get("exit_code"), "residuals": data.get("residuals", {})})
    return {"runs": rows}, EXIT_OK


COMMANDS = {
    "catalog": cmd_catalog,
    "check": cmd_check,
    "futaki": cmd_futaki,
    "soliton-vf": cmd_soliton_vf,
    "deform": cmd_deform,
    "solve": cmd_solve,
    "report": cmd_report,
}


def _global_flags(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--polytope", default=d(None), help="catalog name or JSON path")
    parser.add_argument("--out", default=d(None), help="directory for reports and CSV dumps")
    parser.add_argument("--config", default=d(None), help="JSON config file (flags take precedence)")
    parser.add_argument("--tol", type=float, default=d(None))
    parser.add_argument("--grid", type=int, default=d(None), help="grid resolution per axis")
    parser.add_argument("--seed", type=int, default=d(None))
    parser.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toricsolitons", description=__doc__.split("\n")[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kw):
        p = sub.add_parser(name, **kw)
        _global_flags(p, suppress=True)
        return p

    add("catalog", help="list shipped polytopes")
    p = add("check", help="curvature sweep of a metric field")
    p.add_argument("--field", default="guillemin", help="guillemin | identity | <csv path>")
    p.add_argument("--a", type=float, nargs="+")
    p.add_argument("--auto-vf", action="store_true")
    p.add_argument("--require", nargs="*", choices=["soliton", "geakrs", "kahler"])

    p = add("futaki", help="Futaki invariant on the affine basis")
    p.add_argument("--a", type=float, nargs="+")
    p.add_argument("--auto-vf", action="store_true")

    add("soliton-vf", help="solve for the soliton vector field")

    p = add("deform", help="strictly almost-Kahler deformation of the Guillemin soliton")
    p.add_argument("--t", type=float, nargs="*")
    p.add_argument("--a", type=float, nargs="+")
    p.add_argument("--auto-vf", action="store_true")
    p.add_argument("--pair", type=int, nargs=2, default=[0, 1])
    p.add_argument("--half-width", type=float, default=0.3)
    p.add_argument("--allow-non-soliton", action="store_true")
    p.add_argument("--dump", action="store_true", help="write H_t field CSVs")

    p = add("solve", help="collocation Newton for a soliton potential")
    p.add_argument("--a", type=float, nargs="+")
    p.add_argument("--auto-vf", action="store_true")
    p.add_argument("--resolution", type=int, default=16)
    p.add_argument("--degree", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=25)
    p.add_argument("--min-reduction", type=float, default=100.0)
    p.add_argument("--method", choices=["auto", "newton"], default="auto")
    p.add_argument("--dump", action="store_true", help="write the solved H field CSV")

    add("report", help="summarize the run reports in --out")
    return parser


def _resolve(args):
    config = {}
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
    for key, default in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, config.get(key, default))
    return config


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    start = time.perf_counter()
    try:
        config = _resolve(args)
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
        body, code = COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    report = {"command": args.command, "exit_code": code}
    inputs = body.pop("inputs", {})
    if args.command not in ("catalog", "report"):
        P = polytope.load_polytope(args.polytope)
        inputs = {"polytope": P.name or str(args.polytope), "polytope_sha256": _polytope_hash(P),
                  **inputs}
    inputs["config"] = {"tol": args.tol, "grid": args.grid, "seed": args.seed, **config}
    report["inputs"] = inputs
    report.update(body)
    report["timing"] = {"wall_time": time.perf_counter() - start}
    text = json.dumps(_clean(report), indent=2, sort_keys=True)
    print(text)
    if args.out:
        (Path(args.out) / f"{args.command}.json").write_text(text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
