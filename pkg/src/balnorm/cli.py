"""Command-line front end.

Verbs: ``mesh``, ``solve``, ``converge``, ``verify-operators`` and
``compare-norms``.  The exit code is 0 iff every verdict passes.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from .errors import BalnormError
from .fem import galerkin_solve
from .mesh import make_mesh
from .operators import global_points_1d
from .problems import CATALOG, get_problem
from .study import (OperatorConfig, StudyConfig, basis_for, compare_energy_vs_balanced, load_config_file,
                    run_operator_verification, run_study, write_outputs)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.replace(",", " ").split()]


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _print_verdicts(checks) -> None:
    for c in checks:
        val = c.get("value")
        val = f"{val:.4g}" if isinstance(val, float) else val
        print(f"{c['status']}  {c['name']}  value={val}  target={c.get('target')}", file=sys.stderr)


def cmd_mesh(args) -> int:
    mesh = make_mesh(args.kind, args.N, args.epsilon, args.sigma, dim=args.dim)
    _emit(mesh.to_json() + "\n" if args.format == "json" else mesh.to_text(), args.output)
    return 0


def cmd_solve(args) -> int:
    spec, _ = get_problem(args.problem, args.epsilon)
    basis = basis_for(spec.m, args.degree)
    mesh = make_mesh(args.kind, args.N, args.epsilon, args.sigma, dim=spec.dim)
    uN = galerkin_solve(spec, mesh, basis)
    out = _solution_csv(spec, mesh, basis, uN)
    _emit(out, args.output)
    return 0


def _solution_csv(spec, mesh, basis, uN) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if spec.dim == 1:
        x = np.asarray(mesh.nodes_x) if basis.family == "hermite" else global_points_1d(mesh.nodes_x, basis)
        w.writerow(["x", "u_h", "u_exact"])
        for xi, a, b in zip(x, uN(x), spec.u_exact(x)):
            w.writerow([repr(float(xi)), repr(float(a)), repr(float(b))])
    else:
        g = global_points_1d(mesh.nodes_x, basis)
        X, Y = np.meshgrid(g, g, indexing="xy")
        w.writerow(["x", "y", "u_h", "u_exact"])
        for xi, yi, a, b in zip(X.ravel(), Y.ravel(), uN(X.ravel(), Y.ravel()), spec.u_exact(X.ravel(), Y.ravel())):
            w.writerow([repr(float(xi)), repr(float(yi)), repr(float(a)), repr(float(b))])
    return buf.getvalue()


def _study_config(args) -> StudyConfig:
    data = load_config_file(args.config) if args.config else {}
    overrides = {
        "problem": args.problem, "mesh_kind": args.kind, "sigma": args.sigma, "degree": args.degree,
        "n_list": _ints(args.n_list) if args.n_list else None,
        "epsilon_list": _floats(args.epsilon_list) if args.epsilon_list else None,
        "regions": args.regions.split(",") if args.regions else None,
        "csv_path": args.csv, "json_path": args.json, "quad_order": args.quad_order,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.allow_small_sigma:
        data["allow_small_sigma"] = True
    if args.allow_large_2d:
        data["allow_large_2d"] = True
    return StudyConfig.from_dict(data)


def cmd_converge(args) -> int:
    config = _study_config(args)
    report = run_study(config)
    write_outputs(report, config.csv_path, config.json_path)
    if not config.csv_path and not config.json_path:
        sys.stdout.write(report.to_csv())
    _print_verdicts(report.verdicts)
    return 0 if report.all_pass else 1


def cmd_verify(args) -> int:
    cfg = OperatorConfig(epsilon=args.epsilon)
    if args.n_list:
        cfg.n_list = _ints(args.n_list)
    result = run_operator_verification(cfg)
    _emit(json.dumps(result, indent=2, sort_keys=True) + "\n", args.output)
    _print_verdicts(result["checks"])
    return 0 if result["all_pass"] else 1


def cmd_compare(args) -> int:
    result = compare_energy_vs_balanced(args.problem, args.kind, args.degree, _floats(args.epsilon_list),
                                        args.N, args.sigma)
    _emit(json.dumps(result, indent=2, sort_keys=True) + "\n", args.output)
    _print_verdicts(result["checks"])
    return 0 if result["all_pass"] else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="balnorm", description="Balanced-norm convergence studies on S-type meshes.")
    sub = ap.add_subparsers(dest="verb", required=True)

    def mesh_args(p, sigma_default=2.0):
        p.add_argument("--kind", default="shishkin", help="shishkin or bakhvalov-s")
        p.add_argument("--sigma", type=float, default=sigma_default)

    p = sub.add_parser("mesh", help="emit an S-type mesh")
    mesh_args(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--dim", type=int, default=1, choices=(1, 2))
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("solve", help="single Galerkin solve, solution CSV")
    mesh_args(p)
    p.add_argument("--problem", choices=sorted(CATALOG), required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("converge", help="convergence study with rate verdicts")
    p.add_argument("--config", help="TOML or JSON file with StudyConfig keys")
    p.add_argument("--problem", choices=sorted(CATALOG))
    p.add_argument("--kind", dest="kind")
    p.add_argument("--sigma", type=float)
    p.add_argument("--degree", type=int)
    p.add_argument("--n-list", help="e.g. 16,32,64")
    p.add_argument("--epsilon-list", help="e.g. 1e-4,1e-6")
    p.add_argument("--regions", help="comma separated subset of all,coarse,complement,ply,layer")
    p.add_argument("--csv")
    p.add_argument("--json")
    p.add_argument("--quad-order", type=int)
    p.add_argument("--allow-small-sigma", action="store_true")
    p.add_argument("--allow-large-2d", action="store_true")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("verify-operators", help="rate checks for I, pi and P (JSON)")
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--n-list")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare-norms", help="energy vs balanced error across epsilon")
    p.add_argument("--problem", choices=sorted(CATALOG), default="rd1d-const")
    p.add_argument("--kind", default="shishkin")
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--sigma", type=float)
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--epsilon-list", default="1e-4,1e-6,1e-8")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BalnormError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
