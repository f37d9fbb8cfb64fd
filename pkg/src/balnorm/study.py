"""Convergence studies, operator checks and norm comparisons with verdicts.

Each (N, eps) case builds an S-type mesh, solves the Galerkin problem and
measures the total error ``u - u^N`` together with its split into the
interpolation error ``eta = u - P u`` and the discrete error
``xi = P u - u^N``.  Rates are fitted against ``1/N``, ``ln N / N`` and the
mesh factor ``h + max|psi'| / N``.

Outputs are deterministic: rows are ordered by (N, eps), floats are written
in shortest round-trip form and JSON keys are sorted.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .basis import gauss_legendre, hermite, lagrange_gl
from .errors import BalnormError, ConfigError
from .fem import galerkin_solve
from .functions import Cos, Poly, Sum
from .mesh import CellKind, make_mesh
from .norms import REGIONS, norm_of_difference, rate_fit
from .operators import (boundary_trace_error, chi_tau, hybrid_P_for_problem, interpolate_hermite,
                        layer_P, linf_stability_estimate, ritz_projection)
from .problems import ATildeTerm, get_problem

CSV_HEADER = ["problem", "mesh", "p", "sigma", "N", "epsilon", "lambda", "h", "max_psi_prime",
              "norm_kind", "region", "component", "value"]
COMPONENTS = ("total", "eta", "xi")
SCALES = ("N_inv", "N_inv_logN", "mesh_factor")
RATE_TOL = 0.25
PAIRWISE_TOL = 0.35
TRIANGLE_TOL = 1e-9
EPS_SPREAD = 0.20
MAX_2D_N = 64


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


@dataclass
class StudyConfig:
    """One convergence study; field names double as config-file keys."""

    problem: str = "rd1d-const"
    mesh_kind: str = "shishkin"
    sigma: float = 2.0
    degree: int = 1
    n_list: list = field(default_factory=lambda: [16, 32, 64, 128, 256])
    epsilon_list: list = field(default_factory=lambda: [1e-6])
    norms: list = field(default_factory=lambda: ["l2", "h1_semi", "l_inf", "energy", "balanced"])
    regions: list = field(default_factory=lambda: ["all"])
    csv_path: str | None = None
    json_path: str | None = None
    quad_order: int | None = None
    allow_small_sigma: bool = False
    allow_large_2d: bool = False

    def validate(self) -> None:
        if not self.n_list:
            raise ConfigError("n_list must not be empty")
        ns = [int(n) for n in self.n_list]
        if any(n <= 0 or n % 4 for n in ns):
            raise ConfigError(f"every N must be a positive multiple of 4, got {ns}")
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError(f"n_list must be strictly ascending, got {ns}")
        if not self.epsilon_list:
            raise ConfigError("epsilon_list must not be empty")
        spec, _ = get_problem(self.problem, float(self.epsilon_list[0]))
        if spec.m == 2 and self.degree != 3:
            raise ConfigError("m = 2 problems use cubic Hermite elements: degree must be 3")
        if spec.m == 1 and self.degree < 1:
            raise ConfigError(f"degree must be >= 1, got {self.degree}")
        if self.sigma < self.degree + 1 and not self.allow_small_sigma:
            raise ConfigError(f"sigma = {self.sigma} < p + 1 = {self.degree + 1}; "
                              "pass allow_small_sigma to override")
        if spec.dim == 2 and max(ns) > MAX_2D_N and not self.allow_large_2d:
            raise ConfigError(f"2D studies are capped at N = {MAX_2D_N}; pass allow_large_2d to override")
        bad = [r for r in self.regions if r not in REGIONS]
        if bad:
            raise ConfigError(f"unknown regions {bad}; choose from {REGIONS}")

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str) -> "StudyConfig":
        return cls.from_dict(load_config_file(path))


def load_config_file(path: str) -> dict:
    if str(path).endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path) as fh:
        return json.load(fh)


def basis_for(problem_m: int, degree: int):
    return hermite(2) if problem_m == 2 else lagrange_gl(degree)


def verdict(name: str, ok: bool, value=None, target=None, detail: str = "") -> dict:
    return {"name": name, "status": "PASS" if ok else "FAIL", "value": value, "target": target,
            "detail": detail}


# ------------------------------------------------------------------ study

@dataclass
class ConvergenceReport:
    config: dict
    rows: list
    rates: dict
    verdicts: list

    @property
    def all_pass(self) -> bool:
        return all(v["status"] == "PASS" for v in self.verdicts)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        c = self.config
        for row in self.rows:
            if row["status"] != "ok":
                continue
            meta = [c["problem"], c["mesh_kind"], c["degree"], _fmt(float(c["sigma"])), row["N"],
                    _fmt(row["epsilon"]), _fmt(row["lambda"]), _fmt(row["h"]), _fmt(row["max_psi_prime"])]
            for comp in COMPONENTS:
                for region, rep in row["norms"][comp].items():
                    for kind, val in rep.items():
                        w.writerow(meta + [kind, region, comp, _fmt(val)])
        return buf.getvalue()


def _report_values(rep, wanted) -> dict:
    vals = dict(rep.items())
    return {k: float(vals[k]) for k in wanted if k in vals}


def run_case(spec, mesh, basis, regions, norms, quad=None) -> dict:
    """Norms of u - u^N, eta and xi for one mesh."""
    uN = galerkin_solve(spec, mesh, basis, quad)
    Pu = hybrid_P_for_problem(spec, mesh, basis, quad).result
    xi = Pu.with_coeffs(Pu.coeffs - uN.coeffs)
    parts = {"total": (spec.u_exact, uN), "eta": (spec.u_exact, Pu), "xi": (xi, None)}
    out = {}
    for comp, (a, b) in parts.items():
        out[comp] = {}
        for region in regions:
            rep = norm_of_difference(a, b, mesh, region, spec.m, spec.k, spec.epsilon, quad, basis.degree)
            out[comp][region] = _report_values(rep, norms)
    return out


def run_study(config: StudyConfig) -> ConvergenceReport:
    """Run every (N, eps) case of ``config``; failures become rows with an error status."""
    config.validate()
    quad = gauss_legendre(config.quad_order) if config.quad_order else None
    norms = list(dict.fromkeys(list(config.norms) + ["balanced"]))
    regions = list(dict.fromkeys(["all"] + list(config.regions)))
    rows = []
    for N in sorted(int(n) for n in config.n_list):
        for eps in sorted(float(e) for e in config.epsilon_list):
            row = {"N": N, "epsilon": eps, "status": "ok"}
            try:
                spec, _ = get_problem(config.problem, eps)
                basis = basis_for(spec.m, config.degree)
                mesh = make_mesh(config.mesh_kind, N, eps, config.sigma, dim=spec.dim)
                row.update({"lambda": mesh.lam, "h": mesh.h, "max_psi_prime": mesh.max_psi_prime,
                            "mesh_factor": mesh.rate_factor})
                row["norms"] = run_case(spec, mesh, basis, regions, norms, quad)
            except BalnormError as exc:
                row["status"] = f"error: {type(exc).__name__}: {exc}"
            rows.append(row)
    m = get_problem(config.problem, float(config.epsilon_list[0]))[0].m
    cfg = asdict(config)
    # output locations do not affect results; keep them out so reports are byte-identical
    cfg.pop("csv_path")
    cfg.pop("json_path")
    cfg["m"] = m
    rates = fit_rates(rows)
    return ConvergenceReport(cfg, rows, rates, evaluate_verdicts(cfg, rows, rates))


def fit_rates(rows) -> dict:
    """Fitted exponents per eps, component and norm kind on every scale (region ``all``)."""
    out = {}
    ok = [r for r in rows if r["status"] == "ok"]
    for eps in sorted({r["epsilon"] for r in ok}):
        sub = [r for r in ok if r["epsilon"] == eps]
        if len(sub) < 2:
            continue
        factors = {r["N"]: r["mesh_factor"] for r in sub}
        per_eps = {}
        for comp in COMPONENTS:
            for kind in sub[0]["norms"][comp]["all"]:
                pairs = [(r["N"], r["norms"][comp]["all"][kind]) for r in sub]
                if any(not e > 0 for _, e in pairs):
                    continue
                for scale in SCALES:
                    fit = rate_fit(pairs, factors if scale == "mesh_factor" else scale)
                    per_eps[f"{comp}/{kind}/{scale}"] = {"exponent": fit.exponent,
                                                        "pairwise": list(fit.pairwise)}
        out[_fmt(eps)] = per_eps
    return out


def rate_target(cfg: dict) -> tuple[str, float]:
    if cfg["m"] == 1:
        return "rate_m1", float(cfg["degree"])
    return "rate_m2", float(cfg["degree"] + 1 - cfg["m"])


def verdict_scale(mesh_kind: str) -> str:
    return "N_inv_logN" if mesh_kind.lower() == "shishkin" else "N_inv"


def evaluate_verdicts(cfg: dict, rows: list, rates: dict) -> list:
    """Pure verdict logic over saved rows and rates."""
    out = []
    bad = [r for r in rows if r["status"] != "ok"]
    out.append(verdict("all_cases_ran", not bad, len(bad), 0,
                       "; ".join(f"N={r['N']} eps={r['epsilon']}: {r['status']}" for r in bad)))
    name, target = rate_target(cfg)
    scale = verdict_scale(cfg["mesh_kind"])
    for eps_key, per in sorted(rates.items(), key=lambda kv: float(kv[0])):
        fit = per.get(f"total/balanced/{scale}")
        if fit is None:
            continue
        ok = abs(fit["exponent"] - target) <= RATE_TOL and abs(fit["pairwise"][-1] - target) <= PAIRWISE_TOL
        out.append(verdict(f"{name}[eps={eps_key}]", ok, fit["exponent"], target,
                           f"balanced vs {scale}; last pairwise {fit['pairwise'][-1]:.3f}"))
    worst = 0.0
    for r in rows:
        if r["status"] == "ok":
            n = r["norms"]
            gap = n["total"]["all"]["balanced"] - n["eta"]["all"]["balanced"] - n["xi"]["all"]["balanced"]
            worst = max(worst, gap)
    out.append(verdict("triangle_consistency", worst <= TRIANGLE_TOL, worst, TRIANGLE_TOL,
                       "max of |u-u^N|_b - |eta|_b - |xi|_b"))
    eps_values = sorted({r["epsilon"] for r in rows if r["status"] == "ok"})
    if len(eps_values) > 1:
        spread = 0.0
        for N in sorted({r["N"] for r in rows}):
            vals = [r["norms"]["total"]["all"]["balanced"] for r in rows if r["N"] == N and r["status"] == "ok"]
            if len(vals) > 1:
                spread = max(spread, max(vals) / min(vals) - 1.0)
        out.append(verdict("eps_uniformity", spread <= EPS_SPREAD, spread, EPS_SPREAD,
                           "max over N of balanced max/min - 1 across eps"))
    return out


def write_outputs(report: ConvergenceReport, csv_path=None, json_path=None) -> None:
    if csv_path:
        with open(csv_path, "w") as fh:
            fh.write(report.to_csv())
    if json_path:
        with open(json_path, "w") as fh:
            fh.write(report.to_json())


# ----------------------------------------------------- operator verification

@dataclass
class OperatorConfig:
    epsilon: float = 1e-6
    n_list: list = field(default_factory=lambda: [16, 32, 64, 128])
    n_list_2d: list = field(default_factory=lambda: [16, 32, 64])
    n_list_pw: list = field(default_factory=lambda: [16, 32, 64])
    stability_bound: float = 3.0


def _rate_check(name, pairs, scale, lower=None, target=None, detail=""):
    fit = rate_fit(pairs, scale)
    if target is not None:
        ok = abs(fit.exponent - target) <= RATE_TOL
        tgt = target
    else:
        ok = fit.exponent >= lower
        tgt = lower
    v = verdict(name, ok, fit.exponent, tgt, detail)
    v["errors"] = [[n, e] for n, e in pairs]
    v["pairwise"] = list(fit.pairwise)
    return v


def _trace_check(cfg, p):
    spec, decomp = get_problem("rd1d-varc", cfg.epsilon)
    c = spec.a_tilde[0].weight
    pairs = [(N, boundary_trace_error(decomp.v, make_mesh("shishkin", N, cfg.epsilon, p + 1), lagrange_gl(p), c))
             for N in cfg.n_list]
    return _rate_check(f"trace_p{p}", pairs, "N_inv", lower=p + 0.7,
                       detail="|Iv - pi v| on the boundary of Omega_c vs 1/N")


def ritz_test_function():
    """sin^2(pi x), written as 1/2 - cos(2 pi x) / 2."""
    return Sum([Poly([0.5]), Cos(-0.5, 2.0 * math.pi)])


def ritz_error(mesh, v=None, n_samples: int = 4001) -> float:
    v = v or ritz_test_function()
    pv = ritz_projection(v, mesh, (ATildeTerm(1, None),), 2, 1)
    xs = np.linspace(*mesh.omega_c, n_samples)
    return float(np.max(np.abs(pv(xs) - v(xs))))


def _ritz(cfg):
    pairs = [(N, ritz_error(make_mesh("shishkin", N, cfg.epsilon, 4))) for N in cfg.n_list]
    return _rate_check("ritz_m2_k1", pairs, "N_inv", lower=3.7, detail="|v - pi v|_inf on Omega_c vs 1/N")


def ply_pw_error(mesh, w, n_samples: int = 2001) -> float:
    """max over both ply cells of the W^{1,inf} norm of I w - P w (m = 2)."""
    b = hermite(2)
    diff = interpolate_hermite(w, mesh, b) - layer_P(w, mesh, b, 2)
    worst = 0.0
    for i in np.flatnonzero(mesh.cell_kinds() == CellKind.PLY):
        xs = np.linspace(mesh.nodes_x[i], mesh.nodes_x[i + 1], n_samples)
        cells = np.full(xs.shape, i)
        worst = max(worst, float(np.max(np.abs(diff(xs, 0, cells=cells)))),
                    float(np.max(np.abs(diff(xs, 1, cells=cells)))))
    return worst


def _pw(cfg, sigma=4):
    _, decomp = get_problem("fourth1d-k1", cfg.epsilon)
    pairs = [(N, ply_pw_error(make_mesh("shishkin", N, cfg.epsilon, sigma), decomp.w[0])) for N in cfg.n_list_pw]
    return _rate_check("pw_error_m2_k1", pairs, "N_inv", lower=sigma - 1 - 0.3,
                       detail="|Iw - Pw|_{W1,inf} on ply cells vs 1/N")


def interpolation_error_pairs(problem_id, degree, sigma, eps, n_list):
    spec, _ = get_problem(problem_id, eps)
    basis = basis_for(spec.m, degree)
    pairs, tags_ok = [], True
    for N in n_list:
        mesh = make_mesh("shishkin", N, eps, sigma, dim=spec.dim)
        out = hybrid_P_for_problem(spec, mesh, basis)
        tags_ok &= bool(np.array_equal(out.region_tags, mesh.cell_kinds()))
        rep = norm_of_difference(spec.u_exact, out.result, mesh, "all", spec.m, spec.k, eps, degree=basis.degree)
        pairs.append((N, rep.balanced))
    return pairs, tags_ok


def _interp_check(cfg, problem_id, degree, n_list, name):
    spec, _ = get_problem(problem_id, cfg.epsilon)
    target = degree if spec.m == 1 else spec.m
    sigma = degree + 1
    pairs, tags_ok = interpolation_error_pairs(problem_id, degree, sigma, cfg.epsilon, n_list)
    v = _rate_check(name, pairs, "N_inv_logN", target=target,
                    detail=f"|u - Pu|_b vs ln N / N, {problem_id}, sigma={sigma}")
    return v, verdict(f"{name}_branch_tags", tags_ok, detail="P branch per cell matches mesh classification")


def check_chi_tau(N: int = 16, eps: float = 1e-6, degrees=(1, 2)) -> dict:
    """Nodal values of chi_tau on all ply cells in 1D and 2D."""
    problems = []
    for p in degrees:
        b = lagrange_gl(p)
        for dim in (1, 2):
            mesh = make_mesh("shishkin", N, eps, p + 1, dim=dim)
            lam, lam2 = mesh.omega_c
            kinds = {"edge": 0, "corner": 0}
            for cell in np.flatnonzero(mesh.cell_kinds() == CellKind.PLY):
                chi = chi_tau(mesh, int(cell), b)
                g = chi.grid
                if dim == 1:
                    x = _gl_points(g.nodes_x, b)
                    expect = (np.isclose(x, lam, rtol=0, atol=1e-14) | np.isclose(x, lam2, rtol=0, atol=1e-14))
                    if not np.array_equal(chi.coeffs.astype(bool), expect):
                        problems.append(f"1D p={p} cell {cell}")
                    continue
                X, Y = np.meshgrid(_gl_points(g.nodes_x, b), _gl_points(g.nodes_y, b), indexing="xy")
                on = _on_square_boundary(X, Y, lam, lam2)
                if not np.array_equal(chi.coeffs.astype(bool), on.ravel()):
                    problems.append(f"2D p={p} cell {cell}")
                n_on = int(np.count_nonzero(on))
                if n_on == 1:
                    kinds["corner"] += 1
                elif n_on == p + 1:
                    kinds["edge"] += 1
                else:
                    problems.append(f"2D p={p} cell {cell}: {n_on} boundary nodes")
            if dim == 2 and (kinds["corner"] != 4 or kinds["edge"] != 4 * (N // 2)):
                problems.append(f"2D p={p}: ply types {kinds}")
    return verdict("chi_tau_nodal_values", not problems, len(problems), 0, "; ".join(problems))


def _gl_points(nodes, basis):
    a, b = nodes[0], nodes[-1]
    return a + 0.5 * (basis.nodes + 1.0) * (b - a)


def _on_square_boundary(X, Y, lo, hi, tol=1e-14):
    def near(z, c):
        return np.abs(z - c) <= tol

    in_x = (X >= lo - tol) & (X <= hi + tol)
    in_y = (Y >= lo - tol) & (Y <= hi + tol)
    return ((near(X, lo) | near(X, hi)) & in_y) | ((near(Y, lo) | near(Y, hi)) & in_x)


def check_ply_width(eps: float = 1e-6, n_list=(16, 32, 64, 128, 256), sigmas=(2, 3, 4)) -> dict:
    """The ply width used by P equals mesh.h and h >= 4 sigma eps ln N / N."""
    worst = math.inf
    for kind in ("shishkin", "bakhvalov-s"):
        for s in sigmas:
            for N in n_list:
                mesh = make_mesh(kind, N, eps, s)
                ply = np.flatnonzero(mesh.cell_kinds() == CellKind.PLY)
                widths = np.diff(mesh.nodes_x)[ply]
                # the mirrored right ply width carries rounding of order eps_mach
                if not np.allclose(widths, mesh.h, rtol=1e-12, atol=8 * np.finfo(float).eps):
                    return verdict("ply_width", False, float(widths[0]), mesh.h, f"{kind} N={N}")
                bound = 4 * s * eps * math.log(N) / N
                worst = min(worst, mesh.h / bound)
    return verdict("ply_width", worst >= 1 - 1e-12, worst, 1.0, "min of h / (4 sigma eps ln N / N)")


def run_operator_verification(config: OperatorConfig | None = None) -> dict:
    """Rate and structure checks for the interpolation, projection and hybrid operators."""
    cfg = config or OperatorConfig()
    checks = [_trace_check(cfg, 1), _trace_check(cfg, 2), _ritz(cfg), _pw(cfg)]
    for problem_id, degree, n_list, name in (
            ("rd1d-const", 1, cfg.n_list, "interp_p1"),
            ("rd1d-const", 2, cfg.n_list, "interp_p2"),
            ("rd2d-tensor", 1, cfg.n_list_2d, "interp_2d_p1"),
            ("fourth1d-k1", 3, cfg.n_list, "interp_m2_k1")):
        checks.extend(_interp_check(cfg, problem_id, degree, n_list, name))
    checks.append(check_chi_tau(eps=cfg.epsilon))
    checks.append(check_ply_width(cfg.epsilon))
    for p in (1, 2):
        est = linf_stability_estimate(make_mesh("shishkin", 64, cfg.epsilon, p + 1), lagrange_gl(p))
        checks.append(verdict(f"pi_linf_stability_p{p}", est <= cfg.stability_bound, est, cfg.stability_bound,
                              "sampled lower bound of the L_inf operator norm of pi"))
    return {"config": asdict(cfg), "checks": checks, "all_pass": all(c["status"] == "PASS" for c in checks)}


# ------------------------------------------------------- norm comparisons

def compare_energy_vs_balanced(problem: str = "rd1d-const", mesh_kind: str = "shishkin", degree: int = 1,
                               epsilon_list=(1e-4, 1e-6, 1e-8), N: int = 64, sigma: float | None = None,
                               n_list=(16, 32, 64, 128)) -> dict:
    """Energy and balanced errors per eps at fixed N, with scaling verdicts.

    The energy-norm error should shrink like eps^{1/2} while the balanced
    error stays put.  For m = 2 the energy rate in ``ln N / N`` is also fitted.
    """
    spec0, _ = get_problem(problem, float(epsilon_list[0]))
    basis = basis_for(spec0.m, degree)
    sigma = sigma if sigma is not None else degree + 1
    table = []
    for eps in sorted(epsilon_list, reverse=True):
        spec, _ = get_problem(problem, eps)
        mesh = make_mesh(mesh_kind, N, eps, sigma, dim=spec.dim)
        uN = galerkin_solve(spec, mesh, basis)
        rep = norm_of_difference(spec.u_exact, uN, mesh, "all", spec.m, spec.k, eps, degree=basis.degree)
        table.append({"epsilon": eps, "energy": rep.energy, "balanced": rep.balanced})
    hi, lo = table[0], table[-1]
    expected = math.sqrt(lo["epsilon"] / hi["epsilon"])
    e_ratio = lo["energy"] / hi["energy"]
    b_ratio = lo["balanced"] / hi["balanced"]
    checks = [
        verdict("energy_sqrt_eps_scaling", expected / 3 <= e_ratio <= expected * 3, e_ratio, expected,
                f"energy(eps={lo['epsilon']:g}) / energy(eps={hi['epsilon']:g}) within a factor 3"),
        verdict("balanced_eps_flat", 0.8 <= b_ratio <= 1.25, b_ratio, 1.0, "ratio in [0.8, 1.25]"),
    ]
    if spec0.m == 2:
        eps = 1e-6
        spec, _ = get_problem(problem, eps)
        pairs = []
        for n in n_list:
            mesh = make_mesh(mesh_kind, n, eps, sigma)
            uN = galerkin_solve(spec, mesh, basis)
            pairs.append((n, norm_of_difference(spec.u_exact, uN, mesh, "all", spec.m, spec.k, eps,
                                                degree=basis.degree).energy))
        checks.append(_rate_check("energy_rate_m2", pairs, verdict_scale(mesh_kind), lower=spec.m - 0.25,
                                  detail="energy-norm rate, eps = 1e-6"))
    return {"problem": problem, "mesh_kind": mesh_kind, "degree": degree, "sigma": sigma, "N": N,
            "table": table, "checks": checks, "all_pass": all(c["status"] == "PASS" for c in checks)}
