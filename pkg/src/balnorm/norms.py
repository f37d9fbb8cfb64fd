"""Energy, balanced and Sobolev norms by composite Gauss quadrature.

For a problem of order 2m with parameter k:

    energy   = eps^k       |v|_{H^m} + ||v||_{H^{m-k}}
    balanced = eps^{k-1/2} |v|_{H^m} + ||v||_{H^{m-k}}

Norms are evaluated cell by cell on an S-type mesh and can be restricted to
``all``, ``coarse`` (Omega_c), ``complement`` (Omega minus Omega_c), ``ply``
or ``layer`` cells.  L-infinity values are sampled at Gauss-Lobatto points
and 33 uniform points per cell and direction, independent of the
integration rule, and are therefore lower bounds.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import QuadratureRule, default_quadrature, gauss_lobatto
from .errors import NonPositiveError, NotEnoughPoints, RegionMeshMismatch
from .fem import Grid, as_grid, physical_points
from .mesh import CellKind

REGIONS = ("all", "coarse", "complement", "ply", "layer")
LINF_EXTRA = 33


@dataclass(frozen=True)
class NormReport:
    l2: float
    h_semi: tuple
    l_inf: float
    energy: float
    balanced: float
    h_mk: float
    region: str = "all"
    m: int = 1
    k: int = 1
    epsilon: float = 1.0
    linf_samples_per_dir: int = 0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["h_semi"] = list(self.h_semi)
        return d

    def items(self):
        """(norm_kind, value) pairs in a fixed order."""
        yield "l2", self.l2
        for j, s in enumerate(self.h_semi, start=1):
            yield f"h{j}_semi", s
        yield "l_inf", self.l_inf
        yield "energy", self.energy
        yield "balanced", self.balanced

    def to_csv_rows(self) -> list[list]:
        return [[kind, self.region, f"{val:.17g}"] for kind, val in self.items()]


def region_mask(mesh, region: str) -> np.ndarray:
    if region not in REGIONS:
        raise RegionMeshMismatch(f"unknown region {region!r}; choose from {REGIONS}")
    grid = as_grid(mesh)
    if region == "all":
        return np.ones(grid.n_cells, dtype=bool)
    if not hasattr(mesh, "cell_kinds"):
        raise RegionMeshMismatch(f"region {region!r} needs an S-type mesh with cell classification")
    kinds = mesh.cell_kinds()
    if region == "coarse":
        return kinds == CellKind.COARSE
    if region == "complement":
        return kinds != CellKind.COARSE
    if region == "ply":
        return kinds == CellKind.PLY
    return kinds == CellKind.LAYER


def _eval(fn, X, d, Y=None, dy=0):
    if fn is None:
        return np.zeros_like(X)
    if Y is None:
        return np.asarray(fn(X, d), dtype=float)
    return np.asarray(fn(X, Y, d, dy), dtype=float)


def _linf_points(p: int) -> np.ndarray:
    pts = np.concatenate([gauss_lobatto(max(p + 1, 2)).points, np.linspace(-1, 1, LINF_EXTRA)])
    return np.unique(pts)


def norm_of_difference(a, b, mesh, region: str = "all", m: int = 1, k: int = 1, epsilon: float = 1.0,
                       quad: QuadratureRule | None = None, degree: int = 1) -> NormReport:
    """Norms of ``a - b`` (either may be exact, discrete, or None for zero).

    ``degree`` only sets the default quadrature and L-inf sampling density.
    """
    quad = quad or default_quadrature(degree)
    mask = region_mask(mesh, region)
    grid = as_grid(mesh)
    lin = _linf_points(degree)
    if grid.dim == 1:
        sq, linf = _sq_1d(a, b, grid.nodes_x, mask, m, quad, lin)
    else:
        sq, linf = _sq_2d(a, b, grid, mask, m, quad, lin)
    semis = tuple(math.sqrt(max(s, 0.0)) for s in sq[1:])
    l2 = math.sqrt(max(sq[0], 0.0))
    h_mk = math.sqrt(max(sum(sq[: m - k + 1]), 0.0))
    top = semis[m - 1]
    return NormReport(l2=l2, h_semi=semis, l_inf=linf,
                      energy=epsilon**k * top + h_mk,
                      balanced=epsilon ** (k - 0.5) * top + h_mk,
                      h_mk=h_mk, region=region, m=m, k=k, epsilon=epsilon,
                      linf_samples_per_dir=len(lin))


def _sq_1d(a, b, nodes, mask, m, quad, lin):
    cells_nodes = np.asarray(nodes)
    X = physical_points(cells_nodes, quad.points)[mask]
    h = np.diff(cells_nodes)[mask]
    jw = 0.5 * h[:, None] * quad.weights[None, :]
    sq = []
    for d in range(m + 1):
        diff = _eval(a, X, d) - _eval(b, X, d)
        sq.append(float(np.sum(jw * diff * diff)))
    XL = physical_points(cells_nodes, lin)[mask]
    linf = float(np.max(np.abs(_eval(a, XL, 0) - _eval(b, XL, 0)))) if XL.size else 0.0
    return sq, linf


def _grid_points_2d(grid, xi, mask):
    px = physical_points(grid.nodes_x, xi)
    py = physical_points(grid.nodes_y, xi)
    nx, ny = grid.nx, grid.ny
    cells = np.flatnonzero(mask)
    cj, ci = np.divmod(cells, nx)
    X = np.broadcast_to(px[ci][:, :, None], (len(cells), len(xi), len(xi)))
    Y = np.broadcast_to(py[cj][:, None, :], (len(cells), len(xi), len(xi)))
    return X, Y, ci, cj


def _sq_2d(a, b, grid, mask, m, quad, lin):
    X, Y, ci, cj = _grid_points_2d(grid, quad.points, mask)
    hx = np.diff(grid.nodes_x)[ci]
    hy = np.diff(grid.nodes_y)[cj]
    W = 0.25 * (hx * hy)[:, None, None] * (quad.weights[:, None] * quad.weights[None, :])[None]
    sq = []
    for d in range(m + 1):
        total = 0.0
        for dx in range(d, -1, -1):
            dy = d - dx
            diff = _eval(a, X, dx, Y, dy) - _eval(b, X, dx, Y, dy)
            total += float(np.sum(W * diff * diff))
        sq.append(total)
    XL, YL, _, _ = _grid_points_2d(grid, lin, mask)
    linf = float(np.max(np.abs(_eval(a, XL, 0, YL, 0) - _eval(b, XL, 0, YL, 0)))) if XL.size else 0.0
    return sq, linf


def subdivide_nodes(nodes, n: int) -> np.ndarray:
    """Split every cell of a 1D node vector into ``n`` equal sub-cells."""
    nodes = np.asarray(nodes, dtype=float)
    t = np.arange(n) / n
    inner = (nodes[:-1, None] + t[None, :] * np.diff(nodes)[:, None]).ravel()
    return np.append(inner, nodes[-1])


def bilinear_form(problem, a, b, mesh, quad: QuadratureRule | None = None, degree: int = 1,
                  subdivide: int = 1) -> float:
    """eps^{2k} (D^m a, D^m b) + a~(a, b) by quadrature over all cells.

    ``subdivide > 1`` integrates over equal sub-cells, which resolves layer
    terms that decay within a single coarse cell.
    """
    quad = quad or default_quadrature(degree)
    grid = as_grid(mesh)
    if subdivide > 1:
        grid = Grid(subdivide_nodes(grid.nodes_x, subdivide),
                    None if grid.dim == 1 else subdivide_nodes(grid.nodes_y, subdivide))
    e2k = problem.epsilon ** (2 * problem.k)
    if grid.dim == 1:
        X = physical_points(grid.nodes_x, quad.points)
        jw = 0.5 * np.diff(grid.nodes_x)[:, None] * quad.weights[None, :]
        total = e2k * np.sum(jw * _eval(a, X, problem.m) * _eval(b, X, problem.m))
        for t in problem.a_tilde:
            wt = 1.0 if t.weight is None else t.weight(X)
            total += np.sum(jw * wt * _eval(a, X, t.order) * _eval(b, X, t.order))
        return float(total)
    mask = np.ones(grid.n_cells, dtype=bool)
    X, Y, ci, cj = _grid_points_2d(grid, quad.points, mask)
    W = 0.25 * (np.diff(grid.nodes_x)[ci] * np.diff(grid.nodes_y)[cj])[:, None, None] \
        * (quad.weights[:, None] * quad.weights[None, :])[None]
    total = e2k * np.sum(W * (_eval(a, X, 1, Y, 0) * _eval(b, X, 1, Y, 0)
                              + _eval(a, X, 0, Y, 1) * _eval(b, X, 0, Y, 1)))
    for t in problem.a_tilde:
        wt = 1.0 if t.weight is None else t.weight(X, Y)
        total += np.sum(W * wt * _eval(a, X, 0, Y, 0) * _eval(b, X, 0, Y, 0))
    return float(total)


# ---------------------------------------------------------------- rate fits

@dataclass(frozen=True)
class RateFit:
    exponent: float
    pairwise: tuple
    scale: str
    Ns: tuple = field(default=())

    @property
    def last_pairwise(self) -> float:
        return self.pairwise[-1]


def scale_values(Ns, scale) -> np.ndarray:
    Ns = np.asarray(Ns, dtype=float)
    if callable(scale):
        return np.array([scale(int(n)) for n in Ns], dtype=float)
    if isinstance(scale, dict):
        return np.array([scale[int(n)] for n in Ns], dtype=float)
    if scale == "N_inv":
        return 1.0 / Ns
    if scale == "N_inv_logN":
        return np.log(Ns) / Ns
    raise ValueError(f"unknown scale {scale!r}")


def rate_fit(pairs, scale="N_inv") -> RateFit:
    """Least-squares slope of ln(error) against ln(scale(N)).

    ``scale`` is ``"N_inv"``, ``"N_inv_logN"``, a dict ``{N: factor}`` or a
    callable ``N -> factor``.
    """
    pairs = sorted((int(n), float(e)) for n, e in pairs)
    if len(pairs) < 2:
        raise NotEnoughPoints("rate fit needs at least two (N, error) pairs")
    Ns = [n for n, _ in pairs]
    errs = np.array([e for _, e in pairs])
    if np.any(~(errs > 0)):
        raise NonPositiveError(f"errors must be positive for a log-log fit, got {errs.tolist()}")
    s = np.log(scale_values(Ns, scale))
    le = np.log(errs)
    slope = float(np.polyfit(s, le, 1)[0])
    pairwise = tuple(float((le[i + 1] - le[i]) / (s[i + 1] - s[i])) for i in range(len(Ns) - 1))
    name = scale if isinstance(scale, str) else "custom"
    return RateFit(slope, pairwise, name, tuple(Ns))


def reports_to_csv(rows) -> str:
    """Serialise (label, NormReport) pairs to CSV text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "norm_kind", "region", "value"])
    for label, rep in rows:
        for r in rep.to_csv_rows():
            w.writerow([label] + r)
    return buf.getvalue()
