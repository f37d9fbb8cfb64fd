"""Analysis operators: interpolation, coarse-region projections and the hybrid P.

All coarse-region projections live on the uniform submesh covering
``Omega_c = (lam, 1 - lam)^dim`` and return a :class:`DiscreteFunction` on that
submesh.  The hybrid operator ``P`` takes projection values at nodes in the
closed coarse region and interpolation values everywhere else; on the ply
cells this reproduces the blend with the nodal indicator ``chi_tau``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import ReferenceBasis, default_quadrature, hermite, lagrange_gl
from .errors import MissingDecomposition, MissingDerivative, NotPlyCell
from .fem import (BandedSystem, DiscreteFunction, Grid, _bandwidth, _load, _scatter, as_grid,
                  build_dofmap, cell_geometry, coarse_grid, element_forms_1d, element_forms_2d,
                  element_load_2d, physical_points, solve, tabulate_1d)
from .mesh import CellKind, classify_cell


# -------------------------------------------------------------- node layout

def global_points_1d(nodes, basis: ReferenceBasis) -> np.ndarray:
    """Coordinates of the global Lagrange nodes (size N p + 1)."""
    pts = physical_points(nodes, basis.nodes)
    return np.concatenate([pts[:1, 0], pts[:, 1:].ravel()])


def _call(u, *args):
    try:
        return np.asarray(u(*args), dtype=float)
    except NotImplementedError as exc:
        raise MissingDerivative(str(exc)) from exc


# ---------------------------------------------------------- interpolation

def interpolate_gl(u, mesh, basis: ReferenceBasis) -> DiscreteFunction:
    """Piecewise Gauss-Lobatto interpolant of ``u`` (1D ``u(x)``, 2D ``u(x, y)``)."""
    grid = as_grid(mesh)
    if basis.family != "lagrange":
        return interpolate_hermite(u, mesh, basis)
    gx = global_points_1d(grid.nodes_x, basis)
    if grid.dim == 1:
        coeffs = _call(u, gx)
    else:
        gy = global_points_1d(grid.nodes_y, basis)
        X, Y = np.meshgrid(gx, gy, indexing="xy")
        coeffs = _call(u, X, Y).ravel()
    return DiscreteFunction(grid, basis, coeffs)


def interpolate_hermite(u, mesh, basis: ReferenceBasis | None = None) -> DiscreteFunction:
    """C^1 cubic Hermite interpolant: nodal values and first derivatives of ``u``."""
    grid = as_grid(mesh)
    basis = basis or hermite(2)
    x = np.asarray(grid.nodes_x)
    coeffs = np.empty(2 * len(x))
    coeffs[0::2] = _call(u, x, 0)
    coeffs[1::2] = _call(u, x, 1)
    return DiscreteFunction(grid, basis, coeffs)


# ------------------------------------------------------------ projections

def _tab_load_1d(nodes, basis, target, terms, quad):
    """Element vectors of sum over terms of (w D^d target, D^d phi)."""
    _, h = cell_geometry(nodes)
    x = physical_points(nodes, quad.points)
    jw = 0.5 * h[:, None] * quad.weights[None, :]
    out = np.zeros((len(h), basis.n_local))
    for d, weight in terms:
        wt = 1.0 if weight is None else np.asarray(weight(x), dtype=float)
        B = tabulate_1d(nodes, basis, quad.points, d)
        out += np.einsum("cq,ciq->ci", jw * wt * _call(target, x, d), B)
    return out


def _tab_load_2d(grid: Grid, basis, target, weight, quad):
    if weight is None:
        return element_load_2d(grid, basis, lambda X, Y: _call(target, X, Y), quad)
    return element_load_2d(grid, basis, lambda X, Y: np.asarray(weight(X, Y)) * _call(target, X, Y), quad)


def _constrained_solve(grid, basis, E, L, constrained=None, values=None) -> DiscreteFunction:
    """Solve the projection system with dofs ``constrained`` fixed to ``values``."""
    dofmap = build_dofmap(grid, basis, constrained=constrained, boundary=False)
    full = np.zeros(dofmap.n_dofs)
    if constrained is not None:
        full[np.asarray(constrained)] = values
        L = L - np.einsum("cij,cj->ci", E, full[dofmap.cell_dofs])
    bw = _bandwidth(dofmap)
    system = BandedSystem(_scatter(E, dofmap.cell_dofs, dofmap, bw), bw,
                          _load(L, dofmap.cell_dofs, dofmap), dofmap=dofmap)
    full[dofmap.free] = solve(system)
    return DiscreteFunction(grid, basis, full)


def weighted_l2_projection(u, mesh, c=None, basis: ReferenceBasis | None = None, quad=None) -> DiscreteFunction:
    """pi u on Omega_c: (c (u - pi u), w) = 0 for all w in V^N restricted to Omega_c.

    No boundary conditions are imposed.  ``c=None`` means weight one.  In 2D
    a full (non tensor-factored) mass system is assembled so variable ``c``
    is admissible.
    """
    basis = basis or _default_basis(mesh)
    quad = quad or default_quadrature(basis.degree)
    grid = coarse_grid(mesh)
    if grid.dim == 1:
        E = element_forms_1d(grid.nodes_x, basis, [(0, c)], quad)
        L = _tab_load_1d(grid.nodes_x, basis, u, [(0, c)], quad)
    else:
        E = element_forms_2d(grid, basis, [((0, 0), c)], quad)
        L = _tab_load_2d(grid, basis, u, c, quad)
    return _constrained_solve(grid, basis, E, L)


def ritz_projection(v, mesh, a_tilde, m: int = 2, k: int = 1, basis: ReferenceBasis | None = None,
                    quad=None) -> DiscreteFunction:
    """Ritz projection of ``v`` into the Hermite space on Omega_c.

    a~(v - pi v, chi) = 0 for every admissible chi, with
    D^n (v - pi v) = 0 on the boundary of Omega_c for n < m - k.  For k = m
    this is the plain a~-projection.
    """
    if (m, k) not in ((2, 1), (2, 2)):
        raise ValueError(f"Ritz projection is defined for (m, k) in {{(2, 1), (2, 2)}}, got {(m, k)}")
    basis = basis or hermite(m)
    quad = quad or default_quadrature(basis.degree)
    grid = coarse_grid(mesh)
    terms = [(t.order, t.weight) for t in a_tilde]
    E = element_forms_1d(grid.nodes_x, basis, terms, quad)
    L = _tab_load_1d(grid.nodes_x, basis, v, terms, quad)
    n_bc = m - k
    if n_bc == 0:
        return _constrained_solve(grid, basis, E, L)
    ends = np.asarray(grid.nodes_x)[[0, -1]]
    last = 2 * grid.nx
    idx, vals = [], []
    for n in range(n_bc):
        idx += [n, last + n]
        vals += list(_call(v, ends, n))
    return _constrained_solve(grid, basis, E, L, np.array(idx), np.array(vals))


def _default_basis(mesh) -> ReferenceBasis:
    return lagrange_gl(1)


# ---------------------------------------------------------- hybrid operator

def chi_tau(mesh, cell, basis: ReferenceBasis) -> DiscreteFunction:
    """Nodal indicator of the boundary of Omega_c on a ply cell.

    Returned on a one-cell grid covering ``cell``; coefficients are 1 at the
    Gauss-Lobatto nodes lying on the boundary of Omega_c and 0 elsewhere.
    """
    if classify_cell(mesh, cell) != CellKind.PLY:
        raise NotPlyCell(f"cell {cell} is not a ply cell")
    p = basis.degree
    q = mesh.N // 4
    lo, hi = q * p, 3 * q * p
    if mesh.dim == 1:
        i = int(cell)
        grid = Grid(np.asarray(mesh.nodes_x)[i: i + 2])
        ix = i * p + np.arange(p + 1)
        coeffs = ((ix == lo) | (ix == hi)).astype(float)
        return DiscreteFunction(grid, basis, coeffs)
    i, j = cell if isinstance(cell, tuple) else divmod(int(cell), mesh.N)[::-1]
    grid = Grid(np.asarray(mesh.nodes_x)[i: i + 2], np.asarray(mesh.nodes_y)[j: j + 2])
    IX, IY = np.meshgrid(i * p + np.arange(p + 1), j * p + np.arange(p + 1), indexing="xy")
    return DiscreteFunction(grid, basis, _on_coarse_boundary(IX, IY, lo, hi).ravel().astype(float))


def _on_coarse_boundary(ix, iy, lo, hi):
    in_x = (ix >= lo) & (ix <= hi)
    in_y = (iy >= lo) & (iy <= hi)
    return (((ix == lo) | (ix == hi)) & in_y) | (((iy == lo) | (iy == hi)) & in_x)


@dataclass(frozen=True, eq=False)
class OperatorOutput:
    """Result of ``hybrid_P`` with the branch that produced each cell.

    ``region_tags`` holds ``CellKind`` codes: COARSE where all coefficients
    come from the projection, LAYER where all come from interpolation, PLY
    where the two are blended.
    """

    result: DiscreteFunction
    region_tags: np.ndarray
    projection: DiscreteFunction | None = None
    parts: dict = field(default_factory=dict)


def _branch_tags(from_pi: np.ndarray, cell_dofs: np.ndarray) -> np.ndarray:
    src = from_pi[cell_dofs]
    tags = np.full(len(cell_dofs), CellKind.PLY, dtype=np.int8)
    tags[np.all(src, axis=1)] = CellKind.COARSE
    tags[~np.any(src, axis=1)] = CellKind.LAYER
    return tags


def hybrid_P(decomp, mesh, basis: ReferenceBasis, order_params=(1, 1), c=None, a_tilde=None,
             quad=None) -> OperatorOutput:
    """Hybrid interpolant ``P u`` built from the decomposition ``u = v + sum w``.

    m = 1: nodes in the closed coarse region take ``pi v`` (weighted L2
    projection with weight ``c``); all other nodes take ``I u``.  Layer parts
    vanish on the coarse region and their ply values on its boundary.
    m = 2: Hermite dofs at nodes ``N/4 .. 3N/4`` come from the Ritz
    projection of ``v`` (form ``a_tilde``); the others from ``(u, u')``.
    """
    if decomp is None or getattr(decomp, "v", None) is None:
        raise MissingDecomposition("hybrid_P needs a solution decomposition with a smooth part")
    m, k = order_params
    grid = as_grid(mesh)
    q = mesh.N // 4
    if m == 1:
        pi_v = weighted_l2_projection(decomp.v, mesh, c, basis, quad)
        Iu = interpolate_gl(decomp.u, mesh, basis)
        p = basis.degree
        lo, hi = q * p, 3 * q * p
        n1 = grid.nx * p + 1
        if grid.dim == 1:
            ix = np.arange(n1)
            from_pi = (ix >= lo) & (ix <= hi)
            coarse_idx = ix[from_pi] - lo
        else:
            IY, IX = np.divmod(np.arange(n1 * n1), n1)
            from_pi = (IX >= lo) & (IX <= hi) & (IY >= lo) & (IY <= hi)
            coarse_idx = (IY[from_pi] - lo) * (hi - lo + 1) + (IX[from_pi] - lo)
    elif m == 2:
        if basis.family != "hermite":
            raise ValueError("the m = 2 hybrid operator needs the Hermite basis")
        if a_tilde is None:
            raise ValueError("the m = 2 hybrid operator needs the a~ form for the Ritz projection")
        pi_v = ritz_projection(decomp.v, mesh, a_tilde, m, k, basis, quad)
        Iu = interpolate_hermite(decomp.u, mesh, basis)
        nodes = np.repeat(np.arange(grid.nx + 1), 2)
        from_pi = (nodes >= q) & (nodes <= 3 * q)
        coarse_idx = np.flatnonzero(from_pi) - 2 * q
    else:
        raise ValueError(f"m must be 1 or 2, got {m}")
    coeffs = Iu.coeffs.copy()
    coeffs[from_pi] = pi_v.coeffs[coarse_idx]
    result = Iu.with_coeffs(coeffs)
    tags = _branch_tags(from_pi, result.dofmap.cell_dofs)
    return OperatorOutput(result, tags, pi_v, {"interpolant": Iu})


def hybrid_P_for_problem(problem, mesh, basis: ReferenceBasis, quad=None) -> OperatorOutput:
    """``hybrid_P`` with the weight / form taken from a catalog problem."""
    if problem.m == 1:
        c = problem.a_tilde[0].weight if problem.a_tilde else None
        return hybrid_P(problem.solution, mesh, basis, (1, problem.k), c=c, quad=quad)
    return hybrid_P(problem.solution, mesh, basis, (problem.m, problem.k), a_tilde=problem.a_tilde, quad=quad)


def layer_P(w, mesh, basis: ReferenceBasis, m: int = 1) -> DiscreteFunction:
    """P applied to a single layer part: I w with the coarse-region dofs zeroed."""
    q = mesh.N // 4
    if m == 1:
        Iw = interpolate_gl(w, mesh, basis)
        p = basis.degree
        n1 = mesh.N * p + 1
        if mesh.dim == 1:
            ix = np.arange(n1)
            inside = (ix >= q * p) & (ix <= 3 * q * p)
        else:
            IY, IX = np.divmod(np.arange(n1 * n1), n1)
            inside = (IX >= q * p) & (IX <= 3 * q * p) & (IY >= q * p) & (IY <= 3 * q * p)
    else:
        Iw = interpolate_hermite(w, mesh, basis)
        nodes = np.repeat(np.arange(mesh.N + 1), 2)
        inside = (nodes >= q) & (nodes <= 3 * q)
    coeffs = Iw.coeffs.copy()
    coeffs[inside] = 0.0
    return Iw.with_coeffs(coeffs)


# ----------------------------------------------------------- diagnostics

def boundary_trace_error(v, mesh, basis: ReferenceBasis, c=None) -> float:
    """max over the boundary of Omega_c of |I v - pi v| (1D)."""
    pi_v = weighted_l2_projection(v, mesh, c, basis)
    Iv = interpolate_gl(v, mesh, basis)
    pts = np.array(mesh.omega_c)
    return float(np.max(np.abs(Iv(pts) - pi_v(pts))))


def linf_stability_estimate(mesh, basis: ReferenceBasis, c=None, n_samples: int = 20, refine: int = 4,
                            seed: int = 0) -> float:
    """Empirical lower bound for ||pi||_{L_inf -> L_inf} on Omega_c.

    Random piecewise linear functions on a ``refine``-times finer uniform
    grid of Omega_c are projected; the largest sup-norm ratio is returned.
    """
    rng = np.random.default_rng(seed)
    lo, hi = mesh.omega_c
    n_fine = refine * mesh.N // 2
    xf = np.linspace(lo, hi, n_fine + 1)
    worst = 0.0
    for _ in range(n_samples):
        vals = rng.uniform(-1.0, 1.0, n_fine + 1)
        g = _PiecewiseLinear(xf, vals)
        pg = weighted_l2_projection(g, mesh, c, basis)
        xs = np.linspace(lo, hi, 20 * n_fine + 1)
        worst = max(worst, float(np.max(np.abs(pg(xs))) / np.max(np.abs(vals))))
    return worst


class _PiecewiseLinear:
    def __init__(self, x, vals):
        self.x, self.vals = x, vals

    def __call__(self, x, d=0):
        if d:
            raise NotImplementedError("only values available")
        return np.interp(x, self.x, self.vals)
