"""Galerkin assembly and banded direct solve.

Spaces: C0 Lagrange elements at Gauss-Lobatto nodes (1D and tensor 2D) and
C1 cubic Hermite elements (1D).  Global dofs are numbered lexicographically
so the band stays narrow: ``p`` in 1D Lagrange, 3 for Hermite, ``p (N p + 1) + p``
for 2D.  Essential boundary conditions are imposed by dropping the
constrained dofs, which keeps the reduced matrix SPD.

Element integrals are accumulated into the band with ``np.add.at`` in cell
order, so results do not depend on how the element loop is vectorised.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .basis import ReferenceBasis, default_quadrature, gauss_legendre
from .errors import IncompatibleBasis, NotSPD, QuadratureUnderflow, ResidualTooLarge

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Grid:
    """Tensor-product cell grid: node coordinates per direction."""

    nodes_x: np.ndarray
    nodes_y: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return 1 if self.nodes_y is None else 2

    @property
    def nx(self) -> int:
        return len(self.nodes_x) - 1

    @property
    def ny(self) -> int:
        return 0 if self.nodes_y is None else len(self.nodes_y) - 1

    @property
    def n_cells(self) -> int:
        return self.nx if self.dim == 1 else self.nx * self.ny


def as_grid(mesh) -> Grid:
    if isinstance(mesh, Grid):
        return mesh
    return Grid(np.asarray(mesh.nodes_x), None if mesh.dim == 1 else np.asarray(mesh.nodes_y))


def coarse_grid(mesh) -> Grid:
    """Sub-grid of the coarse region (lam, 1 - lam)^dim of an S-type mesh."""
    lo, hi = mesh.coarse_cell_range()
    x = np.asarray(mesh.nodes_x)[lo: hi + 1]
    return Grid(x, None if mesh.dim == 1 else x)


@dataclass(frozen=True, eq=False)
class DofMap:
    n_dofs: int
    cell_dofs: np.ndarray
    constrained: np.ndarray
    free_index: np.ndarray

    @property
    def n_free(self) -> int:
        return int(np.count_nonzero(~self.constrained))

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.constrained)


def build_dofmap(grid, basis: ReferenceBasis, constrained=None, boundary: bool = True) -> DofMap:
    """Global numbering; with ``boundary=True`` constrain dofs encoding H^m_0."""
    grid = as_grid(grid)
    if basis.family == "hermite" and basis.m == 2:
        if grid.dim != 1:
            raise IncompatibleBasis("Hermite elements are 1D only")
        N = grid.nx
        n_dofs = 2 * (N + 1)
        cell_dofs = 2 * np.arange(N)[:, None] + np.arange(4)[None, :]
        fixed = [0, 1, n_dofs - 2, n_dofs - 1]
    else:
        p = basis.degree
        if grid.dim == 1:
            N = grid.nx
            n_dofs = N * p + 1
            cell_dofs = p * np.arange(N)[:, None] + np.arange(p + 1)[None, :]
            fixed = [0, n_dofs - 1]
        else:
            nx, ny = grid.nx, grid.ny
            n1x, n1y = nx * p + 1, ny * p + 1
            n_dofs = n1x * n1y
            i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
            a, b = np.meshgrid(np.arange(p + 1), np.arange(p + 1), indexing="xy")
            gx = (i.ravel() * p)[:, None] + a.ravel()[None, :]
            gy = (j.ravel() * p)[:, None] + b.ravel()[None, :]
            cell_dofs = gy * n1x + gx
            iy, ix = np.divmod(np.arange(n_dofs), n1x)
            fixed = np.flatnonzero((ix == 0) | (ix == n1x - 1) | (iy == 0) | (iy == n1y - 1))
    mask = np.zeros(n_dofs, dtype=bool)
    if boundary:
        mask[fixed] = True
    if constrained is not None:
        mask[np.asarray(constrained)] = True
    free_index = np.full(n_dofs, -1, dtype=np.int64)
    free_index[~mask] = np.arange(np.count_nonzero(~mask))
    return DofMap(n_dofs, cell_dofs, mask, free_index)


# ---------------------------------------------------------------- tabulation

def cell_geometry(nodes: np.ndarray):
    """Left endpoints and widths of the cells of a 1D node vector."""
    nodes = np.asarray(nodes, dtype=float)
    h = np.diff(nodes)
    if np.min(h) < 1e-300:
        raise QuadratureUnderflow(f"cell width {np.min(h):.3e} below 1e-300")
    return nodes[:-1], h


def tabulate_1d(nodes, basis: ReferenceBasis, xi, d: int) -> np.ndarray:
    """Physical d-th derivatives of the local basis; shape (ncells, n_local, len(xi))."""
    _, h = cell_geometry(nodes)
    ref = basis.eval(xi, d)
    scale = basis.dof_scale(h) * (2.0 / h[:, None]) ** d
    return scale[:, :, None] * ref[None, :, :]


def physical_points(nodes, xi) -> np.ndarray:
    a, h = cell_geometry(nodes)
    return a[:, None] + 0.5 * (np.asarray(xi)[None, :] + 1.0) * h[:, None]


# ------------------------------------------------------------------ banded

@dataclass(eq=False)
class BandedSystem:
    """SPD matrix in LAPACK upper band storage plus a right-hand side.

    ``ab[bandwidth + i - j, j] = A[i, j]`` for ``j - bandwidth <= i <= j``.
    """

    ab: np.ndarray
    bandwidth: int
    rhs: np.ndarray
    blocks: dict = field(default_factory=dict)
    dofmap: DofMap | None = None

    @property
    def n(self) -> int:
        return self.ab.shape[1]

    def to_dense(self) -> np.ndarray:
        return band_to_dense(self.ab, self.bandwidth)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return band_matvec(self.ab, self.bandwidth, x)

    @classmethod
    def from_dense(cls, A: np.ndarray, rhs: np.ndarray, bandwidth: int | None = None) -> "BandedSystem":
        A = np.asarray(A, dtype=float)
        n = A.shape[0]
        if bandwidth is None:
            nz = np.argwhere(A != 0)
            bandwidth = int(np.max(np.abs(nz[:, 0] - nz[:, 1]))) if len(nz) else 0
        u = bandwidth
        ab = np.zeros((u + 1, n))
        for d in range(u + 1):
            ab[u - d, d:] = np.diagonal(A, d)
        return cls(ab, u, np.asarray(rhs, dtype=float))


def band_to_dense(ab: np.ndarray, u: int) -> np.ndarray:
    n = ab.shape[1]
    A = np.zeros((n, n))
    for d in range(u + 1):
        diag = ab[u - d, d:]
        A[np.arange(n - d), np.arange(d, n)] = diag
        A[np.arange(d, n), np.arange(n - d)] = diag
    return A


def band_matvec(ab: np.ndarray, u: int, x: np.ndarray) -> np.ndarray:
    n = ab.shape[1]
    y = ab[u] * x
    for d in range(1, min(u, n - 1) + 1):
        diag = ab[u - d, d:]
        y[: n - d] += diag * x[d:]
        y[d:] += diag * x[: n - d]
    return y


def solve(system: BandedSystem, check: bool = True) -> np.ndarray:
    """Banded Cholesky solve followed by a residual check.

    The residual ``||A x - b||_inf`` is measured relative to
    ``max(||b||_inf, || |A| |x| ||_inf)``, the scale below which rounding in
    forming ``A x`` cannot go.
    """
    b = system.rhs
    if system.n == 0:
        return np.zeros(0)
    try:
        factor = scipy.linalg.cholesky_banded(system.ab, lower=False, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotSPD(f"banded Cholesky broke down: {exc}") from exc
    if np.any(factor[system.bandwidth] <= 0):
        raise NotSPD("non-positive diagonal in Cholesky factor")
    x = scipy.linalg.cho_solve_banded((factor, False), b)
    if check:
        res = relative_residual(system, x)
        if res > RESIDUAL_TOL:
            x = x + scipy.linalg.cho_solve_banded((factor, False), b - system.matvec(x))
            res = relative_residual(system, x)
        if res > RESIDUAL_TOL:
            raise ResidualTooLarge(f"relative residual {res:.3e} exceeds {RESIDUAL_TOL:g}")
    return x


def relative_residual(system: BandedSystem, x: np.ndarray) -> float:
    scale = max(np.max(np.abs(system.rhs)),
                np.max(np.abs(band_matvec(np.abs(system.ab), system.bandwidth, np.abs(x)))))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(system.matvec(x) - system.rhs)) / scale)


# ---------------------------------------------------------------- assembly

def _scatter(elem: np.ndarray, cell_dofs: np.ndarray, dofmap: DofMap, bandwidth: int) -> np.ndarray:
    n = dofmap.n_free
    ab = np.zeros((bandwidth + 1, n))
    F = dofmap.free_index[cell_dofs]
    fi = np.broadcast_to(F[:, :, None], elem.shape)
    fj = np.broadcast_to(F[:, None, :], elem.shape)
    keep = (fi >= 0) & (fj >= 0) & (fi <= fj)
    rows, cols, vals = fi[keep], fj[keep], elem[keep]
    np.add.at(ab, (bandwidth + rows - cols, cols), vals)
    return ab


def _bandwidth(dofmap: DofMap) -> int:
    F = dofmap.free_index[dofmap.cell_dofs]
    bw = 0
    for row in F:
        r = row[row >= 0]
        if len(r):
            bw = max(bw, int(r.max() - r.min()))
    return bw


def _load(vecs: np.ndarray, cell_dofs: np.ndarray, dofmap: DofMap) -> np.ndarray:
    out = np.zeros(dofmap.n_free)
    F = dofmap.free_index[cell_dofs]
    keep = F >= 0
    np.add.at(out, F[keep], vecs[keep])
    return out


def _weights_1d(weight, x: np.ndarray) -> np.ndarray:
    if weight is None:
        return np.ones_like(x)
    return np.broadcast_to(np.asarray(weight(x), dtype=float), x.shape)


def element_forms_1d(nodes, basis: ReferenceBasis, terms, quad=None) -> np.ndarray:
    """Element matrices of sum over ``terms`` of (w D^d u, D^d v); ``terms`` = [(d, weight)]."""
    quad = quad or default_quadrature(basis.degree)
    _, h = cell_geometry(nodes)
    x = physical_points(nodes, quad.points)
    jw = 0.5 * h[:, None] * quad.weights[None, :]
    out = np.zeros((len(h), basis.n_local, basis.n_local))
    for d, weight in terms:
        B = tabulate_1d(nodes, basis, quad.points, d)
        out += np.einsum("cq,ciq,cjq->cij", jw * _weights_1d(weight, x), B, B)
    return out


def element_load_1d(nodes, basis: ReferenceBasis, f, quad=None) -> np.ndarray:
    quad = quad or default_quadrature(basis.degree)
    _, h = cell_geometry(nodes)
    x = physical_points(nodes, quad.points)
    jw = 0.5 * h[:, None] * quad.weights[None, :]
    B = tabulate_1d(nodes, basis, quad.points, 0)
    fx = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    return np.einsum("cq,ciq->ci", jw * fx, B)


def _tensor_tab(grid: Grid, basis: ReferenceBasis, xi, dx: int, dy: int):
    Bx = tabulate_1d(grid.nodes_x, basis, xi, dx)  # (nx, nl, nq)
    By = tabulate_1d(grid.nodes_y, basis, xi, dy)
    return Bx, By


def _cell_xy(grid: Grid, xi):
    px = physical_points(grid.nodes_x, xi)  # (nx, nq)
    py = physical_points(grid.nodes_y, xi)
    X = px[None, :, :, None]  # (ny, nx, qx, qy)
    Y = py[:, None, None, :]
    X, Y = np.broadcast_arrays(X, Y)
    return X.reshape(-1, len(xi), len(xi)), Y.reshape(-1, len(xi), len(xi))


def element_forms_2d(grid: Grid, basis: ReferenceBasis, terms, quad=None) -> np.ndarray:
    """2D element matrices; ``terms`` = [((dx, dy), weight(x, y) or None)]."""
    quad = quad or default_quadrature(basis.degree)
    nx, ny, nl = grid.nx, grid.ny, basis.n_local
    _, hx = cell_geometry(grid.nodes_x)
    _, hy = cell_geometry(grid.nodes_y)
    wq = quad.weights
    jac = (0.25 * hy[:, None] * hx[None, :]).reshape(-1)  # cell order j*nx + i
    X, Y = _cell_xy(grid, quad.points)
    ix = np.tile(np.arange(nx), ny)
    iy = np.repeat(np.arange(ny), nx)
    out = np.zeros((nx * ny, nl * nl, nl * nl))
    for (dx, dy), weight in terms:
        Bx, By = _tensor_tab(grid, basis, quad.points, dx, dy)
        W = np.ones_like(X) if weight is None else np.broadcast_to(np.asarray(weight(X, Y), dtype=float), X.shape)
        W = W * (wq[:, None] * wq[None, :])[None] * jac[:, None, None]
        # local index b*nl + a <-> phi_a(x) phi_b(y)
        Mx = np.einsum("cqr,caq,cAq->caAr", W, Bx[ix], Bx[ix])
        E = np.einsum("caAr,cbr,cBr->cbaBA", Mx, By[iy], By[iy])
        out += E.reshape(nx * ny, nl * nl, nl * nl)
    return out


def element_load_2d(grid: Grid, basis: ReferenceBasis, f, quad=None) -> np.ndarray:
    quad = quad or default_quadrature(basis.degree)
    nx, ny, nl = grid.nx, grid.ny, basis.n_local
    _, hx = cell_geometry(grid.nodes_x)
    _, hy = cell_geometry(grid.nodes_y)
    wq = quad.weights
    jac = (0.25 * hy[:, None] * hx[None, :]).reshape(-1)
    X, Y = _cell_xy(grid, quad.points)
    Bx, By = _tensor_tab(grid, basis, quad.points, 0, 0)
    ix = np.tile(np.arange(nx), ny)
    iy = np.repeat(np.arange(ny), nx)
    F = np.broadcast_to(np.asarray(f(X, Y), dtype=float), X.shape)
    W = F * (wq[:, None] * wq[None, :])[None] * jac[:, None, None]
    L = np.einsum("cqr,caq,cbr->cba", W, Bx[ix], By[iy])
    return L.reshape(nx * ny, nl * nl)


def _check_compat(problem, mesh, basis: ReferenceBasis) -> None:
    if basis.continuity < problem.m - 1:
        raise IncompatibleBasis(f"basis continuity C^{basis.continuity} too low for m={problem.m}")
    if basis.family == "hermite" and basis.m != problem.m:
        raise IncompatibleBasis(f"Hermite({basis.m}) basis used for an m={problem.m} problem")
    if mesh.dim != problem.dim:
        raise IncompatibleBasis(f"mesh dim {mesh.dim} != problem dim {problem.dim}")
    if problem.dim == 2 and basis.family != "lagrange":
        raise IncompatibleBasis("2D problems need the Lagrange basis")


def stiffness_terms(problem):
    """Principal part (D^m u, D^m v) as element-form terms."""
    if problem.dim == 1:
        return [(problem.m, None)]
    return [((1, 0), None), ((0, 1), None)]


def a_tilde_terms(problem):
    if problem.dim == 1:
        return [(t.order, t.weight) for t in problem.a_tilde]
    return [((t.order, t.order), t.weight) for t in problem.a_tilde]


def assemble(problem, mesh, basis: ReferenceBasis, quad=None) -> BandedSystem:
    """System ``eps^{2k} S + A~`` for the free dofs, load ``(f, v)``.

    ``blocks`` holds the separate band arrays ``stiffness`` and ``a_tilde``.
    """
    _check_compat(problem, mesh, basis)
    grid = as_grid(mesh)
    dofmap = build_dofmap(grid, basis)
    bw = _bandwidth(dofmap)
    if grid.dim == 1:
        S = element_forms_1d(grid.nodes_x, basis, stiffness_terms(problem), quad)
        A = element_forms_1d(grid.nodes_x, basis, a_tilde_terms(problem), quad)
        L = element_load_1d(grid.nodes_x, basis, problem.f, quad)
    else:
        S = element_forms_2d(grid, basis, stiffness_terms(problem), quad)
        A = element_forms_2d(grid, basis, a_tilde_terms(problem), quad)
        L = element_load_2d(grid, basis, problem.f, quad)
    S_ab = _scatter(S, dofmap.cell_dofs, dofmap, bw)
    A_ab = _scatter(A, dofmap.cell_dofs, dofmap, bw)
    rhs = _load(L, dofmap.cell_dofs, dofmap)
    e2k = problem.epsilon ** (2 * problem.k)
    return BandedSystem(e2k * S_ab + A_ab, bw, rhs, blocks={"stiffness": S_ab, "a_tilde": A_ab}, dofmap=dofmap)


def galerkin_solve(problem, mesh, basis: ReferenceBasis, quad=None) -> "DiscreteFunction":
    system = assemble(problem, mesh, basis, quad)
    x = solve(system)
    coeffs = np.zeros(system.dofmap.n_dofs)
    coeffs[system.dofmap.free] = x
    return DiscreteFunction(as_grid(mesh), basis, coeffs, system.dofmap)


# ---------------------------------------------------------- discrete funcs

class DiscreteFunction:
    """Finite element function on a :class:`Grid`.

    1D: ``fn(x, d=0, cells=None)``; 2D: ``fn(x, y, dx=0, dy=0, cells=None)``.
    ``cells`` selects the cell (own grid numbering) each point is evaluated
    in, which matters for derivatives at cell interfaces; by default points
    are located with ``searchsorted``.
    """

    def __init__(self, grid, basis: ReferenceBasis, coeffs, dofmap: DofMap | None = None):
        self.grid = as_grid(grid)
        self.basis = basis
        self.dofmap = dofmap or build_dofmap(self.grid, basis, boundary=False)
        self.coeffs = np.asarray(coeffs, dtype=float)
        if len(self.coeffs) != self.dofmap.n_dofs:
            raise ValueError(f"expected {self.dofmap.n_dofs} coefficients, got {len(self.coeffs)}")

    @property
    def dim(self) -> int:
        return self.grid.dim

    def locate(self, nodes, x) -> np.ndarray:
        i = np.searchsorted(nodes, x, side="right") - 1
        return np.clip(i, 0, len(nodes) - 2)

    def _eval_1d(self, nodes, cell, x, d):
        a, h = cell_geometry(nodes)
        xi = 2.0 * (x - a[cell]) / h[cell] - 1.0
        ref = self.basis.eval(xi, d)  # (nl, npts)
        scale = self.basis.dof_scale(h[cell]) * (2.0 / h[cell][:, None]) ** d
        return ref.T * scale  # (npts, nl)

    def __call__(self, x, *args, cells=None, **kw):
        if self.dim == 1:
            d = args[0] if args else kw.get("d", 0)
            x = np.asarray(x, dtype=float)
            shape = x.shape
            x = x.ravel()
            cell = self.locate(self.grid.nodes_x, x) if cells is None else np.broadcast_to(cells, shape).ravel()
            vals = self._eval_1d(self.grid.nodes_x, cell, x, d)
            c = self.coeffs[self.dofmap.cell_dofs[cell]]
            return np.sum(vals * c, axis=1).reshape(shape)
        y = args[0]
        dx = args[1] if len(args) > 1 else kw.get("dx", 0)
        dy = args[2] if len(args) > 2 else kw.get("dy", 0)
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        shape = x.shape
        x, y = x.ravel(), y.ravel()
        if cells is None:
            ci = self.locate(self.grid.nodes_x, x)
            cj = self.locate(self.grid.nodes_y, y)
        else:
            cj, ci = np.divmod(np.broadcast_to(cells, shape).ravel(), self.grid.nx)
        vx = self._eval_1d(self.grid.nodes_x, ci, x, dx)  # (npts, nl)
        vy = self._eval_1d(self.grid.nodes_y, cj, y, dy)
        nl = self.basis.n_local
        c = self.coeffs[self.dofmap.cell_dofs[cj * self.grid.nx + ci]].reshape(-1, nl, nl)  # [b, a]
        return np.einsum("pba,pa,pb->p", c, vx, vy).reshape(shape)

    def with_coeffs(self, coeffs) -> "DiscreteFunction":
        return DiscreteFunction(self.grid, self.basis, coeffs, self.dofmap)

    def __sub__(self, other: "DiscreteFunction") -> "DiscreteFunction":
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __add__(self, other: "DiscreteFunction") -> "DiscreteFunction":
        return self.with_coeffs(self.coeffs + other.coeffs)
