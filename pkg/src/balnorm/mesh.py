"""S-type layer-adapted meshes on (0, 1) and (0, 1)^2.

A mesh is generated from a monotone mesh-generating function ``phi`` with
``phi(0) = 0`` and ``phi(1/2) = ln N``.  With the transition point
``lam = sigma * eps * ln N`` the nodes are

    x_i = sigma * eps * phi(2 i / N)                   0     <= i <= N/4
    x_i = lam + (4 i / N - 1) (1/2 - lam)              N/4   <= i <= 3N/4
    x_i = 1 - sigma * eps * phi(2 - 2 i / N)           3N/4  <= i <= N

The characterising function is ``psi = exp(-phi)``; the quantity
``h + max|psi'| / N`` controls the layer interpolation error.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import BadCellCount, IndexOutOfRange, NonMonotonePhi, TransitionTooLarge

_LAMBDA_SLACK = 1e-12


class CellKind(enum.IntEnum):
    COARSE = 0
    PLY = 1
    LAYER = 2

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class MeshGeneratingFunction:
    kind: str
    N: int
    phi: Callable
    phi_prime: Callable
    convex: bool = True

    def psi(self, t):
        return np.exp(-self.phi(t))

    def psi_prime(self, t):
        return -self.phi_prime(t) * np.exp(-self.phi(t))

    @property
    def psi_prime_max(self) -> float:
        return max_psi_prime(self)

    def check(self, n_samples: int = 1000) -> None:
        """Validate endpoint values, monotonicity and (if claimed) convexity."""
        ln_n = math.log(self.N)
        if abs(float(self.phi(0.0))) > 1e-12 * ln_n:
            raise NonMonotonePhi(f"phi(0) = {self.phi(0.0)} != 0")
        if abs(float(self.phi(0.5)) - ln_n) > 1e-12 * ln_n:
            raise NonMonotonePhi(f"phi(1/2) = {self.phi(0.5)} != ln N = {ln_n}")
        t = np.linspace(0.0, 0.5, n_samples)
        vals = np.asarray(self.phi(t), dtype=float)
        if np.any(np.diff(vals) < 0):
            raise NonMonotonePhi(f"{self.kind}: sampled phi decreases")
        if self.convex and np.any(np.diff(vals, 2) < -1e-10):
            raise ValueError(f"{self.kind}: phi is marked convex but sampled second differences are negative")


def shishkin(N: int) -> MeshGeneratingFunction:
    ln_n = math.log(N)
    return MeshGeneratingFunction(
        "Shishkin", N,
        phi=lambda t: 2.0 * np.asarray(t, dtype=float) * ln_n,
        phi_prime=lambda t: np.full_like(np.asarray(t, dtype=float), 2.0 * ln_n),
    )


def bakhvalov_s(N: int) -> MeshGeneratingFunction:
    q = 1.0 - 1.0 / N
    return MeshGeneratingFunction(
        "BakhvalovS", N,
        phi=lambda t: -np.log1p(-2.0 * np.asarray(t, dtype=float) * q),
        phi_prime=lambda t: 2.0 * q / (1.0 - 2.0 * np.asarray(t, dtype=float) * q),
    )


def custom(N: int, phi: Callable, phi_prime: Callable, convex: bool = False) -> MeshGeneratingFunction:
    return MeshGeneratingFunction("Custom", N, phi, phi_prime, convex)


GENERATORS = {"shishkin": shishkin, "bakhvalov-s": bakhvalov_s, "bakhvalovs": bakhvalov_s}


def generator(kind: str, N: int) -> MeshGeneratingFunction:
    try:
        return GENERATORS[kind.lower()](N)
    except KeyError:
        raise ValueError(f"unknown mesh kind {kind!r}; choose from {sorted(GENERATORS)}") from None


def max_psi_prime(gen: MeshGeneratingFunction, N: int | None = None, n_samples: int = 10_000) -> float:
    """sup over [0, 1/2] of |psi'| with psi = exp(-phi).

    Closed form for the built-in kinds; dense sampling plus bounded local
    refinement for custom generators.
    """
    if N is not None and N != gen.N:
        raise ValueError(f"generator built for N={gen.N}, asked for N={N}")
    if gen.kind == "Shishkin":
        return 2.0 * math.log(gen.N)
    if gen.kind == "BakhvalovS":
        return 2.0 * (1.0 - 1.0 / gen.N)
    return _sampled_max_abs(gen.psi_prime, 0.0, 0.5, n_samples)


def _sampled_max_abs(fn: Callable, a: float, b: float, n_samples: int) -> float:
    t = np.linspace(a, b, n_samples)
    vals = np.abs(np.asarray(fn(t), dtype=float))
    i = int(np.argmax(vals))
    best = float(vals[i])
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, n_samples - 1)]
    res = minimize_scalar(lambda s: -abs(float(fn(np.array([s]))[0])), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-14})
    return max(best, -float(res.fun))


@dataclass(frozen=True)
class TransitionParams:
    epsilon: float
    sigma: float
    N: int

    @property
    def lam(self) -> float:
        return self.sigma * self.epsilon * math.log(self.N)

    def check(self) -> None:
        if self.N < 4 or self.N % 4 != 0:
            raise BadCellCount(f"N must be a positive multiple of 4, got {self.N}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.sigma < 1:
            raise ValueError(f"sigma must be >= 1, got {self.sigma}")
        if self.lam > 0.25 * (1.0 + _LAMBDA_SLACK):
            raise TransitionTooLarge(
                f"lambda = sigma*eps*ln N = {self.lam:.6g} exceeds 1/4 "
                f"(eps={self.epsilon}, sigma={self.sigma}, N={self.N})")


def s_type_nodes(gen: MeshGeneratingFunction, params: TransitionParams) -> np.ndarray:
    N = params.N
    se = params.sigma * params.epsilon
    lam = params.lam
    q = N // 4
    x = np.empty(N + 1)
    i = np.arange(0, q + 1)
    x[: q + 1] = se * np.asarray(gen.phi(2.0 * i / N), dtype=float)
    x[q] = lam
    i = np.arange(q + 1, N // 2 + 1)
    x[q + 1: N // 2 + 1] = lam + (4.0 * i / N - 1.0) * (0.5 - lam)
    # mirror the right half so x_i + x_{N-i} = 1 holds to rounding
    x[N // 2 + 1:] = 1.0 - x[: N // 2][::-1]
    x[0], x[N] = 0.0, 1.0
    return x


@dataclass(frozen=True, eq=False)
class STypeMesh:
    dim: int
    nodes_x: np.ndarray
    params: TransitionParams
    gen: MeshGeneratingFunction
    nodes_y: np.ndarray | None = None
    kinds_1d: np.ndarray = field(repr=False, default=None)

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def lam(self) -> float:
        return self.params.lam

    @property
    def h(self) -> float:
        q = self.N // 4
        return float(self.nodes_x[q] - self.nodes_x[q - 1])

    @property
    def omega_c(self) -> tuple[float, float]:
        return (self.lam, 1.0 - self.lam)

    @property
    def omega_c_star(self) -> tuple[float, float]:
        return (self.lam - self.h, 1.0 - (self.lam - self.h))

    @property
    def max_psi_prime(self) -> float:
        return max_psi_prime(self.gen)

    @property
    def rate_factor(self) -> float:
        """h + N^{-1} max|psi'|."""
        return self.h + self.max_psi_prime / self.N

    @property
    def n_cells(self) -> int:
        return self.N ** self.dim

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes_x)

    def cell_kinds(self) -> np.ndarray:
        """Integer ``CellKind`` codes of every cell (2D: flat index j*N + i)."""
        if self.dim == 1:
            return self.kinds_1d.copy()
        kx, ky = np.meshgrid(self.kinds_1d, self.kinds_1d, indexing="xy")
        out = np.full(kx.shape, CellKind.PLY, dtype=np.int8)
        out[(kx == CellKind.COARSE) & (ky == CellKind.COARSE)] = CellKind.COARSE
        out[(kx == CellKind.LAYER) | (ky == CellKind.LAYER)] = CellKind.LAYER
        return out.ravel()

    def coarse_cell_range(self) -> tuple[int, int]:
        """Half-open 1D index range of coarse cells."""
        return self.N // 4, 3 * self.N // 4

    def to_dict(self) -> dict:
        p = self.params
        return {
            "kind": self.gen.kind, "N": p.N, "sigma": p.sigma, "epsilon": p.epsilon,
            "lambda": p.lam, "h": self.h, "dim": self.dim,
            "nodes": [float(v) for v in self.nodes_x],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        return "".join(f"{v:.17g}\n" for v in self.nodes_x)


def _kinds_1d(N: int) -> np.ndarray:
    q = N // 4
    kinds = np.full(N, CellKind.LAYER, dtype=np.int8)
    kinds[q: 3 * q] = CellKind.COARSE
    kinds[q - 1] = CellKind.PLY
    kinds[3 * q] = CellKind.PLY
    return kinds


def build_mesh(gen: MeshGeneratingFunction, params: TransitionParams, dim: int = 1) -> STypeMesh:
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    params.check()
    if gen.N != params.N:
        raise ValueError(f"generator built for N={gen.N}, params have N={params.N}")
    gen.check()
    x = s_type_nodes(gen, params)
    if np.any(np.diff(x) <= 0):
        raise NonMonotonePhi("generated nodes are not strictly increasing")
    x.flags.writeable = False
    return STypeMesh(dim, x, params, gen, nodes_y=x if dim == 2 else None, kinds_1d=_kinds_1d(params.N))


def make_mesh(kind: str, N: int, epsilon: float, sigma: float, dim: int = 1) -> STypeMesh:
    """Convenience wrapper: ``build_mesh(generator(kind, N), TransitionParams(...), dim)``."""
    params = TransitionParams(epsilon, sigma, N)
    params.check()
    return build_mesh(generator(kind, N), params, dim)


def uniform_mesh(N: int, dim: int = 1) -> STypeMesh:
    """Uniform mesh as the degenerate Shishkin mesh with lam = 1/4."""
    eps = 1.0 / (4.0 * math.log(N))
    return build_mesh(shishkin(N), TransitionParams(eps, 1.0, N), dim)


def classify_cell(mesh: STypeMesh, cell_index) -> CellKind:
    """Coarse / Ply / Layer for a 1D index, 2D flat index or 2D ``(i, j)``."""
    N = mesh.N
    if mesh.dim == 1:
        i = int(cell_index)
        if not 0 <= i < N:
            raise IndexOutOfRange(f"cell {i} outside 0..{N - 1}")
        return CellKind(int(mesh.kinds_1d[i]))
    if isinstance(cell_index, tuple):
        i, j = cell_index
    else:
        if not 0 <= int(cell_index) < N * N:
            raise IndexOutOfRange(f"cell {cell_index} outside 0..{N * N - 1}")
        j, i = divmod(int(cell_index), N)
    if not (0 <= i < N and 0 <= j < N):
        raise IndexOutOfRange(f"cell ({i}, {j}) outside the {N}x{N} grid")
    kx, ky = mesh.kinds_1d[i], mesh.kinds_1d[j]
    if kx == CellKind.LAYER or ky == CellKind.LAYER:
        return CellKind.LAYER
    if kx == CellKind.COARSE and ky == CellKind.COARSE:
        return CellKind.COARSE
    return CellKind.PLY
