"""Quadrature rules and reference-cell bases on [-1, 1].

Two polynomial families are provided:

* ``LagrangeGL(p)``: nodal Lagrange basis of degree ``p`` interpolating at the
  ``p + 1`` Gauss-Lobatto points (C0 elements).
* ``Hermite(m)``: the C^(m-1) Hermite basis of degree ``2m - 1``.  Local dofs
  are ordered ``[value_left, slope_left, value_right, slope_right]`` for m = 2.
  Slope functions are normalised in the reference coordinate, so on a
  physical cell of width h they must be multiplied by ``h / 2``
  (see :meth:`ReferenceBasis.dof_scale`).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import TooFewPoints, UnsupportedOrder

_NEWTON_TOL = 1e-15
_NEWTON_MAXIT = 100


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    @property
    def n_points(self) -> int:
        return len(self.points)

    def integrate(self, fn) -> float:
        """Integrate a vectorised callable over [-1, 1]."""
        return float(np.dot(self.weights, fn(self.points)))


def _legendre(n: int, x: np.ndarray):
    """Return P_n(x), P_{n-1}(x) by the three-term recurrence."""
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev, np.zeros_like(x)
    p = x.copy()
    for j in range(2, n + 1):
        p_prev, p = p, ((2 * j - 1) * x * p - (j - 1) * p_prev) / j
    return p, p_prev


@lru_cache(maxsize=None)
def gauss_legendre(n_points: int) -> QuadratureRule:
    """Gauss-Legendre rule with ``n_points`` nodes, exact to degree 2n-1."""
    n = int(n_points)
    if n < 1:
        raise TooFewPoints(f"Gauss-Legendre needs at least 1 point, got {n}")
    i = np.arange(1, n + 1)
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(_NEWTON_MAXIT):
        p, p_prev = _legendre(n, x)
        dp = n * (x * p - p_prev) / (x**2 - 1.0)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    p, p_prev = _legendre(n, x)
    dp = n * (x * p - p_prev) / (x**2 - 1.0)
    w = 2.0 / ((1.0 - x**2) * dp**2)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # exact symmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.flags.writeable = False
    w.flags.writeable = False
    return QuadratureRule(x, w, 2 * n - 1)


@lru_cache(maxsize=None)
def gauss_lobatto(n_points: int) -> QuadratureRule:
    """Gauss-Lobatto rule with ``n_points`` nodes including both endpoints.

    The nodes are the zeros of ``(1 - x^2) P'_{n-1}(x)``; exact to degree 2n-3.
    """
    n = int(n_points)
    if n < 2:
        raise TooFewPoints(f"Gauss-Lobatto needs at least 2 points, got {n}")
    deg = n - 1
    # Chebyshev-Gauss-Lobatto initial guess; Newton on x P_N - P_{N-1} = 0
    x = -np.cos(np.pi * np.arange(n) / deg)
    for _ in range(_NEWTON_MAXIT):
        p, p_prev = _legendre(deg, x)
        dx = (x * p - p_prev) / (n * p)
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    x[0], x[-1] = -1.0, 1.0
    x = 0.5 * (x - x[::-1])
    p, _ = _legendre(deg, x)
    w = 2.0 / (deg * n * p**2)
    w = 0.5 * (w + w[::-1])
    x.flags.writeable = False
    w.flags.writeable = False
    return QuadratureRule(x, w, 2 * n - 3)


def default_quadrature(p: int) -> QuadratureRule:
    """Assembly/norm rule: max(p + 2, 6) Gauss-Legendre points per direction."""
    return gauss_legendre(max(p + 2, 6))


def _hermite_cubic_coeffs() -> list[np.ndarray]:
    # shape functions on s in [0, 1]; slopes rescaled to d/dxi = 1
    in_s = [
        np.array([1.0, 0.0, -3.0, 2.0]),
        2.0 * np.array([0.0, 1.0, -2.0, 1.0]),
        np.array([0.0, 0.0, 3.0, -2.0]),
        2.0 * np.array([0.0, 0.0, -1.0, 1.0]),
    ]
    s_of_xi = np.polynomial.Polynomial([0.5, 0.5])
    return [np.polynomial.Polynomial(c)(s_of_xi).coef for c in in_s]


@dataclass(frozen=True)
class ReferenceBasis:
    """Polynomial basis on the reference cell [-1, 1].

    Use :func:`lagrange_gl` or :func:`hermite` to construct.
    """

    family: str
    degree: int
    m: int = 1

    @cached_property
    def nodes(self) -> np.ndarray:
        """Interpolation nodes (Gauss-Lobatto for Lagrange, endpoints for Hermite)."""
        if self.family == "lagrange":
            return np.asarray(gauss_lobatto(self.degree + 1).points)
        return np.array([-1.0, 1.0])

    @property
    def continuity(self) -> int:
        return 0 if self.family == "lagrange" else self.m - 1

    @property
    def n_local(self) -> int:
        return self.degree + 1

    @property
    def dofs_per_node(self) -> int:
        """Number of dofs attached to each cell vertex."""
        return 1 if self.family == "lagrange" else self.m

    @cached_property
    def _coeffs(self) -> list[np.ndarray]:
        if self.family == "lagrange":
            out = []
            xs = self.nodes
            for j, xj in enumerate(xs):
                others = np.delete(xs, j)
                c = npoly.polyfromroots(others) / np.prod(xj - others)
                out.append(c)
            return out
        if self.m == 1:
            return [np.array([0.5, -0.5]), np.array([0.5, 0.5])]
        return _hermite_cubic_coeffs()

    def eval(self, xi, d: int = 0) -> np.ndarray:
        """Tabulate the ``d``-th xi-derivative; shape ``(n_local, len(xi))``."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        rows = []
        for c in self._coeffs:
            cd = npoly.polyder(c, d) if d else c
            rows.append(npoly.polyval(xi, cd))
        return np.array(rows)

    def dof_scale(self, h) -> np.ndarray:
        """Per-dof factor mapping reference to physical basis on width ``h``.

        Returns shape ``(len(h), n_local)`` for array ``h``.
        """
        h = np.atleast_1d(np.asarray(h, dtype=float))
        scale = np.ones((len(h), self.n_local))
        if self.family == "hermite" and self.m == 2:
            scale[:, 1] = 0.5 * h
            scale[:, 3] = 0.5 * h
        return scale


def lagrange_gl(p: int) -> ReferenceBasis:
    if p < 1:
        raise UnsupportedOrder(f"Lagrange degree must be >= 1, got {p}")
    return ReferenceBasis("lagrange", int(p), 1)


def hermite(m: int = 2) -> ReferenceBasis:
    if m not in (1, 2):
        raise UnsupportedOrder(f"Hermite basis implemented for m in {{1, 2}}, got {m}")
    return ReferenceBasis("hermite", 2 * m - 1, m)


def hermite_transition_norms(m: int, k: int, h: float, n_samples: int = 4001) -> np.ndarray:
    """W^{m-k,inf} norms of the transition-node Hermite functions on one cell.

    The cell is ``tau = (lam - h, lam)`` and ``phi_n`` is the basis function
    carrying the n-th derivative dof at ``lam`` (n = 0..m-1).  The norm is the
    maximum over derivative orders 0..m-k of the sampled sup of |D^j phi_n|.
    """
    if not (1 <= k <= m):
        raise UnsupportedOrder(f"need 1 <= k <= m, got m={m}, k={k}")
    if m > 2:
        raise UnsupportedOrder(f"m > 2 not supported, got m={m}")
    if h <= 0:
        raise ValueError("cell width must be positive")
    b = hermite(m)
    xi = np.linspace(-1.0, 1.0, n_samples)
    scale = b.dof_scale(h)[0]
    # dofs at the right node of the reference cell
    right = [1] if m == 1 else [2, 3]
    out = np.zeros(m)
    for n, j in enumerate(right):
        vals = [np.max(np.abs(b.eval(xi, d)[j] * scale[j] * (2.0 / h) ** d)) for d in range(m - k + 1)]
        out[n] = max(vals)
    return out
