"""Catalog of model problems with exact solutions and layer decompositions.

Every problem has the weak form

    eps^{2k} (D^m u, D^m v) + a~(u, v) = (f, v),     u in H^m_0,

on (0, 1) or (0, 1)^2, where ``a~`` is a sum of weighted L2 products of
derivatives.  The exact solution is split into a smooth part, boundary
layers and (in 2D) corner layers, with layers decaying exactly like
``exp(-dist/eps)``.

Catalog ids: ``rd1d-const``, ``rd1d-varc``, ``rd2d-tensor``, ``fourth1d-k1``,
``fourth1d-k2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BadEpsilon, UnsupportedOrder
from .functions import ONE, Cos, Exp, Expr, Poly, Sum, Sum2D, Tensor, sin


@dataclass(frozen=True)
class ATildeTerm:
    """One term ``(weight * D^order u, D^order v)`` of the lower-order form."""

    order: int
    weight: Callable | None = None  # None means weight 1


@dataclass(frozen=True)
class SolutionDecomposition:
    u: object
    v: object
    w: tuple = ()
    corner: tuple = ()
    # |D^i w_j| <= C eps^(m-k-i) exp(-dist/eps) holds with C = derivative_bounds["w"]
    derivative_bounds: dict = field(default_factory=dict)

    @property
    def layers(self) -> tuple:
        """All non-smooth parts (edge plus corner layers)."""
        return tuple(self.w) + tuple(self.corner)

    def layer_sum(self):
        parts = self.layers
        if not parts:
            return None
        if isinstance(parts[0], Tensor):
            return Sum2D(parts)
        return Sum(parts)


@dataclass(frozen=True)
class ProblemSpec:
    id: str
    m: int
    k: int
    epsilon: float
    dim: int
    c: Callable
    gamma: float
    f: Callable
    a_tilde: tuple
    solution: SolutionDecomposition | None = None

    def __post_init__(self):
        if not (1 <= self.k <= self.m <= 2):
            raise UnsupportedOrder(f"need 1 <= k <= m <= 2, got m={self.m}, k={self.k}")
        if self.dim == 2 and self.m != 1:
            raise UnsupportedOrder("2D problems are only supported for m = 1")

    @property
    def u_exact(self):
        return self.solution.u

    def residual(self, x, y=None):
        """Strong-form residual ``L u_exact - f`` at points."""
        return strong_operator(self, self.u_exact, x, y) - (self.f(x) if self.dim == 1 else self.f(x, y))


def strong_operator(spec: ProblemSpec, u, x, y=None):
    """Apply ``(-1)^m eps^{2k} D^{2m} + (strong form of a~)`` to ``u``."""
    e2k = spec.epsilon ** (2 * spec.k)
    sign = (-1) ** spec.m
    if spec.dim == 1:
        out = sign * e2k * u(x, 2 * spec.m)
        for t in spec.a_tilde:
            wt = 1.0 if t.weight is None else t.weight(x)
            if t.order == 0:
                out = out + wt * u(x, 0)
            elif t.order == 1:
                if t.weight is not None:
                    raise UnsupportedOrder("variable weight on first-order a~ term")
                out = out - u(x, 2)
            else:
                raise UnsupportedOrder(f"a~ term of order {t.order}")
        return out
    lap = u(x, y, 2, 0) + u(x, y, 0, 2)
    out = -e2k * lap
    for t in spec.a_tilde:
        if t.order != 0:
            raise UnsupportedOrder("2D a~ terms must be of order 0")
        wt = 1.0 if t.weight is None else t.weight(x, y)
        out = out + wt * u(x, y)
    return out


def _check_eps(epsilon: float) -> float:
    eps = float(epsilon)
    if not (0.0 < eps <= 0.25):
        raise BadEpsilon(f"epsilon must lie in (0, 1/4], got {epsilon}")
    return eps


def _const_1d_parts(eps: float):
    E = math.exp(-1.0 / eps)
    D = 1.0 + E
    return ONE, Exp(-1.0 / D, -1.0 / eps, 0.0), Exp(-1.0 / D, 1.0 / eps, 1.0)


def problem_1d_reaction(epsilon: float, variant: str = "const"):
    """-eps^2 u'' + c u = f on (0, 1), u(0) = u(1) = 0.

    ``variant="const"``: c = f = 1 with the closed-form solution
    ``1 - (e^{-x/eps} + e^{-(1-x)/eps}) / (1 + e^{-1/eps})``.
    ``variant="varc"``: c = 1 + x(1-x), manufactured
    ``u = sin(pi x) + a + b x + e^{-x/eps} + e^{-(1-x)/eps}/2``.
    """
    eps = _check_eps(epsilon)
    if variant in ("const", "ConstantOne"):
        v, w1, w2 = _const_1d_parts(eps)
        u = Sum([v, w1, w2])
        decomp = SolutionDecomposition(u, v, (w1, w2), derivative_bounds={"w": 1.0})
        return ProblemSpec("rd1d-const", 1, 1, eps, 1, c=ONE, gamma=1.0, f=ONE,
                           a_tilde=(ATildeTerm(0, None),), solution=decomp), decomp
    if variant in ("varc", "VariableC"):
        E = math.exp(-1.0 / eps)
        a = -1.0 - 0.5 * E
        b = 0.5 - 0.5 * E
        v = sin(1.0, math.pi) + Poly([a, b])
        w1 = Exp(1.0, -1.0 / eps, 0.0)
        w2 = Exp(0.5, 1.0 / eps, 1.0)
        u = Sum([v, w1, w2])
        c = Poly([1.0, 1.0, -1.0])
        decomp = SolutionDecomposition(u, v, (w1, w2), derivative_bounds={"w": 1.0})
        spec = ProblemSpec("rd1d-varc", 1, 1, eps, 1, c=c, gamma=1.0, f=None,
                           a_tilde=(ATildeTerm(0, c),), solution=decomp)
        return _with_manufactured_f(spec), decomp
    raise ValueError(f"unknown variant {variant!r}")


def problem_2d_reaction(epsilon: float):
    """-eps^2 Lap u + u = f on the unit square with u(x, y) = g(x) g(y).

    ``g`` is the 1D constant-coefficient solution, so ``-eps^2 g'' = 1 - g`` and
    ``f = g(x) + g(y) - g(x) g(y)``.
    """
    eps = _check_eps(epsilon)
    v1, w1, w2 = _const_1d_parts(eps)
    g = Sum([v1, w1, w2])
    u = Tensor(g, g)
    v = Tensor(ONE, ONE)
    edges = (Tensor(w1, ONE), Tensor(w2, ONE), Tensor(ONE, w1), Tensor(ONE, w2))
    corners = (Tensor(w1, w1), Tensor(w2, w1), Tensor(w2, w2), Tensor(w1, w2))

    def f(x, y):
        gx, gy = g(x), g(y)
        return gx + gy - gx * gy

    decomp = SolutionDecomposition(u, v, edges, corners, derivative_bounds={"w": 1.0, "corner": 1.0})
    spec = ProblemSpec("rd2d-tensor", 1, 1, eps, 2, c=lambda x, y: np.ones(np.broadcast(x, y).shape),
                       gamma=1.0, f=f, a_tilde=(ATildeTerm(0, None),), solution=decomp)
    return spec, decomp


def _hermite_fix(values) -> Poly:
    """Cubic q with (q(0), q'(0), q(1), q'(1)) = values."""
    A = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [1, 1, 1, 1], [0, 1, 2, 3]], dtype=float)
    return Poly(np.linalg.solve(A, np.asarray(values, dtype=float)))


def problem_1d_fourth_order(epsilon: float, k: int = 1):
    """eps^{2k} (u'', v'') + a~(u, v) = (f, v) with clamped ends.

    ``k=1``: eps^2 u'''' - u'' = 1, a~(u, v) = (u', v').  Exact solution
    ``A + B x - x^2/2 + C (e^{-x/eps} + e^{-(1-x)/eps})`` with B = 1/2,
    C = eps / (2 (1 - e^{-1/eps})), A = -C (1 + e^{-1/eps}).
    ``k=2``: eps^4 u'''' + u = f, a~(u, v) = (u, v), manufactured
    ``u = sin^2(pi x) + q(x) + w1 + w2`` with the O(1) layer
    ``w1 = e^{-x/eps} (1 - e^{-x/eps})^2`` and a cubic q restoring the
    clamped conditions at the far ends.
    """
    eps = _check_eps(epsilon)
    E = math.exp(-1.0 / eps)
    if k == 1:
        C = eps / (2.0 * (1.0 - E))
        A = -C * (1.0 + E)
        v = Poly([A, 0.5, -0.5])
        w1 = Exp(C, -1.0 / eps, 0.0)
        w2 = Exp(C, 1.0 / eps, 1.0)
        u = Sum([v, w1, w2])
        decomp = SolutionDecomposition(u, v, (w1, w2), derivative_bounds={"w": 1.0 / (2.0 * (1.0 - E))})
        spec = ProblemSpec("fourth1d-k1", 2, 1, eps, 1, c=ONE, gamma=1.0, f=ONE,
                           a_tilde=(ATildeTerm(1, None),), solution=decomp)
        return spec, decomp
    if k == 2:
        w1 = Sum([Exp(1.0, -1.0 / eps), Exp(-2.0, -2.0 / eps), Exp(1.0, -3.0 / eps)])
        w2 = Sum([Exp(1.0, 1.0 / eps, 1.0), Exp(-2.0, 2.0 / eps, 1.0), Exp(1.0, 3.0 / eps, 1.0)])
        layers = Sum([w1, w2])
        q = _hermite_fix([-layers(0.0, 0), -layers(0.0, 1), -layers(1.0, 0), -layers(1.0, 1)])
        # sin^2(pi x) = 1/2 - cos(2 pi x)/2
        v = Sum([Poly([0.5]), Cos(-0.5, 2.0 * math.pi), q])
        u = Sum([v, w1, w2])
        decomp = SolutionDecomposition(u, v, (w1, w2), derivative_bounds={"w": 1.0 + 2.0 * 2**4 + 3.0**4})
        spec = ProblemSpec("fourth1d-k2", 2, 2, eps, 1, c=ONE, gamma=1.0, f=None,
                           a_tilde=(ATildeTerm(0, None),), solution=decomp)
        return _with_manufactured_f(spec), decomp
    raise UnsupportedOrder(f"k must be 1 or 2, got {k}")


def _with_manufactured_f(spec: ProblemSpec) -> ProblemSpec:
    u = spec.solution.u

    def f(x, y=None):
        return strong_operator(spec, u, x, y)

    return ProblemSpec(spec.id, spec.m, spec.k, spec.epsilon, spec.dim, spec.c, spec.gamma, f,
                       spec.a_tilde, spec.solution)


def manufactured_1d(u: Expr, epsilon: float, m: int = 1, k: int = 1, c: Expr | None = None,
                    problem_id: str = "manufactured") -> ProblemSpec:
    """Problem whose exact solution is ``u`` (no layer decomposition: v = u)."""
    if m == 1:
        a_tilde = (ATildeTerm(0, c),)
    elif k == 1:
        a_tilde = (ATildeTerm(1, None),)
    else:
        a_tilde = (ATildeTerm(0, None),)
    decomp = SolutionDecomposition(u, u)
    spec = ProblemSpec(problem_id, m, k, float(epsilon), 1, c=c if c is not None else ONE,
                       gamma=1.0, f=None, a_tilde=a_tilde, solution=decomp)
    return _with_manufactured_f(spec)


CATALOG = {
    "rd1d-const": lambda eps: problem_1d_reaction(eps, "const"),
    "rd1d-varc": lambda eps: problem_1d_reaction(eps, "varc"),
    "rd2d-tensor": problem_2d_reaction,
    "fourth1d-k1": lambda eps: problem_1d_fourth_order(eps, 1),
    "fourth1d-k2": lambda eps: problem_1d_fourth_order(eps, 2),
}


def get_problem(problem_id: str, epsilon: float):
    """Look up a catalog problem; returns ``(ProblemSpec, SolutionDecomposition)``."""
    try:
        factory = CATALOG[problem_id]
    except KeyError:
        raise ValueError(f"unknown problem {problem_id!r}; choose from {sorted(CATALOG)}") from None
    return factory(epsilon)
