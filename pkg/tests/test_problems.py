"""Problem catalog: exact solutions, residuals and layer decompositions."""
import math

import numpy as np
import pytest
import sympy as sp

from balnorm.errors import BadEpsilon, UnsupportedOrder
from balnorm.mesh import make_mesh
from balnorm.norms import norm_of_difference
from balnorm.functions import Exp
from balnorm.problems import CATALOG, ProblemSpec, get_problem, problem_1d_fourth_order

IDS = sorted(CATALOG)
rng = np.random.default_rng(7)


def test_const_midpoint_value():
    spec, _ = get_problem("rd1d-const", 0.1)
    expected = 1 - 2 * math.exp(-5) / (1 + math.exp(-10))
    assert spec.u_exact(0.5) == pytest.approx(expected, abs=1e-15)
    assert spec.u_exact(0.5) == pytest.approx(0.98652, abs=1e-5)
    for eps in (0.25, 1e-3, 1e-9):
        assert get_problem("rd1d-const", eps)[0].u_exact(0.0) == pytest.approx(0.0, abs=1e-15)


def test_const_residual():
    spec, _ = get_problem("rd1d-const", 0.01)
    x = rng.uniform(0, 1, 100)
    assert np.max(np.abs(-0.01**2 * spec.u_exact(x, 2) + spec.u_exact(x) - 1)) <= 1e-12


def test_2d_values():
    spec, _ = get_problem("rd2d-tensor", 0.1)
    assert spec.u_exact(0.5, 0.5) == pytest.approx(0.98652**2, abs=1e-4)
    assert spec.u_exact(0.5, 0.5) == pytest.approx(spec_1d_mid(0.1) ** 2, rel=1e-14)
    t = np.linspace(0, 1, 100)
    for x, y in ((t, 0 * t), (t, 0 * t + 1), (0 * t, t), (0 * t + 1, t)):
        assert np.max(np.abs(spec.u_exact(x, y))) <= 1e-15


def spec_1d_mid(eps):
    return get_problem("rd1d-const", eps)[0].u_exact(0.5)


@pytest.mark.parametrize("pid", IDS)
@pytest.mark.parametrize("eps", [0.25, 1e-2, 1e-4, 1e-8])
def test_residuals(pid, eps):
    spec, _ = get_problem(pid, eps)
    x = rng.uniform(0, 1, 200)
    if spec.dim == 1:
        r = spec.residual(x)
        scale = max(1.0, float(np.max(np.abs(spec.f(x)))))
    else:
        y = rng.uniform(0, 1, 200)
        r = spec.residual(x, y)
        scale = max(1.0, float(np.max(np.abs(spec.f(x, y)))))
    assert np.max(np.abs(r)) <= 1e-9 * scale


def _sympy_solution(pid, eps):
    """Independent symbolic formula of each catalog solution."""
    x = sp.symbols("x")
    e = sp.Rational(1, 1) * sp.nsimplify(eps)
    E = sp.exp(-1 / e)
    if pid == "rd1d-const":
        return x, 1 - (sp.exp(-x / e) + sp.exp(-(1 - x) / e)) / (1 + E)
    if pid == "rd1d-varc":
        a = -1 - E / 2
        b = sp.Rational(1, 2) - E / 2
        return x, sp.sin(sp.pi * x) + a + b * x + sp.exp(-x / e) + sp.exp(-(1 - x) / e) / 2
    if pid == "fourth1d-k1":
        # solve the 4x4 boundary system for A + Bx - x^2/2 + C e^{-x/eps} + D e^{-(1-x)/eps}
        A, B, C, D = sp.symbols("A B C D")
        u = A + B * x - x**2 / 2 + C * sp.exp(-x / e) + D * sp.exp(-(1 - x) / e)
        eqs = [u.subs(x, 0), sp.diff(u, x).subs(x, 0), u.subs(x, 1), sp.diff(u, x).subs(x, 1)]
        sol = sp.solve(eqs, [A, B, C, D], dict=True)[0]
        return x, u.subs(sol)
    raise KeyError(pid)


@pytest.mark.parametrize("pid", ["rd1d-const", "rd1d-varc", "fourth1d-k1"])
def test_against_sympy(pid):
    eps = 0.1
    spec, _ = get_problem(pid, eps)
    x, u = _sympy_solution(pid, eps)
    pts = np.linspace(0, 1, 23)
    for d in range(2 * spec.m + 1):
        fn = sp.lambdify(x, sp.diff(u, x, d), "mpmath")
        ref = np.array([float(fn(sp.Float(t, 30))) for t in pts])
        assert np.allclose(spec.u_exact(pts, d), ref, rtol=1e-12, atol=1e-12 * eps**-d)
    if pid != "fourth1d-k1":
        c = sp.sympify(1) if pid == "rd1d-const" else 1 + x * (1 - x)
        f = -e2(eps) * sp.diff(u, x, 2) + c * u
        fn = sp.lambdify(x, f, "mpmath")
        assert np.allclose(spec.f(pts), [float(fn(sp.Float(t, 30))) for t in pts], atol=1e-11)


def e2(eps):
    return sp.nsimplify(eps) ** 2


def test_2d_rhs_against_sympy():
    eps = 0.1
    x, y = sp.symbols("x y")
    _, g = _sympy_solution("rd1d-const", eps)
    u = g * g.subs(x, y)
    f = -sp.nsimplify(eps) ** 2 * (sp.diff(u, x, 2) + sp.diff(u, y, 2)) + u
    fn = sp.lambdify((x, y), f, "mpmath")
    spec, _ = get_problem("rd2d-tensor", eps)
    pts = rng.uniform(0, 1, (20, 2))
    ref = [float(fn(sp.Float(a, 30), sp.Float(b, 30))) for a, b in pts]
    assert np.allclose(spec.f(pts[:, 0], pts[:, 1]), ref, atol=1e-11)


def test_fourth_k1_boundary_system():
    eps = 0.1
    E = math.exp(-1 / eps)
    # rows: u(0), u'(0), u(1), u'(1) for unknowns (A, B, C, D); rhs from -x^2/2
    M = np.array([[1, 0, 1, E], [0, 1, -1 / eps, E / eps], [1, 1, E, 1], [0, 1, -E / eps, 1 / eps]])
    rhs = np.array([0, 0, 0.5, 1.0])
    A, B, C, D = np.linalg.solve(M, rhs)
    spec, decomp = get_problem("fourth1d-k1", eps)
    x = np.linspace(0, 1, 50)
    ref = A + B * x - x**2 / 2 + C * np.exp(-x / eps) + D * np.exp(-(1 - x) / eps)
    assert np.allclose(spec.u_exact(x), ref, atol=1e-13)
    for d in (0, 1):
        assert abs(spec.u_exact(0.0, d)) <= 1e-12 and abs(spec.u_exact(1.0, d)) <= 1e-12


@pytest.mark.parametrize("pid", IDS)
@pytest.mark.parametrize("eps", [1e-2, 1e-5])
def test_boundary_conditions(pid, eps):
    spec, _ = get_problem(pid, eps)
    if spec.dim == 1:
        for d in range(spec.m):
            vals = spec.u_exact(np.array([0.0, 1.0]), d)
            assert np.max(np.abs(vals)) <= 1e-10 * max(1.0, eps ** (1 - d - (spec.m - spec.k)))
        return
    t = np.linspace(0, 1, 100)
    for x, y in ((t, 0 * t), (t, 0 * t + 1), (0 * t, t), (0 * t + 1, t)):
        assert np.max(np.abs(spec.u_exact(x, y))) <= 1e-10


@pytest.mark.parametrize("pid", IDS)
@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-6])
def test_layer_bounds(pid, eps):
    spec, decomp = get_problem(pid, eps)
    C = decomp.derivative_bounds["w"]
    x = np.concatenate([np.linspace(0, 1, 500), rng.uniform(0, 20 * eps, 500)])
    w1 = decomp.w[0]
    for i in range(2 * spec.m + 1):
        if spec.dim == 1:
            vals = w1(x, i)
        else:
            vals = w1(x, 0.5 * np.ones_like(x), i, 0)
        bound = C * eps ** (spec.m - spec.k - i) * np.exp(-x / eps)
        assert np.all(np.abs(vals) <= bound * (1 + 1e-12) + 1e-300)


def test_corner_layer_bound():
    eps = 1e-3
    _, decomp = get_problem("rd2d-tensor", eps)
    c1 = decomp.corner[0]
    x, y = rng.uniform(0, 0.05, (2, 1000))
    assert np.all(np.abs(c1(x, y)) <= decomp.derivative_bounds["corner"] * np.exp(-(x + y) / eps) * (1 + 1e-12))


def test_fourth_k1_slope_constant_eps_independent():
    consts = []
    for eps in (1e-2, 1e-4, 1e-6):
        _, decomp = get_problem("fourth1d-k1", eps)
        x = np.linspace(0, 1, 10001) * 30 * eps
        consts.append(np.max(np.abs(decomp.w[0](x, 1)) * np.exp(x / eps)))
    assert max(consts) / min(consts) < 1.1
    assert max(consts) <= 1.0


@pytest.mark.parametrize("pid", IDS)
def test_decomposition_sum(pid):
    spec, decomp = get_problem(pid, 1e-3)
    x = rng.uniform(0, 1, 300)
    if spec.dim == 1:
        total = decomp.v(x) + sum(w(x) for w in decomp.layers)
        assert np.allclose(total, spec.u_exact(x), atol=1e-12)
    else:
        y = rng.uniform(0, 1, 300)
        total = decomp.v(x, y) + sum(w(x, y) for w in decomp.layers)
        assert np.allclose(total, spec.u_exact(x, y), atol=1e-12)
        assert len(decomp.w) == 4 and len(decomp.corner) == 4


@pytest.mark.parametrize("pid", IDS)
def test_c_bounded_below(pid):
    spec, _ = get_problem(pid, 1e-3)
    x = np.linspace(0, 1, 1000)
    vals = spec.c(x) if spec.dim == 1 else spec.c(x, x[::-1])
    assert np.all(np.asarray(vals) >= spec.gamma)


@pytest.mark.parametrize("eps", [0.0, -1e-3, 0.3, 1.0])
@pytest.mark.parametrize("pid", IDS)
def test_bad_epsilon(pid, eps):
    with pytest.raises(BadEpsilon):
        get_problem(pid, eps)


def test_unsupported_orders():
    with pytest.raises(UnsupportedOrder):
        problem_1d_fourth_order(1e-3, k=3)
    with pytest.raises(UnsupportedOrder):
        ProblemSpec("x", 1, 2, 0.1, 1, None, 1.0, None, ())
    with pytest.raises(UnsupportedOrder):
        ProblemSpec("x", 2, 1, 0.1, 2, None, 1.0, None, ())


@pytest.mark.parametrize("m,k", [(1, 1), (2, 1), (2, 2)])
def test_layer_function_norm_scaling(m, k):
    energies, balanced = [], []
    for eps in (1e-2, 1e-4, 1e-6):
        w = Exp(eps ** (m - k), -1 / eps)
        mesh = make_mesh("shishkin", 256, eps, 4)
        rep = norm_of_difference(w, None, mesh, m=m, k=k, epsilon=eps, degree=3)
        energies.append(rep.energy / math.sqrt(eps))
        balanced.append(rep.balanced)
    assert all(0.5 <= r <= 2.0 for r in energies)
    b0 = balanced[-1]
    assert all(0.5 * b0 <= b <= 2 * b0 for b in balanced)
