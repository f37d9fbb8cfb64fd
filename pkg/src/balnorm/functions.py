"""Closed-form functions with analytic derivatives of any order.

1D functions are called as ``f(x, d)`` (d-th derivative), 2D ones as
``f(x, y, dx, dy)``.  Exponentials are always stored as
``coef * exp(rate * (x - shift))`` with a non-positive exponent on [0, 1], so
layer terms never overflow however small epsilon is.
"""
from __future__ import annotations

import math

import numpy as np


class Expr:
    """Base class for 1D closed-form functions."""

    def __call__(self, x, d: int = 0):
        raise NotImplementedError

    def __add__(self, other: "Expr") -> "Sum":
        return Sum([self, other])

    def __neg__(self) -> "Expr":
        return Scaled(self, -1.0)

    def __sub__(self, other: "Expr") -> "Sum":
        return Sum([self, -other])

    def __mul__(self, s: float) -> "Expr":
        return Scaled(self, float(s))

    __rmul__ = __mul__


class Exp(Expr):
    def __init__(self, coef: float, rate: float, shift: float = 0.0):
        self.coef, self.rate, self.shift = float(coef), float(rate), float(shift)

    def __call__(self, x, d=0):
        x = np.asarray(x, dtype=float)
        return self.coef * self.rate**d * np.exp(self.rate * (x - self.shift))

    def __repr__(self):
        return f"Exp({self.coef:g}, {self.rate:g}, {self.shift:g})"


class Poly(Expr):
    """Polynomial with coefficients in increasing degree."""

    def __init__(self, coeffs):
        self.p = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))

    def __call__(self, x, d=0):
        x = np.asarray(x, dtype=float)
        q = self.p.deriv(d) if d else self.p
        return q(x) + 0.0 * x

    def __repr__(self):
        return f"Poly({list(self.p.coef)})"


class Cos(Expr):
    """amp * cos(omega x + phase)."""

    def __init__(self, amp: float, omega: float, phase: float = 0.0):
        self.amp, self.omega, self.phase = float(amp), float(omega), float(phase)

    def __call__(self, x, d=0):
        x = np.asarray(x, dtype=float)
        return self.amp * self.omega**d * np.cos(self.omega * x + self.phase + d * math.pi / 2)


def sin(amp: float, omega: float) -> Cos:
    return Cos(amp, omega, -math.pi / 2)


class Scaled(Expr):
    def __init__(self, f: Expr, s: float):
        self.f, self.s = f, s

    def __call__(self, x, d=0):
        return self.s * self.f(x, d)


class Sum(Expr):
    def __init__(self, terms):
        flat = []
        for t in terms:
            flat.extend(t.terms if isinstance(t, Sum) else [t])
        self.terms = flat

    def __call__(self, x, d=0):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for t in self.terms:
            out = out + t(x, d)
        return out


ZERO = Poly([0.0])
ONE = Poly([1.0])


class Tensor:
    """coef * gx(x) * gy(y) with analytic partial derivatives."""

    def __init__(self, gx: Expr, gy: Expr, coef: float = 1.0):
        self.gx, self.gy, self.coef = gx, gy, float(coef)

    def __call__(self, x, y, dx=0, dy=0):
        return self.coef * self.gx(x, dx) * self.gy(y, dy)


class Sum2D:
    def __init__(self, terms):
        self.terms = list(terms)

    def __call__(self, x, y, dx=0, dy=0):
        x = np.asarray(x, dtype=float)
        out = np.zeros(np.broadcast(x, np.asarray(y)).shape)
        for t in self.terms:
            out = out + t(x, y, dx, dy)
        return out


class Func2D:
    """Wrap a plain ``f(x, y)`` callable (no derivatives available)."""

    def __init__(self, fn):
        self.fn = fn

    def __call__(self, x, y, dx=0, dy=0):
        if dx or dy:
            raise NotImplementedError("derivatives not available for this function")
        return self.fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float))


class Func1D(Expr):
    """Wrap a plain ``f(x)`` callable (no derivatives available)."""

    def __init__(self, fn):
        self.fn = fn

    def __call__(self, x, d=0):
        if d:
            raise NotImplementedError("derivatives not available for this function")
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)
