"""Independent reference computations used by the tests."""

from __future__ import annotations

import numpy as np
import sympy as sp
from scipy import integrate

from offgrid.dictionary import DictionarySpec


def normalized(spec: DictionarySpec, theta: float, t, w):
    f = spec.derivatives([theta], t, order=0)[0, 0]
    return f / np.sqrt(np.sum(w * f * f))


def fd(fun, x, h, order):
    """Central differences on a 7-point stencil (accurate to h^4 for orders 1..3)."""
    st = {1: [-1 / 60, 3 / 20, -3 / 4, 0, 3 / 4, -3 / 20, 1 / 60],
          2: [1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90],
          3: [1 / 8, -1, 13 / 8, 0, -13 / 8, 1, -1 / 8]}[order]
    return sum(c * fun(x + (k - 3) * h) for k, c in enumerate(st)) / h**order


def metric_fd(spec, theta, t, w, h=1e-4):
    d = fd(lambda x: normalized(spec, x, t, w), theta, h, 1)
    return float(np.sum(w * d * d))


def covariant_fd(spec, theta, t, w, h=2e-3):
    """phi^[1], phi^[2] by differentiating the normalized feature numerically."""
    g = lambda x: metric_fd(spec, x, t, w)  # noqa: E731
    p1 = lambda x: fd(lambda y: normalized(spec, y, t, w), x, h, 1) / np.sqrt(g(x))  # noqa: E731
    f2 = fd(p1, theta, h, 1) / np.sqrt(g(theta))
    return p1(theta), f2


def hermite_sympy(i):
    x = sp.symbols("x")
    k = sp.exp(-x**2 / 2)
    return sp.lambdify(x, sp.simplify(sp.diff(k, x, i) / k), "numpy")


def cauchy_sympy(i):
    x = sp.symbols("x")
    return sp.lambdify(x, sp.diff(1 / (1 + x**2), x, i), "numpy")


def primitive_quad(ctx, a, b):
    val, err = integrate.quad(lambda x: np.sqrt(ctx.metric([x])[0]), a, b, epsabs=1e-12, epsrel=1e-12, limit=200)
    return val
