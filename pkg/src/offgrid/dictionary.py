"""Parametric feature families and their derivatives in the parameter."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .measure import GridMeasure, inner

FAMILIES = ("gaussian_translate", "cauchy_translate", "sinc_translate", "exp_scale")
MAX_ORDER = 3


class DomainError(ValueError):
    pass


# Probabilists' Hermite-type polynomials: d^i/dx^i exp(-x^2/2) = P_i(x) exp(-x^2/2)
_HERMITE = [
    np.array([1.0]),
    np.array([0.0, -1.0]),
    np.array([-1.0, 0.0, 1.0]),
    np.array([0.0, 3.0, 0.0, -1.0]),
    np.array([3.0, 0.0, -6.0, 0.0, 1.0]),
    np.array([0.0, -15.0, 0.0, 10.0, 0.0, -1.0]),
    np.array([-15.0, 0.0, 45.0, 0.0, -15.0, 0.0, 1.0]),
]


def hermite_poly(i: int, x):
    """``P_i`` with ``k^{(i)} = P_i k`` for ``k(x) = exp(-x^2/2)``, i <= 6."""
    return np.polynomial.polynomial.polyval(x, _HERMITE[i])


def gaussian_profile(x, i: int = 0):
    x = np.asarray(x, dtype=float)
    return hermite_poly(i, x) * np.exp(-0.5 * x * x)


def cauchy_profile(x, i: int = 0):
    x = np.asarray(x, dtype=float)
    q = 1.0 + x * x
    if i == 0:
        return 1.0 / q
    if i == 1:
        return -2.0 * x / q**2
    if i == 2:
        return (6.0 * x * x - 2.0) / q**3
    if i == 3:
        return 24.0 * x * (1.0 - x * x) / q**4
    raise ValueError("order > 3")


_SINC_TERMS = 14


def _sinc_series(u, m):
    # m-th derivative of sin(u)/u from its Taylor series
    out = np.zeros_like(u)
    for n in range(_SINC_TERMS):
        p = 2 * n - m
        if p < 0:
            continue
        c = (-1) ** n * factorial(2 * n) / (factorial(p) * factorial(2 * n + 1))
        out += c * u**p
    return out


def _sinc_closed(u, m):
    s, c = np.sin(u), np.cos(u)
    if m == 0:
        return s / u
    if m == 1:
        return c / u - s / u**2
    if m == 2:
        return -s / u - 2 * c / u**2 + 2 * s / u**3
    return -c / u + 3 * s / u**2 + 6 * c / u**3 - 6 * s / u**4


def sinc_profile(x, i: int = 0):
    """Derivatives of ``sin(pi x)/(pi x)``; a series is used close to the origin."""
    if i > 3:
        raise ValueError("order > 3")
    x = np.asarray(x, dtype=float)
    u = np.pi * x
    small = np.abs(u) < 0.5
    out = np.empty_like(u)
    out[small] = _sinc_series(u[small], i)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~small] = _sinc_closed(u[~small], i)
    return out * np.pi**i


_PROFILES = {
    "gaussian_translate": gaussian_profile,
    "cauchy_translate": cauchy_profile,
    "sinc_translate": sinc_profile,
}


@dataclass(frozen=True)
class DictionarySpec:
    """A feature family ``theta -> phi(theta)`` sampled on grids.

    ``warp = (a, b)`` reparametrizes the family as ``theta -> phi(a*theta + b)``.
    """

    family: str
    scale: float = 1.0
    theta_domain: tuple[float, float] = (-np.inf, np.inf)
    warp: tuple[float, float] = field(default=(1.0, 0.0))

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.warp[0] == 0:
            raise ValueError("warp slope must be nonzero")
        lo, hi = self.theta_domain
        if self.family == "exp_scale":
            # the rate a*theta+b has to stay positive
            a, b = self.warp
            edge = -b / a
            if a > 0:
                lo = max(lo, edge)
            else:
                hi = min(hi, edge)
        if not lo < hi:
            raise ValueError("empty parameter domain")
        object.__setattr__(self, "theta_domain", (float(lo), float(hi)))

    def check_domain(self, theta) -> np.ndarray:
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        lo, hi = self.theta_domain
        strict = self.family == "exp_scale"
        bad = ~np.isfinite(th) | (th < lo) | (th > hi)
        if strict:
            bad |= (th <= lo) if np.isfinite(lo) else False
        if np.any(bad):
            raise DomainError(f"parameter {th[bad][0]!r} outside {self.theta_domain}")
        return th

    def derivatives(self, theta, t, order: int = MAX_ORDER) -> np.ndarray:
        """Array ``D[n, i, :]`` of the i-th parameter derivative at ``theta[n]`` on points ``t``."""
        if order > MAX_ORDER:
            raise ValueError("derivatives available up to order 3")
        th = self.check_domain(theta)
        t = np.asarray(t, dtype=float)
        a, b = self.warp
        p = a * th + b
        out = np.empty((th.size, order + 1, t.size))
        if self.family == "exp_scale":
            e = np.exp(-np.outer(p, t))
            for i in range(order + 1):
                out[:, i] = (a**i) * (-t) ** i * e
            return out
        prof = _PROFILES[self.family]
        x = (t[None, :] - p[:, None]) / self.scale
        for i in range(order + 1):
            out[:, i] = (-a / self.scale) ** i * prof(x, i)
        return out

    def feature(self, theta: float, measure: GridMeasure, order: int = 0):
        """i-th parameter derivative of the raw (unnormalized) feature as a vector."""
        from .measure import HilbertVector

        return HilbertVector(self.derivatives([theta], measure.points, order)[0, order], measure)


@dataclass
class RegularityReport:
    ok: bool
    min_norm: float
    min_gram: float
    failures: list = field(default_factory=list)


def check_regularity(spec: DictionarySpec, measure: GridMeasure, probes,
                     tol: float = 1e-10) -> RegularityReport:
    """Check that ``phi`` is nonzero and ``(phi, d phi)`` are linearly independent.

    The Gram determinant is scale free: ``1 - cos^2`` of the angle between the two.
    """
    probes = np.atleast_1d(np.asarray(probes, dtype=float))
    D = spec.derivatives(probes, measure.points, order=1)
    w = measure.weights
    failures = []
    min_norm, min_gram = np.inf, np.inf
    for n, th in enumerate(probes):
        f0, f1 = D[n, 0], D[n, 1]
        a00 = inner(f0, f0, w)
        a11 = inner(f1, f1, w)
        a01 = inner(f0, f1, w)
        nrm = np.sqrt(a00)
        gram = 1.0 - a01**2 / (a00 * a11) if a00 > 0 and a11 > 0 else 0.0
        min_norm = min(min_norm, nrm)
        min_gram = min(min_gram, gram)
        if nrm <= tol:
            failures.append((float(th), "zero feature"))
        elif gram <= tol:
            failures.append((float(th), "feature and derivative are collinear"))
    return RegularityReport(not failures, float(min_norm), float(min_gram), failures)
