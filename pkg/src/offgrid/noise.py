"""Noise processes on a grid and tail bounds for their kernel suprema."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .kernel import KernelContext, LimitConstants
from .measure import GridMeasure, HilbertVector


class NoiseModelError(ValueError):
    pass


class NoiseModel:
    """Base class. ``declared(measure)`` returns the pair ``(sigma, Delta)`` with
    ``Var <f, w> <= sigma^2 Delta ||f||^2``."""

    def declared(self, measure: GridMeasure) -> tuple[float, float]:
        raise NotImplementedError

    def _draw(self, measure: GridMeasure, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def sample(self, measure: GridMeasure, rng=None, size: int | None = None):
        rng = np.random.default_rng(rng)
        if size is None:
            return HilbertVector(self._draw(measure, rng, 1)[0], measure)
        return self._draw(measure, rng, size)


@dataclass
class IIDNoise(NoiseModel):
    """Independent centred Gaussian values of variance ``sigma^2`` at each grid point."""

    sigma: float

    def declared(self, measure):
        return float(self.sigma), float(np.max(measure.weights))

    def _draw(self, measure, rng, n):
        return self.sigma * rng.standard_normal((n, measure.size))


@dataclass
class WeightedIIDNoise(IIDNoise):
    """IID values on a grid whose weights all equal ``delta``."""

    delta: float = 1.0

    def declared(self, measure):
        if not np.allclose(measure.weights, self.delta, rtol=1e-9, atol=0):
            raise NoiseModelError("grid weights differ from the declared spacing")
        return float(self.sigma), float(self.delta)


class CorrelatedNoise(NoiseModel):
    """Gaussian values with covariance ``cov``: variance ``sigma1^2`` on the
    diagonal, off-diagonal entries at most ``sigma1^2 / T`` in magnitude."""

    def __init__(self, sigma1: float, cov: np.ndarray, clip: float = 1e-12):
        cov = np.asarray(cov, dtype=float)
        T = cov.shape[0]
        if cov.shape != (T, T) or not np.allclose(cov, cov.T, atol=1e-14 * sigma1**2):
            raise NoiseModelError("covariance must be a symmetric square matrix")
        if not np.allclose(np.diag(cov), sigma1**2, rtol=1e-12):
            raise NoiseModelError("diagonal must equal sigma1^2")
        off = cov - np.diag(np.diag(cov))
        if np.max(np.abs(off)) > sigma1**2 / T * (1 + 1e-9):
            raise NoiseModelError("off-diagonal covariance exceeds sigma1^2 / T")
        lam, V = np.linalg.eigh(cov)
        if lam.min() < -clip * lam.max():
            raise NoiseModelError(f"covariance is not positive semidefinite (eigenvalue {lam.min():.3e})")
        self.sigma1 = float(sigma1)
        self.cov = cov
        self.root = (V * np.sqrt(np.clip(lam, 0, None))) @ V.T

    @classmethod
    def equicorrelated(cls, T: int, sigma1: float, c: float = 1.0):
        """``sigma1^2 ((1 - c/T) I + (c/T) 1 1^T)`` with ``0 <= c <= 1``."""
        cov = sigma1**2 * (np.full((T, T), c / T) + (1 - c / T) * np.eye(T))
        return cls(sigma1, cov)

    def declared(self, measure):
        if self.cov.shape[0] != measure.size:
            raise NoiseModelError("covariance size differs from the grid")
        return float(np.sqrt(2) * self.sigma1), float(np.max(measure.weights))

    def _draw(self, measure, rng, n):
        if self.cov.shape[0] != measure.size:
            raise NoiseModelError("covariance size differs from the grid")
        return rng.standard_normal((n, measure.size)) @ self.root


class SeriesNoise(NoiseModel):
    """``w = sigma * sum_k sqrt(xi_k) G_k psi_k`` for an orthonormal family ``psi_k``.

    ``basis(k, t)`` gives the k-th function; it is re-orthonormalized in the
    grid inner product so that ``Var <f, w> <= sigma^2 max(xi) ||f||^2`` holds
    exactly on the grid.
    """

    def __init__(self, xi, basis, sigma: float = 1.0):
        self.xi = np.asarray(xi, dtype=float)
        if np.any(self.xi < 0):
            raise NoiseModelError("series variances must be nonnegative")
        self.basis = basis
        self.sigma = float(sigma)
        self._cache = {}

    @classmethod
    def brownian(cls, C: float, n_terms: int):
        """Karhunen-Loeve series of ``C`` times Brownian motion on ``[0, 1]``."""
        k = np.arange(n_terms)
        xi = 4 * C**2 / ((2 * k + 1) ** 2 * np.pi**2)
        return cls(xi, lambda k, t: np.sqrt(2) * np.sin((2 * k + 1) * np.pi * t / 2))

    @classmethod
    def truncated_white(cls, n_terms: int):
        return cls(np.ones(n_terms), lambda k, t: np.sqrt(2) * np.sin((k + 1) * np.pi * t))

    def functions(self, measure: GridMeasure) -> np.ndarray:
        if measure.token in self._cache:
            return self._cache[measure.token]
        n = self.xi.size
        if n > measure.size:
            raise NoiseModelError("more series terms than grid points")
        Psi = np.stack([self.basis(k, measure.points) for k in range(n)], axis=1)
        sw = np.sqrt(measure.weights)[:, None]
        Q, R = np.linalg.qr(Psi * sw)
        Q = Q * np.sign(np.diag(R))
        out = (Q / sw).T
        self._cache[measure.token] = out
        return out

    def declared(self, measure):
        return self.sigma, float(np.max(self.xi))

    def _draw(self, measure, rng, n):
        Z = rng.standard_normal((n, self.xi.size)) * np.sqrt(self.xi)
        return self.sigma * Z @ self.functions(measure)


def make_noise(kind: str, measure: GridMeasure | None = None, **kw) -> NoiseModel:
    """Build a noise model from a name and keyword parameters (used by the config loader)."""
    if kind == "iid":
        return IIDNoise(kw.get("sigma", 1.0))
    if kind == "weighted_iid":
        return WeightedIIDNoise(kw.get("sigma", 1.0), kw["delta"])
    if kind == "correlated":
        if measure is None:
            raise NoiseModelError("correlated noise needs the grid size")
        return CorrelatedNoise.equicorrelated(measure.size, kw.get("sigma", 1.0), kw.get("c", 1.0))
    if kind == "brownian":
        return SeriesNoise.brownian(kw.get("C", 1.0), kw.get("n_terms", 64))
    if kind == "truncated_white":
        return SeriesNoise.truncated_white(kw.get("n_terms", 64))
    raise NoiseModelError(f"unknown noise kind {kind!r}")


@dataclass
class VarianceCheck:
    empirical: float
    bound: float
    allowance: float
    passed: bool

    @property
    def ratio(self):
        return self.empirical / self.bound


def check_variance_bound(model: NoiseModel, measure: GridMeasure, test_functions, reps: int = 1000,
                         rng=None, level: float = 0.99) -> list[VarianceCheck]:
    """Compare the sample variance of ``<f, w>`` with ``sigma^2 Delta ||f||^2``.

    The bound passes when the sample variance stays under the one-sided
    ``level`` chi-square allowance for ``reps - 1`` degrees of freedom.
    """
    sigma, delta = model.declared(measure)
    W = model.sample(measure, rng, size=reps)
    allow = stats.chi2.ppf(level, reps - 1) / (reps - 1)
    out = []
    for f in test_functions:
        f = np.asarray(getattr(f, "values", f), dtype=float)
        x = W @ (measure.weights * f)
        bound = sigma**2 * delta * float(np.sum(measure.weights * f * f))
        emp = float(np.var(x, ddof=1))
        out.append(VarianceCheck(emp, bound, allow, emp <= bound * allow))
    return out


def tail_bound(C1: float, C2: float, sigma: float, delta: float, length: float, u):
    """``(2 C2 + 1) max(sigma |Theta| sqrt(Delta) / u, 1) exp(-u^2 / (4 sigma^2 Delta C1^2))``."""
    u = np.asarray(u, dtype=float)
    pre = np.maximum(sigma * length * np.sqrt(delta) / u, 1.0)
    return (2 * C2 + 1) * pre * np.exp(-u * u / (4 * sigma**2 * delta * C1**2))


def process_constants(i: int, L: LimitConstants) -> tuple[float, float]:
    """``(C1, C2)`` for the supremum of ``<w, phi^[i]>``, i = 0, 1, 2."""
    if i == 0:
        return 1.0, 1.0
    if i == 1:
        return 1.0, float(np.sqrt(2 * L.L22))
    if i == 2:
        return float(np.sqrt(2 * L.L22)), float(np.sqrt(2 * L.L3))
    raise ValueError("process index must be 0, 1 or 2")


def noise_suprema(ctx: KernelContext, W: np.ndarray, i: int, step: float = 0.02) -> np.ndarray:
    """``sup_theta |<w, phi^[i](theta)>|`` for each row of ``W``.

    Uses a grid uniform in Riemannian distance, then evaluates once more at the
    vertex of the parabola through the best grid point and its neighbours.
    """
    th = ctx.uniform_grid(step)
    w = ctx.measure.weights
    F = ctx.features(th)[:, i] * w
    X = np.abs(W @ F.T)  # reps x grid
    k = np.argmax(X, axis=1)
    best = X[np.arange(X.shape[0]), k]
    kk = np.clip(k, 1, th.size - 2)
    y0, y1, y2 = (X[np.arange(X.shape[0]), kk + o] for o in (-1, 0, 1))
    den = y0 - 2 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        off = np.where(den < 0, 0.5 * (y0 - y2) / den, 0.0)
    off = np.clip(np.nan_to_num(off), -1, 1)
    Gv = ctx.G(th[kk]) + off * (ctx.G(th[kk + 1]) - ctx.G(th[kk]))
    tv = ctx.G_inverse(Gv)
    Fv = ctx.features(tv)[:, i] * w
    vals = np.abs(np.sum(W * Fv, axis=1))
    return np.maximum(best, vals)


def empirical_sup_exceedance(ctx: KernelContext, model: NoiseModel, i: int, u_grid, reps: int = 1000,
                             rng=None, step: float = 0.02):
    """Monte Carlo ``P(sup |<w, phi^[i]>| >= u)`` with standard errors."""
    W = model.sample(ctx.measure, rng, size=reps)
    M = noise_suprema(ctx, W, i, step)
    u = np.asarray(u_grid, dtype=float)
    p = np.mean(M[:, None] >= u[None, :], axis=0)
    se = np.sqrt(p * (1 - p) / reps)
    return p, se, M
