"""Normalized kernel, its covariant derivatives and the induced Riemannian metric.

Everything is assembled from raw inner products ``<d^m phi(a), d^n phi(b)>``
for m, n <= 3. A small matrix ``W(theta)`` maps raw derivatives to the
covariant features ``phi^[i](theta)``, so the same code serves a finite grid
(inner products are weighted sums) and the continuous limit (closed forms).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

from .dictionary import DictionarySpec, gaussian_profile, hermite_poly
from .measure import GridMeasure, HilbertVector

ORDERS = 4


class DegenerateMetric(ArithmeticError):
    """The metric tensor vanishes (or nearly) somewhere it is needed."""


class QuadratureError(ArithmeticError):
    pass


# -- raw Gram providers ----------------------------------------------------

def _raw_limit_gaussian(spec: DictionarySpec, pa, pb):
    s0 = spec.scale
    c = np.sqrt(2.0) * s0
    x = (pa - pb) / c
    out = np.empty(x.shape + (ORDERS, ORDERS))
    k = np.exp(-0.5 * x * x)
    for m in range(ORDERS):
        for n in range(ORDERS):
            out[..., m, n] = np.sqrt(np.pi) * s0 * (-1) ** n * c ** (-(m + n)) * hermite_poly(m + n, x) * k
    return out


def _raw_limit_exp(spec: DictionarySpec, pa, pb):
    # integral over (0, inf) of exp(-(p+q) t) is 1/(p+q)
    sm = pa + pb
    out = np.empty(sm.shape + (ORDERS, ORDERS))
    fact = [1, 1, 2, 6, 24, 120, 720]
    for m in range(ORDERS):
        for n in range(ORDERS):
            out[..., m, n] = (-1) ** (m + n) * fact[m + n] / sm ** (m + n + 1)
    return out


_LIMITS = {"gaussian_translate": _raw_limit_gaussian, "exp_scale": _raw_limit_exp}


def _covariant_map(A: np.ndarray):
    """From same-point raw Grams ``A[n, 4, 4]`` build ``W[n, 4, 4]`` and (g, g', g'')."""
    a0 = A[:, 0, 0]
    if np.any(~(a0 > 0)):
        raise DegenerateMetric("feature has zero norm")
    a1 = 2 * A[:, 0, 1]
    a2 = 2 * A[:, 1, 1] + 2 * A[:, 0, 2]
    a3 = 6 * A[:, 1, 2] + 2 * A[:, 0, 3]
    # derivatives of c = a0^(-1/2)
    c0 = a0**-0.5
    c1 = -0.5 * a0**-1.5 * a1
    c2 = 0.75 * a0**-2.5 * a1**2 - 0.5 * a0**-1.5 * a2
    c3 = -1.875 * a0**-3.5 * a1**3 + 2.25 * a0**-2.5 * a1 * a2 - 0.5 * a0**-1.5 * a3
    n = a0.size
    C = np.zeros((n, ORDERS, ORDERS))
    C[:, 0, 0] = c0
    C[:, 1, :2] = np.stack([c1, c0], -1)
    C[:, 2, :3] = np.stack([c2, 2 * c1, c0], -1)
    C[:, 3, :] = np.stack([c3, 3 * c2, 3 * c1, c0], -1)
    N = C @ A @ C.transpose(0, 2, 1)
    g = N[:, 1, 1]
    g1 = 2 * N[:, 2, 1]
    g2 = 2 * N[:, 2, 2] + 2 * N[:, 3, 1]
    if np.any(~(g > 0)):
        raise DegenerateMetric("metric tensor is not positive")
    E = np.zeros_like(C)
    rg = g**-0.5
    E[:, 0, 0] = 1.0
    E[:, 1, 1] = rg
    E[:, 2, 1] = -g1 / (2 * g**2)
    E[:, 2, 2] = 1 / g
    E[:, 3, 1] = rg * (-g2 / (2 * g**2) + g1**2 / g**3)
    E[:, 3, 2] = rg * (-1.5 * g1 / g**2)
    E[:, 3, 3] = rg / g
    return E @ C, g, g1, g2


# -- primitive of sqrt(g) ----------------------------------------------------

def _legendre_matrix(s, n):
    """P_0..P_{n-1} evaluated at s, shape (len(s), n)."""
    P = np.empty((s.size, n))
    P[:, 0] = 1.0
    if n > 1:
        P[:, 1] = s
    for k in range(1, n - 1):
        P[:, k + 1] = ((2 * k + 1) * s * P[:, k] - k * P[:, k - 1]) / (k + 1)
    return P


class PiecewisePrimitive:
    """Adaptive piecewise Gauss-Legendre representation of ``G = int sqrt(g)``.

    On each panel ``sqrt(g)`` is replaced by its degree n-1 Legendre
    interpolant at the Gauss nodes; panels are split until the trailing
    coefficients fall below ``tol``. The primitive is then exact for that
    interpolant, which gives ``G`` and its inverse cheaply at any point.
    """

    def __init__(self, f, lo, hi, n=16, tol=1e-12, init_panels=8, max_panels=20000):
        x, wq = legendre.leggauss(n)
        Pn = _legendre_matrix(x, n)
        proj = (Pn * wq[:, None]).T * ((2 * np.arange(n) + 1) / 2)[:, None]  # coefs = proj @ values
        pending = [(a, b) for a, b in zip(*(lambda e: (e[:-1], e[1:]))(np.linspace(lo, hi, init_panels + 1)))]
        done = []
        while pending:
            if len(done) + len(pending) > max_panels:
                raise QuadratureError(f"no convergence on [{lo}, {hi}] with {max_panels} panels")
            L = np.array([p[0] for p in pending])
            R = np.array([p[1] for p in pending])
            nodes = 0.5 * (L + R)[:, None] + 0.5 * (R - L)[:, None] * x[None, :]
            vals = np.asarray(f(nodes.ravel())).reshape(nodes.shape)
            coefs = vals @ proj.T
            scale = np.maximum(np.abs(coefs).max(axis=1), 1e-300)
            tail = np.abs(coefs[:, -1]) + np.abs(coefs[:, -2])
            nxt = []
            for a, b, c, ok in zip(L, R, coefs, tail <= tol * scale):
                if ok or (b - a) < 1e-12 * max(1.0, abs(a)):
                    done.append((a, b, c))
                else:
                    m = 0.5 * (a + b)
                    nxt += [(a, m), (m, b)]
            pending = nxt
        done.sort(key=lambda p: p[0])
        self.n = n
        self.left = np.array([p[0] for p in done])
        self.right = np.array([p[1] for p in done])
        self.half = 0.5 * (self.right - self.left)
        self.coef = np.array([p[2] for p in done])
        integ = np.array([legendre.legint(c, lbnd=-1) for c in self.coef])  # n+1 coefficients
        self.icoef = integ * self.half[:, None]
        totals = self.icoef @ np.ones(n + 1)  # value at s = 1, since P_k(1) = 1
        self.cum = np.concatenate([[0.0], np.cumsum(totals)])
        self.lo, self.hi = float(lo), float(hi)

    def _locate(self, th):
        idx = np.clip(np.searchsorted(self.left, th, side="right") - 1, 0, self.left.size - 1)
        s = (th - self.left[idx]) / self.half[idx] - 1.0
        return idx, s

    def __call__(self, th):
        th = np.asarray(th, dtype=float)
        flat = th.ravel()
        idx, s = self._locate(flat)
        P = _legendre_matrix(s, self.n + 1)
        return (self.cum[idx] + np.sum(P * self.icoef[idx], axis=1)).reshape(th.shape)

    def density(self, th):
        th = np.asarray(th, dtype=float)
        flat = th.ravel()
        idx, s = self._locate(flat)
        P = _legendre_matrix(s, self.n)
        return np.sum(P * self.coef[idx], axis=1).reshape(th.shape)

    def inverse(self, G):
        G = np.asarray(G, dtype=float)
        flat = G.ravel()
        idx = np.clip(np.searchsorted(self.cum, flat, side="right") - 1, 0, self.left.size - 1)
        frac = (flat - self.cum[idx]) / np.maximum(self.cum[idx + 1] - self.cum[idx], 1e-300)
        th = self.left[idx] + 2 * self.half[idx] * np.clip(frac, 0, 1)
        for _ in range(60):
            step = (self(th) - flat) / self.density(th)
            th = np.clip(th - step, self.lo, self.hi)
            if np.all(np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(th))):
                break
        return th.reshape(G.shape)


# -- context -------------------------------------------------------------------

class KernelContext:
    """Kernel geometry for one dictionary on one measure (or in the continuous limit).

    ``window`` is the parameter set on which the metric primitive, grids and
    suprema are taken. ``measure=None`` selects the closed-form limit, which is
    available for ``gaussian_translate`` (Lebesgue on the line) and
    ``exp_scale`` (Lebesgue on the half line).
    """

    def __init__(self, spec: DictionarySpec, measure: GridMeasure | None = None,
                 window: tuple[float, float] | None = None, degeneracy_ratio: float = 1e-10):
        self.spec = spec
        self.measure = measure
        if measure is None and spec.family not in _LIMITS:
            raise ValueError(f"no closed-form limit for {spec.family}")
        if window is None:
            if measure is None:
                raise ValueError("a window is required in the limit")
            window = (float(measure.points.min()), float(measure.points.max()))
        lo, hi = map(float, window)
        if not lo < hi:
            raise ValueError("empty window")
        spec.check_domain([lo, hi])
        self.window = (lo, hi)
        self._cache: dict = {}
        self._primitive = None
        probe = np.linspace(lo, hi, 65)
        gp = self.metric(probe)
        self.g_floor = degeneracy_ratio * float(np.median(gp))
        if np.any(gp < self.g_floor):
            raise DegenerateMetric("metric tensor collapses inside the window")

    @property
    def is_limit(self) -> bool:
        return self.measure is None

    # raw material
    def _params(self, th):
        a, b = self.spec.warp
        return a * th + b

    def raw_derivatives(self, th) -> np.ndarray:
        return self.spec.derivatives(th, self.measure.points)

    def raw_gram(self, ta, tb) -> np.ndarray:
        ta = self.spec.check_domain(ta)
        tb = self.spec.check_domain(tb)
        if self.is_limit:
            a = self.spec.warp[0]
            R = _LIMITS[self.spec.family](self.spec, self._params(ta)[:, None], self._params(tb)[None, :])
            m = np.arange(ORDERS)
            return R * a ** (m[:, None] + m[None, :])
        Da = self.raw_derivatives(ta) * self.measure.weights
        Db = self.raw_derivatives(tb)
        return np.einsum("aiT,bjT->abij", Da, Db, optimize=True)

    def _self_gram(self, th):
        th = self.spec.check_domain(th)
        if self.is_limit:
            a = self.spec.warp[0]
            p = self._params(th)
            m = np.arange(ORDERS)
            return _LIMITS[self.spec.family](self.spec, p, p) * a ** (m[:, None] + m[None, :])
        D = self.raw_derivatives(th)
        return np.einsum("niT,njT->nij", D * self.measure.weights, D)

    def covariant_map(self, th):
        th = np.atleast_1d(np.asarray(th, dtype=float))
        out = []
        for i in range(0, th.size, 512):
            out.append(_covariant_map(self._self_gram(th[i:i + 512])))
        return tuple(np.concatenate([o[k] for o in out]) for k in range(4))

    # features
    def features(self, th) -> np.ndarray:
        """Covariant normalized features ``F[n, i, :] = phi^[i](theta_n)`` on the grid."""
        if self.is_limit:
            raise ValueError("features are only materialized on a grid")
        th = np.atleast_1d(np.asarray(th, dtype=float))
        key = th.tobytes()
        if key in self._cache:
            return self._cache[key]
        out = np.empty((th.size, ORDERS, self.measure.size))
        for i in range(0, th.size, 256):
            sl = slice(i, i + 256)
            D = self.raw_derivatives(th[sl])
            W, g, _, _ = _covariant_map(np.einsum("niT,njT->nij", D * self.measure.weights, D))
            self._guard(g)
            out[sl] = W @ D
        if len(self._cache) > 16:
            self._cache.pop(next(iter(self._cache)))
        self._cache[key] = out
        return out

    def feature(self, theta: float, i: int = 0) -> HilbertVector:
        return HilbertVector(self.features([theta])[0, i], self.measure)

    def _guard(self, g):
        floor = getattr(self, "g_floor", 0.0)
        if np.any(g < floor):
            raise DegenerateMetric(f"metric {g.min():.3e} below floor {floor:.3e}")

    # kernel
    def _gauss_offset(self, ta, tb):
        self.spec.check_domain(ta)
        self.spec.check_domain(tb)
        a = self.spec.warp[0]
        return abs(a) * (ta[:, None] - tb[None, :]) / (np.sqrt(2.0) * self.spec.scale)

    def kernel_all(self, ta, tb, generic: bool = False) -> np.ndarray:
        """``K[a, b, i, j] = K^[i,j](ta[a], tb[b])`` for i, j <= 3.

        In the Gaussian limit the closed form in Hermite polynomials is used
        unless ``generic`` is set.
        """
        ta = np.atleast_1d(np.asarray(ta, dtype=float))
        tb = np.atleast_1d(np.asarray(tb, dtype=float))
        if not self.is_limit:
            Fa = self.features(ta) * self.measure.weights
            Fb = self.features(tb)
            return np.einsum("aiT,bjT->abij", Fa, Fb, optimize=True)
        if self.spec.family == "gaussian_translate" and not generic:
            x = self._gauss_offset(ta, tb)
            out = np.empty(x.shape + (ORDERS, ORDERS))
            k = np.exp(-0.5 * x * x)
            for n in range(2 * ORDERS - 1):
                pk = hermite_poly(n, x) * k
                for i in range(max(0, n - ORDERS + 1), min(n, ORDERS - 1) + 1):
                    out[..., i, n - i] = (-1) ** (n - i) * pk
            return out
        Wa, ga, _, _ = self.covariant_map(ta)
        Wb, gb, _, _ = self.covariant_map(tb)
        self._guard(ga)
        self._guard(gb)
        R = self.raw_gram(ta, tb)
        return np.einsum("aim,abmn,bjn->abij", Wa, R, Wb, optimize=True)

    def kernel(self, ta, tb, i: int = 0, j: int = 0) -> np.ndarray:
        """Matrix of ``K^[i,j](ta[a], tb[b])``."""
        ta = np.atleast_1d(np.asarray(ta, dtype=float))
        tb = np.atleast_1d(np.asarray(tb, dtype=float))
        if not self.is_limit:
            Fa = self.features(ta)[:, i] * self.measure.weights
            Fb = self.features(tb)[:, j]
            return Fa @ Fb.T
        if self.spec.family == "gaussian_translate":
            x = self._gauss_offset(ta, tb)
            return (-1) ** j * gaussian_profile(x, i + j)
        return self.kernel_all(ta, tb)[:, :, i, j]

    def kernel_deriv(self, theta, theta2, i: int, j: int) -> float:
        return float(self.kernel([theta], [theta2], i, j)[0, 0])

    def h(self, th) -> np.ndarray:
        """``K^[3,3](theta, theta)``."""
        th = np.atleast_1d(np.asarray(th, dtype=float))
        if not self.is_limit:
            F = self.features(th)[:, 3]
            return np.sum(F * F * self.measure.weights, axis=1)
        W, g, _, _ = self.covariant_map(th)
        A = self._self_gram(th)
        return np.einsum("nm,nmk,nk->n", W[:, 3], A, W[:, 3])

    # metric
    def metric(self, th) -> np.ndarray:
        return self.covariant_map(th)[1]

    def metric_prime(self, th) -> np.ndarray:
        return self.covariant_map(th)[2]

    def _closed_primitive(self):
        a, b = self.spec.warp
        if self.is_limit and self.spec.family == "gaussian_translate":
            c = abs(a) / (np.sqrt(2.0) * self.spec.scale)
            return (lambda t: c * np.asarray(t, float)), (lambda G: np.asarray(G, float) / c)
        if self.is_limit and self.spec.family == "exp_scale":
            sg = np.sign(a)
            return (lambda t: 0.5 * sg * np.log(a * np.asarray(t, float) + b)), \
                   (lambda G: (np.exp(2 * sg * np.asarray(G, float)) - b) / a)
        return None

    def primitive(self, closed_form: bool = True):
        """Pair of callables ``(G, G^{-1})`` on the window."""
        if closed_form:
            cf = self._closed_primitive()
            if cf is not None:
                return cf
        if self._primitive is None:
            lo, hi = self.window
            self._primitive = PiecewisePrimitive(lambda t: np.sqrt(self.metric(t)), lo, hi)
        p = self._primitive
        return p, p.inverse

    def G(self, th):
        return self.primitive()[0](th)

    def G_inverse(self, u):
        return self.primitive()[1](u)

    def distance(self, theta, theta2):
        self._in_window(theta)
        self._in_window(theta2)
        return np.abs(self.G(theta) - self.G(theta2))

    def _in_window(self, th):
        lo, hi = self.window
        th = np.asarray(th, dtype=float)
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        if np.any(th < lo - tol) or np.any(th > hi + tol):
            raise ValueError("parameter outside the window")

    def length(self) -> float:
        lo, hi = self.window
        return float(self.G(hi) - self.G(lo))

    def uniform_grid(self, step: float, lo: float | None = None, hi: float | None = None) -> np.ndarray:
        """Points equally spaced in Riemannian distance, at most ``step`` apart."""
        lo = self.window[0] if lo is None else lo
        hi = self.window[1] if hi is None else hi
        Ga, Gb = self.G(lo), self.G(hi)
        n = max(int(np.ceil(abs(Gb - Ga) / step)), 1) + 1
        th = self.G_inverse(np.linspace(Ga, Gb, n))
        th[0], th[-1] = lo, hi
        return th

    def walk(self, theta, dist):
        """Point at signed Riemannian distance ``dist`` from ``theta`` (clipped to the window)."""
        G0 = self.G(theta)
        Glo, Ghi = self.G(self.window[0]), self.G(self.window[1])
        lo_, hi_ = min(Glo, Ghi), max(Glo, Ghi)
        return self.G_inverse(np.clip(G0 + dist, lo_, hi_))


# -- scenarios -------------------------------------------------------------------

def window_half_width(T: int, sigma0: float = 1.0, growth: float = 0.1) -> float:
    """Default half width ``sigma0 * sqrt(2 log T) * T**growth`` of the sampling interval."""
    return sigma0 * np.sqrt(2 * np.log(T)) * T**growth


def gaussian_scenario(T: int, sigma0: float = 1.0, shrink: float = 0.1,
                      half_width: float | None = None, growth: float = 0.1) -> KernelContext:
    """Gaussian translates sampled on ``T`` equispaced points of ``[-b, b]``.

    Grid points ``-b + j*Delta`` (j = 1..T), weights ``Delta = 2b/T``; the
    parameter window is the interval shrunk by the factor ``1 - shrink``.
    """
    b = window_half_width(T, sigma0, growth) if half_width is None else half_width
    m = GridMeasure.uniform(-b, b, T, label=f"gaussian T={T} b={b:.6g}")
    spec = DictionarySpec("gaussian_translate", sigma0)
    return KernelContext(spec, m, ((1 - shrink) * -b, (1 - shrink) * b))


def gaussian_limit(sigma0: float = 1.0, window=(-10.0, 10.0)) -> KernelContext:
    return KernelContext(DictionarySpec("gaussian_translate", sigma0), None, window)


# -- closed forms in the Gaussian limit --------------------------------------

def gaussian_limit_kernel(x, i: int, j: int):
    """``(-1)^j k^(i+j)(x)`` with ``x`` the signed Riemannian offset."""
    return (-1) ** j * gaussian_profile(x, i + j)


def epsilon_inf(r):
    r = np.asarray(r, dtype=float)
    return 1 - np.exp(-0.5 * r * r)


def nu_inf(r):
    r = np.asarray(r, dtype=float)
    # (d^2-1) e^{-d^2/2} increases up to d = sqrt(3)
    rr = np.minimum(r, np.sqrt(3.0))
    return (1 - rr * rr) * np.exp(-0.5 * rr * rr)


@dataclass(frozen=True)
class LimitConstants:
    L00: float
    L10: float
    L11: float
    L20: float
    L21: float
    L22: float
    L3: float
    m_g: float


def gaussian_limit_constants(sigma0: float = 1.0) -> LimitConstants:
    return LimitConstants(
        L00=1.0,
        L10=float(np.exp(-0.5)),
        L11=1.0,
        L20=1.0,
        L21=float(np.sqrt(18 - 6 * np.sqrt(6)) * np.exp(np.sqrt(1.5) - 1.5)),
        L22=3.0,
        L3=15.0,
        m_g=1.0 / (2 * sigma0**2),
    )


# -- suprema over the window ---------------------------------------------------

def _local_pairs(ctx, a0, b0, step, r):
    """Candidate pairs near ``(a0, b0)``: a fine local box plus partners at distance exactly ``r``."""
    lo, hi = ctx.window
    off = np.linspace(-1, 1, 41) * step
    da = np.clip(ctx.walk(a0, 0.0) + off / np.sqrt(ctx.metric([a0])[0]), lo, hi)
    db = np.clip(b0 + off / np.sqrt(ctx.metric([b0])[0]), lo, hi)
    sgn = 1.0 if b0 >= a0 else -1.0
    edge = ctx.walk(da, sgn * r)
    keep = np.abs(np.abs(ctx.G(edge) - ctx.G(da)) - r) < 1e-9
    return da, db, da[keep], edge[keep]


def epsilon(ctx: KernelContext, r: float, step: float | None = None, refine: bool = True) -> float:
    """``1 - sup |K(a, b)|`` over pairs at Riemannian distance at least ``r``."""
    step = r / 50 if step is None else step
    th = ctx.uniform_grid(step)
    G = ctx.G(th)
    if abs(G[-1] - G[0]) < r:
        return 1.0
    best, arg = -np.inf, None
    for s in range(0, th.size, 512):
        K = np.abs(ctx.kernel(th[s:s + 512], th))
        far = np.abs(G[s:s + 512, None] - G[None, :]) >= r * (1 - 1e-12)
        K[~far] = -np.inf
        k = np.unravel_index(np.argmax(K), K.shape)
        if K[k] > best:
            best, arg = K[k], (th[s + k[0]], th[k[1]])
    if refine:
        da, db, ea, eb = _local_pairs(ctx, *arg, step, r)
        K = np.abs(ctx.kernel(da, db))
        far = np.abs(ctx.G(da)[:, None] - ctx.G(db)[None, :]) >= r
        if np.any(far):
            best = max(best, K[far].max())
        if ea.size:
            best = max(best, np.abs(np.einsum("nn->n", ctx.kernel(ea, eb))).max())
    return float(1 - best)


def nu(ctx: KernelContext, r: float, step: float | None = None, refine: bool = True) -> float:
    """``-sup K^[0,2](a, b)`` over pairs at Riemannian distance at most ``r``."""
    step = r / 50 if step is None else step
    th = ctx.uniform_grid(step)
    G = ctx.G(th)
    width = int(np.ceil(r / (abs(G[1] - G[0]) if th.size > 1 else 1))) + 2
    best, arg = -np.inf, None
    for s in range(0, th.size, 512):
        rows = slice(s, min(s + 512, th.size))
        c0, c1 = max(0, s - width), min(th.size, rows.stop + width)
        K = ctx.kernel(th[rows], th[c0:c1], 0, 2)
        near = np.abs(G[rows, None] - G[None, c0:c1]) <= r * (1 + 1e-12)
        K[~near] = -np.inf
        k = np.unravel_index(np.argmax(K), K.shape)
        if K[k] > best:
            best, arg = K[k], (th[s + k[0]], th[c0 + k[1]])
    if refine:
        da, db, ea, eb = _local_pairs(ctx, *arg, step, r)
        K = ctx.kernel(da, db, 0, 2)
        near = np.abs(ctx.G(da)[:, None] - ctx.G(db)[None, :]) <= r
        if np.any(near):
            best = max(best, K[near].max())
        if ea.size:
            best = max(best, np.einsum("nn->n", ctx.kernel(ea, eb, 0, 2)).max())
    return float(-best)


@dataclass
class LimitComparison:
    V: float
    rho: float
    kernel_gaps: dict
    h_gap: float


def limit_compare(ctx: KernelContext, ref: KernelContext, probes) -> LimitComparison:
    """Uniform gaps between a grid kernel and a reference (usually the limit) on ``probes``."""
    probes = np.asarray(probes, dtype=float)
    Ka = ctx.kernel_all(probes, probes)
    Kb = ref.kernel_all(probes, probes)
    gaps = {(i, j): float(np.max(np.abs(Ka[..., i, j] - Kb[..., i, j])))
            for i in range(3) for j in range(3)}
    h_gap = float(np.max(np.abs(ctx.h(probes) - ref.h(probes))))
    ga, gb = ctx.metric(probes), ref.metric(probes)
    rho = float(max(np.max(np.sqrt(ga / gb)), np.max(np.sqrt(gb / ga))))
    return LimitComparison(max(max(gaps.values()), h_gap), rho, gaps, h_gap)


def approximation_gamma(T: int, half_width: float, sigma0: float = 1.0, shrink: float = 0.1) -> float:
    """``2 Delta / sigma0 + sqrt(pi) exp(-(shrink b)^2 / (2 sigma0^2))`` for the equispaced grid."""
    delta = 2 * half_width / T
    return 2 * delta / sigma0 + np.sqrt(np.pi) * np.exp(-(shrink * half_width) ** 2 / (2 * sigma0**2))


# -- Taylor expansion along geodesics ------------------------------------------

def taylor_check(ctx: KernelContext, theta0: float, theta: float, coef=None, support=None):
    """First-order geodesic Taylor residual and its quadratic bound.

    With ``coef``/``support`` omitted the function is the feature map itself
    (norm taken in the Hilbert space); otherwise it is the scalar certificate
    ``eta`` defined by ``coef = (alpha, xi)`` on ``support``.
    Returns ``(residual, bound)`` where ``bound = d^2/2 * sup |f^[2]|`` on the segment.
    """
    d = float(ctx.distance(theta0, theta))
    sgn = 1.0 if theta >= theta0 else -1.0
    seg = np.linspace(min(theta0, theta), max(theta0, theta), 41)
    if coef is None:
        K = ctx.kernel_all([theta, theta0], [theta, theta0])
        a, b = 0, 1
        # ||phi(t) - phi(t0) - s d phi1(t0)||^2 from kernel values
        res2 = (K[a, a, 0, 0] + K[b, b, 0, 0] + d * d * K[b, b, 1, 1]
                - 2 * K[a, b, 0, 0] - 2 * sgn * d * K[a, b, 0, 1] + 2 * sgn * d * K[b, b, 0, 1])
        residual = float(np.sqrt(max(res2, 0.0)))
        sup2 = float(np.sqrt(np.max(np.einsum("nnij->nij", ctx.kernel_all(seg, seg))[:, 2, 2])))
    else:
        from .certificates import evaluate_certificate

        alpha, xi = coef
        f0 = evaluate_certificate(ctx, support, alpha, xi, [theta0], order=0)[0]
        f1 = evaluate_certificate(ctx, support, alpha, xi, [theta0], order=1)[0]
        ft = evaluate_certificate(ctx, support, alpha, xi, [theta], order=0)[0]
        residual = float(abs(ft - f0 - sgn * d * f1))
        sup2 = float(np.max(np.abs(evaluate_certificate(ctx, support, alpha, xi, seg, order=2))))
    return residual, 0.5 * d * d * sup2


def export_kernel_table(ctx: KernelContext, thetas, path, max_order: int = 2) -> None:
    """Write ``theta, theta2, i, j, value`` rows for all pairs and orders up to ``max_order``."""
    import csv

    th = np.asarray(thetas, dtype=float)
    K = ctx.kernel_all(th, th)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta", "theta2", "i", "j", "value"])
        for a in range(th.size):
            for b in range(th.size):
                for i in range(max_order + 1):
                    for j in range(max_order + 1):
                        w.writerow([repr(float(th[a])), repr(float(th[b])), i, j, repr(float(K[a, b, i, j]))])
