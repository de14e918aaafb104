"""Coherence of spike configurations and the separation it requires."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import erf

from .dictionary import hermite_poly
from .kernel import KernelContext


def _row_norm(M):
    return float(np.max(np.sum(np.abs(M), axis=1)))


def coherence(ctx: KernelContext, support) -> float:
    """Largest max-row-sum norm among the off-identity kernel blocks of the support."""
    th = np.asarray(support, dtype=float)
    K = ctx.kernel_all(th, th)
    I = np.eye(th.size)
    blocks = [I - K[..., 0, 0], I - K[..., 1, 1], I + K[..., 2, 0],
              K[..., 1, 0], K[..., 0, 1], K[..., 1, 2]]
    return max(_row_norm(B) for B in blocks)


def _config(ctx, s, gap, params, Glo, Ghi):
    f = 1 / (1 + np.exp(-params[0]))
    extra = params[1:] ** 2
    steps = gap + extra
    span = steps.sum()
    if span > Ghi - Glo:
        return None
    G0 = Glo + f * (Ghi - Glo - span)
    G = G0 + np.concatenate([[0.0], np.cumsum(steps)])
    return ctx.G_inverse(G)


@dataclass
class CoherenceSearch:
    value: float
    equispaced: float
    support: np.ndarray


def max_coherence(ctx: KernelContext, s: int, gap: float, restarts: int = 32, rng=None,
                  polish_evals: int = 150) -> CoherenceSearch:
    """Heuristic sup of the coherence over ``s``-point configurations with all gaps >= ``gap``.

    Starts from the equispaced configuration, then ``restarts`` random
    configurations, each polished with Nelder-Mead.
    """
    if s < 2:
        return CoherenceSearch(coherence(ctx, [0.5 * sum(ctx.window)]), 0.0, np.array([0.5 * sum(ctx.window)]))
    rng = np.random.default_rng(rng)
    Glo, Ghi = sorted((float(ctx.G(ctx.window[0])), float(ctx.G(ctx.window[1]))))
    if (s - 1) * gap > Ghi - Glo:
        raise ValueError("window too short for this many spikes at this gap")

    def obj(p):
        th = _config(ctx, s, gap, np.asarray(p), Glo, Ghi)
        return -np.inf if th is None else coherence(ctx, th)

    start = np.zeros(s)
    best_val = eq = obj(start)
    best_th = _config(ctx, s, gap, start, Glo, Ghi)
    starts = [start] + [np.concatenate([[rng.normal()], np.sqrt(rng.exponential(0.5, s - 1))])
                        for _ in range(restarts)]
    for p0 in starts:
        res = minimize(lambda p: -obj(p) if np.isfinite(obj(p)) else 1e9, p0, method="Nelder-Mead",
                       options={"maxfev": polish_evals, "xatol": 1e-4, "fatol": 1e-10})
        val = obj(res.x)
        if val > best_val:
            best_val, best_th = val, _config(ctx, s, gap, res.x, Glo, Ghi)
    return CoherenceSearch(float(best_val), float(eq), best_th)


def delta_hat(ctx: KernelContext, u: float, s: int, lo: float = 0.5, hi: float = 12.0,
              tol: float = 1e-2, restarts: int = 32, rng=0) -> float:
    """Smallest Riemannian gap (to ``tol``) for which the searched coherence stays below ``u``."""
    if s < 2:
        return 0.0

    def ok(gap):
        return max_coherence(ctx, s, gap, restarts, rng).value <= u

    if not ok(hi):
        raise ValueError(f"coherence still above {u} at gap {hi}")
    if ok(lo):
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


def gaussian_M() -> float:
    """``max_{i<=3} sup_t |P_i(t)| exp(-t^2/4)`` for the Gaussian limit kernel."""
    t = np.linspace(0, 12, 240001)
    return float(max(np.max(np.abs(hermite_poly(i, t)) * np.exp(-t * t / 4)) for i in range(4)))


def psi(M: float, delta, s: int):
    """``2 M int_0^{s/2+1} exp(-t^2 delta^2 / 4) dt``."""
    delta = np.asarray(delta, dtype=float)
    a = s / 2 + 1
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(delta > 0, 2 * M * np.sqrt(np.pi) / np.where(delta > 0, delta, 1) * erf(a * delta / 2), 2 * M * a)
    return val


def psi_upper_bound(M: float, u: float, s: int | None = None) -> float:
    """Gap at which ``psi`` drops to ``u``; with ``s=None`` the s-free bound ``2 sqrt(pi) M / u``."""
    if s is None:
        return 2 * np.sqrt(np.pi) * M / u
    if u >= M * (s + 2):
        return 0.0
    hi = 2 * np.sqrt(np.pi) * M / u
    return float(brentq(lambda d: psi(M, d, s) - u, 1e-12, hi * 1.01 + 1, xtol=1e-13, rtol=1e-14))


def empirical_min_separation(ctx: KernelContext, s: int, constants, lo: float | None = None,
                             hi: float = 8.0, step: float = 0.1, tol: float = 1e-3,
                             kinds=("interpolating", "derivative")):
    """Smallest equispaced Riemannian gap for which every certificate clause holds.

    A coarse scan from ``hi`` downward locates the last passing gap, then
    bisection refines the crossing. Returns ``(gap, euclidean_gap)``; the
    Euclidean gap is measured around the centre of the window.
    """
    from .certificates import verify_assumptions

    lo = 2 * constants.r * (1 + 1e-6) if lo is None else lo
    centre = 0.5 * (ctx.G(ctx.window[0]) + ctx.G(ctx.window[1]))

    def support(gap):
        return ctx.G_inverse(centre + gap * (np.arange(s) - (s - 1) / 2))

    def passes(gap):
        return verify_assumptions(ctx, support(gap), constants, kinds=kinds).passed

    if s < 2:
        return lo, float(np.nan)
    if not passes(hi):
        raise ValueError(f"certificates fail even at gap {hi}")
    ladder = np.arange(hi, lo, -step)
    good = hi
    for gap in ladder[1:]:
        if not passes(gap):
            break
        good = gap
    else:
        return lo, float(np.ptp(support(lo))) / (s - 1)
    a, b = good - step, good
    a = max(a, lo)
    while b - a > tol:
        m = 0.5 * (a + b)
        a, b = (a, m) if passes(m) else (m, b)
    th = support(b)
    return float(b), float(np.ptp(th) / (s - 1))
