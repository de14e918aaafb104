"""Drivers shared by the command line and the acceptance checks."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .certificates import (check_coefficient_bounds, optimal_radius, solve_certificate, build_gamma,
                           theoretical_constants, verify_assumptions)
from .estimator import Observation, SolverConfig, error_decomposition, fit, tuning_kappa
from .kernel import (KernelContext, approximation_gamma, gaussian_limit, gaussian_limit_constants,
                     gaussian_scenario, limit_compare, window_half_width)
from .noise import IIDNoise, empirical_sup_exceedance, make_noise, process_constants, tail_bound
from .separation import coherence, delta_hat, empirical_min_separation


def centred_support(ctx: KernelContext, s: int, gap: float) -> np.ndarray:
    """``s`` points spaced ``gap`` apart in Riemannian distance around the window centre."""
    c = 0.5 * (ctx.G(ctx.window[0]) + ctx.G(ctx.window[1]))
    return ctx.G_inverse(c + gap * (np.arange(s) - (s - 1) / 2))


# -- rate study ------------------------------------------------------------------

@dataclass
class RateSettings:
    T: list = field(default_factory=lambda: [256, 512, 1024, 2048, 4096, 8192])
    reps: int = 200
    sigma: float = 0.2
    C1: float = 1.5
    gap: float = 3.0
    amplitudes: list = field(default_factory=lambda: [1.0, -0.8, 1.2])
    sigma0: float = 1.0
    shrink: float = 0.1
    growth: float = 0.1
    radius: float | None = None
    noise: dict = field(default_factory=lambda: {"kind": "iid"})


_CTX: dict = {}


def _scenario(T, st: RateSettings):
    key = (T, st.sigma0, st.shrink, st.growth)
    if key not in _CTX:
        _CTX.clear()
        _CTX[key] = gaussian_scenario(T, st.sigma0, st.shrink, growth=st.growth)
    return _CTX[key]


def rate_replicate(args):
    T, rep, seed, st = args
    ctx = _scenario(T, st)
    rng = np.random.default_rng(np.random.SeedSequence([seed, T, rep]))
    beta = np.asarray(st.amplitudes, dtype=float)
    s = beta.size
    theta = centred_support(ctx, s, st.gap)
    clean = beta @ ctx.features(theta)[:, 0]
    kw = {k: v for k, v in st.noise.items() if k != "kind"}
    kw.setdefault("sigma", st.sigma)
    model = make_noise(st.noise.get("kind", "iid"), ctx.measure, **kw)
    sigma, delta = model.declared(ctx.measure)
    y = ctx.measure.vector(clean + model.sample(ctx.measure, rng).values)
    obs = Observation(y, sigma, delta, float(T))
    t0 = time.perf_counter()
    est = fit(ctx, obs, SolverConfig(C1=st.C1), n_true=s)
    elapsed = time.perf_counter() - t0
    r = st.radius if st.radius is not None else optimal_radius(gaussian_limit_constants())
    dec = error_decomposition(ctx, est.theta, est.beta, theta, beta, r)
    n_pts = ctx.measure.size
    return {
        "T": T, "rep": rep, "kappa": est.kappa, "atoms": int(est.theta.size),
        "converged": bool(est.converged), "seconds": elapsed,
        "pred": dec.prediction,
        "pred_l2_sqrtT": dec.prediction / np.sqrt(delta * n_pts),
        "pred_ratio": dec.prediction / (np.sqrt(s) * est.kappa),
        "I0": dec.I0, "I0_abs": dec.I0_abs, "I1": dec.I1, "I2": dec.I2, "I3": dec.I3,
        "l1_gap": dec.l1_gap, "sup_ratio": est.kkt["sup_ratio"],
    }


def rate_study(st: RateSettings, seed: int = 0, jobs: int = 1):
    tasks = [(T, rep, seed, st) for T in st.T for rep in range(st.reps)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            rows = list(pool.map(rate_replicate, tasks, chunksize=max(1, st.reps // 4)))
    else:
        rows = [rate_replicate(t) for t in tasks]
    return rows, summarize_rates(rows, len(st.amplitudes))


def summarize_rates(rows, s: int) -> dict:
    Ts = sorted({r["T"] for r in rows})
    per_T = {}
    for T in Ts:
        sub = [r for r in rows if r["T"] == T]
        col = lambda k: np.array([r[k] for r in sub])  # noqa: E731
        kappa = float(np.median(col("kappa")))
        per_T[T] = {
            "kappa": kappa,
            "median_pred_l2_sqrtT": float(np.median(col("pred_l2_sqrtT"))),
            "q90_pred_ratio": float(np.quantile(col("pred_ratio"), 0.9)),
            **{f"q90_{k}_over_kappa_s": float(np.quantile(col(k), 0.9) / (kappa * s))
               for k in ("I0", "I1", "I2", "I3")},
            "converged": float(np.mean(col("converged"))),
            "mean_seconds": float(np.mean(col("seconds"))),
        }
    x = np.log(Ts)
    yv = np.log([per_T[T]["median_pred_l2_sqrtT"] for T in Ts])
    slope = float(np.polyfit(x, yv, 1)[0]) if len(Ts) > 1 else float("nan")
    q = [per_T[T]["q90_pred_ratio"] for T in Ts]
    return {"per_T": per_T, "slope": slope, "ratio_spread": float(max(q) / min(q))}


# -- certificates ------------------------------------------------------------------

def certify(ctx: KernelContext, s: int = 2, gap: float = 9.0, rho: float = 2.0, eta0: float = 0.9,
            r: float | None = None):
    """Verify both certificate kinds for all sign patterns of an equispaced ``s``-spike support."""
    L = gaussian_limit_constants(ctx.spec.scale)
    r = optimal_radius(L, rho) if r is None else r
    c = theoretical_constants(L, r, rho)
    support = centred_support(ctx, s, gap)
    report = verify_assumptions(ctx, support, c)
    u = coherence(ctx, support)
    system = build_gamma(ctx, support)
    bounds = []
    if u < 0.5:
        from .certificates import sign_patterns
        for v in sign_patterns(s):
            for kind in ("interpolating", "derivative"):
                bounds.append({"signs": v.tolist(), "kind": kind,
                               **{k: list(t) for k, t in
                                  check_coefficient_bounds(solve_certificate(system, v, kind), u).items()}})
    return report, {"coherence": u, "u_inf": eta0 * c.H2, "coefficient_bounds": bounds}


def separation(ctx_limit: KernelContext, ctx_grid: KernelContext | None, s: int = 2, rho: float = 2.0,
               eta0: float = 0.9, restarts: int = 32, seed: int = 0):
    L = gaussian_limit_constants(ctx_limit.spec.scale)
    r = optimal_radius(L, rho)
    c = theoretical_constants(L, r, rho)
    u = eta0 * c.H2
    out = {"r": r, "u_inf": u, "H2": c.H2}
    out["delta_hat"] = delta_hat(ctx_limit, u, s, restarts=restarts, rng=seed)
    if ctx_grid is not None:
        gap, eucl = empirical_min_separation(ctx_grid, s, c)
        out["empirical_gap"] = gap
        out["empirical_gap_euclidean"] = eucl
    return out


# -- limit approximation ---------------------------------------------------------------

def approximation_ladder(Ts=(256, 1024, 4096), sigma0=1.0, shrink=0.5, growth=0.1, probes=121):
    rows = []
    for T in Ts:
        ctx = gaussian_scenario(T, sigma0, shrink, growth=growth)
        lim = gaussian_limit(sigma0, ctx.window)
        cmp = limit_compare(ctx, lim, np.linspace(*ctx.window, probes))
        b = window_half_width(T, sigma0, growth)
        gamma = approximation_gamma(T, b, sigma0, shrink)
        rows.append({"T": T, "V": cmp.V, "rho_minus_1": cmp.rho - 1, "gamma": gamma, "ratio": cmp.V / gamma})
    return rows


# -- noise tails ---------------------------------------------------------------------

def noise_check(T: int = 512, reps: int = 1000, processes=(0, 1, 2), n_u: int = 10, seed: int = 0,
                sigma: float = 1.0, sigma0: float = 1.0, shrink: float = 0.1, growth: float = 0.1,
                noise: dict | None = None):
    ctx = gaussian_scenario(T, sigma0, shrink, growth=growth)
    spec = dict(noise or {"kind": "iid"})
    kind = spec.pop("kind", "iid")
    spec.setdefault("sigma", sigma)
    model = make_noise(kind, ctx.measure, **spec)
    sig, delta = model.declared(ctx.measure)
    L = gaussian_limit_constants(sigma0)
    length = ctx.length()
    out = []
    for i in processes:
        C1, C2 = process_constants(i, L)
        scale = sig * np.sqrt(delta) * C1
        u = np.linspace(0.5, 6.0, n_u) * scale
        p, se, _ = empirical_sup_exceedance(ctx, model, i, u, reps, np.random.default_rng([seed, i]))
        bound = tail_bound(C1, C2, sig, delta, length, u)
        for k in range(n_u):
            out.append({"process": i, "u": float(u[k]), "empirical": float(p[k]), "se": float(se[k]),
                        "bound": float(bound[k]), "ok": bool(p[k] <= bound[k] + 3 * se[k])})
    return out
