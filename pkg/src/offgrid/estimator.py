"""Continuous-dictionary lasso (BLasso) fitted by a sliding Frank-Wolfe loop."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .kernel import KernelContext
from .measure import HilbertVector


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def tuning_kappa(sigma: float, delta: float, tau: float, C1: float = 1.0) -> float:
    """Regularization level ``C1 sigma sqrt(Delta log tau)``."""
    if tau <= 1:
        raise ValueError("tau must exceed 1")
    return float(C1 * sigma * np.sqrt(delta * np.log(tau)))


@dataclass
class Observation:
    y: HilbertVector
    sigma: float
    delta: float
    tau: float


@dataclass
class SolverConfig:
    kappa: float | None = None
    C1: float = 1.5
    coarse_step: float = 0.1
    max_atoms: int | None = None
    slack: float = 1e-6
    merge_tol: float = 1e-3
    prune_tol: float = 1e-10
    stationarity_tol: float = 1e-9
    max_inner: int = 200
    lasso_tol: float = 1e-13


@dataclass
class Estimate:
    theta: np.ndarray
    beta: np.ndarray
    kappa: float
    objective_trace: list
    converged: bool
    iterations: int
    kkt: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["theta"] = [float(x) for x in self.theta]
        d["beta"] = [float(x) for x in self.beta]
        d["objective_trace"] = [float(x) for x in self.objective_trace]
        return d

    def to_json(self, path=None):
        txt = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(txt)
        return txt


# -- fixed-support lasso -------------------------------------------------------

def lasso_amplitudes(ctx: KernelContext, support, y, kappa: float, beta0=None,
                     tol: float = 1e-13, max_iter: int = 100000) -> np.ndarray:
    """Minimize ``1/2 ||y - sum beta_k phi(theta_k)||^2 + kappa ||beta||_1`` over ``beta``.

    Cyclic coordinate descent on the Gram matrix (unit diagonal).
    """
    th = np.asarray(support, dtype=float)
    if th.size == 0:
        return np.zeros(0)
    yv = getattr(y, "values", y)
    c = ctx.features(th)[:, 0] @ (ctx.measure.weights * yv)
    Gm = ctx.kernel(th, th)
    return _cd(Gm, c, kappa, beta0, tol, max_iter)


def _cd(Gm, c, kappa, beta0=None, tol=1e-13, max_iter=100000):
    n = c.size
    beta = np.zeros(n) if beta0 is None else np.array(beta0, dtype=float)
    grad = c - Gm @ beta  # correlation of the current residual
    for _ in range(max_iter):
        change = 0.0
        for k in range(n):
            old = beta[k]
            new = soft_threshold(grad[k] + Gm[k, k] * old, kappa) / Gm[k, k]
            if new != old:
                grad -= Gm[:, k] * (new - old)
                beta[k] = new
                change = max(change, abs(new - old))
        if change <= tol:
            break
    return beta


def lasso_bruteforce(Gm, c, kappa):
    """Exact lasso by enumerating supports and signs (tiny problems only)."""
    import itertools

    n = c.size
    best, best_obj = np.zeros(n), 0.0
    for mask in itertools.product([0, 1], repeat=n):
        S = np.flatnonzero(mask)
        if S.size == 0:
            continue
        for signs in itertools.product([-1.0, 1.0], repeat=S.size):
            s = np.array(signs)
            try:
                b = np.linalg.solve(Gm[np.ix_(S, S)], c[S] - kappa * s)
            except np.linalg.LinAlgError:
                continue
            if np.any(np.sign(b) != s):
                continue
            beta = np.zeros(n)
            beta[S] = b
            obj = 0.5 * beta @ Gm @ beta - c @ beta + kappa * np.abs(beta).sum()
            if obj < best_obj - 1e-15:
                best, best_obj = beta, obj
    return best


# -- sliding Frank-Wolfe -------------------------------------------------------

class _Problem:
    def __init__(self, ctx: KernelContext, y: np.ndarray, kappa: float):
        self.ctx = ctx
        self.y = y
        self.w = ctx.measure.weights
        self.kappa = kappa
        self.yy = float(np.sum(self.w * y * y))

    def synth(self, theta, beta):
        if len(theta) == 0:
            return np.zeros_like(self.y)
        return beta @ self.ctx.features(theta)[:, 0]

    def objective(self, theta, beta):
        r = self.y - self.synth(theta, beta)
        return 0.5 * float(np.sum(self.w * r * r)) + self.kappa * float(np.sum(np.abs(beta)))

    def corr(self, theta, r, order=0):
        return self.ctx.features(np.atleast_1d(theta))[:, order] @ (self.w * r)


def _refine_peak(prob: _Problem, grid, Ggrid, k, r):
    """Safeguarded Newton on the residual correlation in Riemannian coordinates."""
    ctx = prob.ctx
    lo = Ggrid[max(k - 1, 0)]
    hi = Ggrid[min(k + 1, Ggrid.size - 1)]
    u = Ggrid[k]
    th = grid[k]
    c0 = prob.corr(th, r)[0]
    s = np.sign(c0) or 1.0
    best_th, best_val = th, abs(c0)
    for _ in range(40):
        F = ctx.features([th])[0]
        c1, c2 = (F[1:3] * prob.w) @ r
        c1, c2 = s * c1, s * c2
        if c1 > 0:
            lo = max(lo, u)
        else:
            hi = min(hi, u)
        if c2 < 0:
            nu_ = u - c1 / c2
        else:
            nu_ = 0.5 * (lo + hi)
        if not lo <= nu_ <= hi:
            nu_ = 0.5 * (lo + hi)
        if abs(nu_ - u) <= 1e-13 * max(1.0, abs(u)) or hi - lo <= 1e-14:
            break
        u = nu_
        th = float(ctx.G_inverse(u))
        val = abs(prob.corr(th, r)[0])
        if val > best_val:
            best_th, best_val = th, val
    return best_th, best_val


def _merge(ctx, theta, beta, tol):
    order = np.argsort(theta)
    theta, beta = list(np.asarray(theta)[order]), list(np.asarray(beta)[order])
    i = 0
    while i < len(theta) - 1:
        if ctx.distance(theta[i], theta[i + 1]) < tol:
            b = beta[i] + beta[i + 1]
            wa, wb = abs(beta[i]), abs(beta[i + 1])
            t = (wa * theta[i] + wb * theta[i + 1]) / (wa + wb) if wa + wb > 0 else theta[i]
            theta[i:i + 2] = [t]
            beta[i:i + 2] = [b]
        else:
            i += 1
    return np.array(theta), np.array(beta)


def _joint_refine(prob: _Problem, theta, beta, cfg: SolverConfig):
    """Damped Gauss-Newton on (beta, position) with backtracking on the true objective."""
    ctx = prob.ctx
    lo, hi = ctx.window
    F = prob.objective(theta, beta)
    for _ in range(cfg.max_inner):
        n = theta.size
        feats = ctx.features(theta)
        r = prob.y - beta @ feats[:, 0]
        c0 = feats[:, 0] @ (prob.w * r)
        c1 = feats[:, 1] @ (prob.w * r)
        K = ctx.kernel_all(theta, theta)
        B = np.diag(beta)
        H = np.block([[K[..., 0, 0], K[..., 0, 1] @ B], [B @ K[..., 1, 0], B @ K[..., 1, 1] @ B]])
        g = np.concatenate([c0 - prob.kappa * np.sign(beta), beta * c1])
        if np.max(np.abs(g)) <= cfg.stationarity_tol:
            break
        H = H + 1e-12 * np.trace(H) / (2 * n) * np.eye(2 * n)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = g
        sqg = np.sqrt(ctx.metric(theta))
        t = 1.0
        slope = float(g @ step)
        accepted = False
        for _ in range(40):
            nb = beta + t * step[:n]
            nt = np.clip(theta + t * step[n:] / sqg, lo, hi)
            Fn = prob.objective(nt, nb)
            if Fn <= F - 1e-4 * t * slope or (Fn <= F and t < 1e-6):
                accepted = True
                break
            t *= 0.5
        if not accepted or F - Fn <= 1e-16 * max(1.0, F):
            if accepted:
                theta, beta, F = nt, nb, Fn
            break
        theta, beta, F = nt, nb, Fn
    return theta, beta


def fit(ctx: KernelContext, obs: Observation, cfg: SolverConfig | None = None,
        n_true: int | None = None) -> Estimate:
    """Sliding Frank-Wolfe for the continuous-dictionary lasso.

    Returns a stationary point; the objective trace is non-increasing.
    """
    cfg = cfg or SolverConfig()
    kappa = cfg.kappa if cfg.kappa is not None else tuning_kappa(obs.sigma, obs.delta, obs.tau, cfg.C1)
    if obs.y.measure is not ctx.measure:
        raise ValueError("observation lives on a different grid than the kernel context")
    cap = cfg.max_atoms or (4 * n_true if n_true else 32)
    prob = _Problem(ctx, obs.y.values, kappa)
    grid = ctx.uniform_grid(cfg.coarse_step)
    Ggrid = ctx.G(grid)
    Fg = ctx.features(grid)[:, 0] * prob.w
    theta, beta = np.zeros(0), np.zeros(0)
    trace = [prob.objective(theta, beta)]
    converged = False
    it = 0
    for it in range(1, 4 * cap + 20):
        r = prob.y - prob.synth(theta, beta)
        c = Fg @ r
        k = int(np.argmax(np.abs(c)))
        tnew, cmax = _refine_peak(prob, grid, Ggrid, k, r)
        if cmax <= kappa * (1 + cfg.slack):
            converged = True
            break
        if theta.size >= cap:
            break
        if theta.size and np.min(np.abs(ctx.G(theta) - ctx.G(tnew))) < cfg.merge_tol:
            # the new peak sits on an existing atom; let the joint step move it
            pass
        else:
            theta = np.append(theta, tnew)
            beta = np.append(beta, 0.0)
        beta = lasso_amplitudes(ctx, theta, prob.y, kappa, beta, cfg.lasso_tol)
        keep = np.abs(beta) > cfg.prune_tol
        theta, beta = theta[keep], beta[keep]
        if theta.size:
            theta, beta = _joint_refine(prob, theta, beta, cfg)
            theta, beta = _merge(ctx, theta, beta, cfg.merge_tol)
            beta = lasso_amplitudes(ctx, theta, prob.y, kappa, beta, cfg.lasso_tol)
            keep = np.abs(beta) > cfg.prune_tol
            theta, beta = theta[keep], beta[keep]
        trace.append(min(prob.objective(theta, beta), trace[-1]))
    order = np.argsort(theta)
    est = Estimate(theta[order], beta[order], kappa, trace, converged, it)
    est.kkt = kkt_report(ctx, obs, est, cfg.coarse_step)
    return est


def kkt_report(ctx: KernelContext, obs: Observation, est: Estimate, step: float = 0.1) -> dict:
    """Optimality residuals: on-support equalities, off-support sup and position stationarity."""
    prob = _Problem(ctx, obs.y.values, est.kappa)
    r = prob.y - prob.synth(est.theta, est.beta)
    grid = ctx.uniform_grid(step)
    Ggrid = ctx.G(grid)
    c = ctx.features(grid)[:, 0] @ (prob.w * r)
    k = int(np.argmax(np.abs(c)))
    _, sup = _refine_peak(prob, grid, Ggrid, k, r)
    out = {"sup_correlation": float(sup), "kappa": est.kappa,
           "sup_ratio": float(sup / est.kappa) if est.kappa > 0 else float("inf")}
    if est.theta.size:
        F = ctx.features(est.theta)
        c0 = F[:, 0] @ (prob.w * r)
        c1 = F[:, 1] @ (prob.w * r)
        out["support_residual"] = float(np.max(np.abs(c0 - est.kappa * np.sign(est.beta))))
        lo, hi = ctx.window
        interior = (est.theta > lo) & (est.theta < hi)
        grad = est.beta * np.sqrt(ctx.metric(est.theta)) * c1
        out["position_gradient"] = float(np.max(np.abs(grad[interior]))) if interior.any() else 0.0
    else:
        out["support_residual"] = 0.0
        out["position_gradient"] = 0.0
    return out


# -- error analysis ------------------------------------------------------------

def prediction_error(ctx: KernelContext, theta_hat, beta_hat, theta_star, beta_star) -> float:
    """``|| sum beta_hat phi(theta_hat) - sum beta_star phi(theta_star) ||`` in the grid norm."""
    th = np.concatenate([np.asarray(theta_hat, float), np.asarray(theta_star, float)])
    b = np.concatenate([np.asarray(beta_hat, float), -np.asarray(beta_star, float)])
    if ctx.is_limit:
        K = ctx.kernel(th, th)
        return float(np.sqrt(max(b @ K @ b, 0.0)))
    diff = b @ ctx.features(th)[:, 0]
    return float(np.sqrt(np.sum(ctx.measure.weights * diff * diff)))


@dataclass
class ErrorDecomposition:
    I0: float
    I0_abs: float
    I1: float
    I2: float
    I3: float
    l1_gap: float
    prediction: float

    def to_dict(self):
        return asdict(self)


def error_decomposition(ctx: KernelContext, theta_hat, beta_hat, theta_star, beta_star,
                        r: float) -> ErrorDecomposition:
    """Split the estimate by Riemannian balls of radius ``r`` around the true spikes."""
    th = np.asarray(theta_hat, float)
    bh = np.asarray(beta_hat, float)
    ts = np.asarray(theta_star, float)
    bs = np.asarray(beta_star, float)
    Gs = ctx.G(ts)
    if ts.size > 1 and np.min(np.diff(np.sort(Gs))) <= 2 * r:
        raise ValueError("true spikes closer than twice the radius")
    Gh = ctx.G(th) if th.size else np.zeros(0)
    I0 = I0a = I1 = I2 = 0.0
    near = np.zeros(th.size, dtype=bool)
    for k in range(ts.size):
        d = Gh - Gs[k]
        m = np.abs(d) <= r
        near |= m
        I0 += abs(bh[m].sum() - bs[k])
        I0a += abs(abs(bs[k]) - np.abs(bh[m]).sum())
        I1 += abs(np.sum(bh[m] * d[m]))
        I2 += np.sum(np.abs(bh[m]) * d[m] ** 2)
    I3 = float(np.abs(bh[~near]).sum())
    return ErrorDecomposition(float(I0), float(I0a), float(I1), float(I2), I3,
                              float(abs(np.abs(bh).sum() - np.abs(bs).sum())),
                              prediction_error(ctx, th, bh, ts, bs))
