"""Interpolating and derivative certificates built from the kernel Gram system."""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg
from scipy.optimize import minimize_scalar

from .kernel import KernelContext, LimitConstants, epsilon_inf, nu_inf


class SingularSystem(np.linalg.LinAlgError):
    pass


@dataclass
class GammaSystem:
    support: np.ndarray
    G00: np.ndarray
    G10: np.ndarray  # G10[k, l] = K^[1,0](theta_k, theta_l)
    G11: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        return np.block([[self.G00, self.G10.T], [self.G10, self.G11]])

    def condition(self) -> float:
        return float(np.linalg.cond(self.matrix))


def build_gamma(ctx: KernelContext, support) -> GammaSystem:
    th = np.asarray(support, dtype=float)
    if np.unique(th).size != th.size:
        raise SingularSystem("repeated support point")
    K = ctx.kernel_all(th, th)
    return GammaSystem(th, K[..., 0, 0], K[..., 1, 0], K[..., 1, 1])


@dataclass
class Certificate:
    kind: str  # "interpolating" or "derivative"
    support: np.ndarray
    v: np.ndarray
    alpha: np.ndarray
    xi: np.ndarray
    norm: float

    def __call__(self, ctx, theta, order: int = 0):
        return evaluate_certificate(ctx, self.support, self.alpha, self.xi, theta, order)


def _chol(M, what):
    try:
        return linalg.cho_factor(M, lower=True)
    except linalg.LinAlgError as exc:
        cond = np.linalg.cond(M)
        raise SingularSystem(f"{what} is not positive definite (condition {cond:.3e})") from exc


def solve_certificate(system: GammaSystem, v, kind: str = "interpolating") -> Certificate:
    """Solve ``Gamma (alpha; xi) = (v; 0)`` or ``(0; v)`` by block elimination on ``Gamma11``."""
    v = np.asarray(v, dtype=float)
    G00, G10, G11 = system.G00, system.G10, system.G11
    if v.size != G00.shape[0]:
        raise ValueError("sign vector length differs from the support size")
    c11 = _chol(G11, "derivative block")
    schur = G00 - G10.T @ linalg.cho_solve(c11, G10)
    cs = _chol(0.5 * (schur + schur.T), "Schur complement")
    if kind == "interpolating":
        alpha = linalg.cho_solve(cs, v)
        xi = -linalg.cho_solve(c11, G10 @ alpha)
    elif kind == "derivative":
        y = linalg.cho_solve(c11, v)
        alpha = -linalg.cho_solve(cs, G10.T @ y)
        xi = y - linalg.cho_solve(c11, G10 @ alpha)
    else:
        raise ValueError(f"unknown certificate kind {kind!r}")
    n2 = alpha @ G00 @ alpha + 2 * alpha @ G10.T @ xi + xi @ G11 @ xi
    return Certificate(kind, system.support, v, alpha, xi, float(np.sqrt(max(n2, 0.0))))


def evaluate_certificate(ctx: KernelContext, support, alpha, xi, theta, order: int = 0) -> np.ndarray:
    """``eta^[order](theta) = sum alpha_k K^[order,0](theta, theta_k) + xi_k K^[order,1](theta, theta_k)``."""
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    K = ctx.kernel_all(th, np.asarray(support, dtype=float))
    return K[..., order, 0] @ np.asarray(alpha) + K[..., order, 1] @ np.asarray(xi)


def coefficient_bounds(u: float, kind: str) -> dict:
    """Sup-norm bounds on the coefficients when the coherence is at most ``u < 1/2``."""
    if not 0 <= u < 0.5:
        raise ValueError("coherence must lie in [0, 1/2)")
    if kind == "interpolating":
        return {"alpha": (1 - u) / (1 - 2 * u), "alpha_minus_v": u / (1 - 2 * u), "xi": u / (1 - 2 * u)}
    return {"alpha": u / (1 - 2 * u), "xi": (1 - u) / (1 - 2 * u)}


def check_coefficient_bounds(cert: Certificate, u: float) -> dict:
    b = coefficient_bounds(u, cert.kind)
    got = {"alpha": np.max(np.abs(cert.alpha)), "xi": np.max(np.abs(cert.xi))}
    if cert.kind == "interpolating":
        got["alpha_minus_v"] = np.max(np.abs(cert.alpha - cert.v))
    return {k: (float(got[k]), float(b[k]), bool(got[k] <= b[k] + 1e-12)) for k in b}


# -- constants -----------------------------------------------------------------

@dataclass(frozen=True)
class TheoreticalConstants:
    r: float
    rho: float
    eps: float
    nu: float
    H1: float
    H2: float
    C_N: float
    C_N_prime: float
    C_B: float
    C_F: float
    c_N: float
    c_F: float
    c_B: float

    def to_dict(self):
        return asdict(self)


def _H2(L, eps, nu):
    return min(1 / 6, 8 * eps / (10 * (5 + 2 * L.L10)), 8 * nu / (9 * (2 * L.L20 + 2 * L.L21 + 4)))


def theoretical_constants(L: LimitConstants, r: float, rho: float = 2.0,
                          eps_fn=epsilon_inf, nu_fn=nu_inf) -> TheoreticalConstants:
    """Certificate constants from the limit kernel constants at near radius ``r``.

    ``eps_fn``/``nu_fn`` are the limit separation and curvature functions, taken
    at ``r / rho`` and ``rho * r`` to absorb a metric distortion ``rho``.
    """
    if not 0 < r < 1 / np.sqrt(2 * L.L20):
        raise ValueError("near radius must lie in (0, 1/sqrt(2 L20))")
    e = float(eps_fn(r / rho))
    n = float(nu_fn(rho * r))
    return TheoreticalConstants(
        r=r, rho=rho, eps=e, nu=n,
        H1=min(0.5, L.L20, L.L21, n / 10, e / 10),
        H2=_H2(L, e, n),
        C_N=n / 180,
        C_N_prime=(5 * L.L20 + L.L21 + 4) / 8,
        C_B=2.0,
        C_F=e / 10,
        c_N=(L.L20 + 5 * L.L21 + 7) / 8,
        c_F=(5 * L.L10 + 7) / 4,
        c_B=2.0,
    )


def optimal_radius(L: LimitConstants, rho: float = 2.0, eps_fn=epsilon_inf, nu_fn=nu_inf,
                   upper: float = 0.5) -> float:
    """Near radius maximizing the admissible coherence level ``H2``."""
    upper = min(upper, 1 / np.sqrt(2 * L.L20) - 1e-12)
    res = minimize_scalar(lambda r: -_H2(L, eps_fn(r / rho), nu_fn(rho * r)),
                          bounds=(1e-9, upper), method="bounded", options={"xatol": 1e-10})
    return float(res.x)


def check_hypotheses(c: TheoreticalConstants, s: int, V: float, u_inf: float,
                     u_inf_prime: float | None = None) -> dict:
    """Which standing conditions hold for ``s`` spikes, kernel gap ``V`` and limit coherence."""
    up = u_inf if u_inf_prime is None else u_inf_prime
    return {
        "radius": c.r < 1.0,
        "eps_positive": c.eps > 0,
        "nu_positive": c.nu > 0,
        "interp_coherence": u_inf < c.H2,
        "interp_gap": V <= c.H1,
        "interp_total": (s - 1) * V <= c.H2 - u_inf,
        "deriv_coherence": up < 1 / 6,
        "deriv_gap": V <= 1,
        "deriv_total": (s - 1) * V + up <= 1 / 6,
    }


# -- verification --------------------------------------------------------------

@dataclass
class ClauseResult:
    kind: str
    signs: list
    clause: str
    margin: float  # >= 0 means the clause holds
    worst_theta: float | None = None

    @property
    def passed(self) -> bool:
        return self.margin >= -1e-12


@dataclass
class VerificationReport:
    support: list
    constants: dict
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self):
        return [r for r in self.results if not r.passed]

    def to_dict(self):
        return {
            "support": [float(x) for x in self.support],
            "constants": self.constants,
            "passed": self.passed,
            "results": [dict(asdict(r), passed=r.passed) for r in self.results],
        }

    def to_json(self, path=None):
        txt = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(txt)
        return txt


def sign_patterns(s: int, rng=None, limit: int = 10, n_random: int = 64):
    if s <= limit:
        return [np.array(p, dtype=float) for p in itertools.product((1.0, -1.0), repeat=s)]
    rng = np.random.default_rng(rng)
    return [rng.choice([-1.0, 1.0], size=s) for _ in range(n_random)]


def region_grids(ctx: KernelContext, support, r: float, near_points: int = 200, step=None):
    """Near-ball points (with owner index and signed distance) and far-region points."""
    support = np.asarray(support, dtype=float)
    Gs = ctx.G(support)
    lo_G, hi_G = sorted((float(ctx.G(ctx.window[0])), float(ctx.G(ctx.window[1]))))
    near_th, owner, sd = [], [], []
    for k, g0 in enumerate(Gs):
        off = np.linspace(-r, r, near_points)
        gg = np.clip(g0 + off, lo_G, hi_G)
        near_th.append(ctx.G_inverse(gg))
        owner.append(np.full(near_points, k))
        sd.append(gg - g0)
    far = ctx.uniform_grid(r / 50 if step is None else step)
    edges = ctx.G_inverse(np.clip(np.concatenate([Gs - r, Gs + r]), lo_G, hi_G))
    far = np.unique(np.concatenate([far, edges]))
    dist = np.min(np.abs(ctx.G(far)[:, None] - Gs[None, :]), axis=1)
    far = far[dist >= r * (1 - 1e-9)]
    return np.concatenate(near_th), np.concatenate(owner), np.concatenate(sd), far


def verify_assumptions(ctx: KernelContext, support, c: TheoreticalConstants,
                       kinds=("interpolating", "derivative"), patterns=None, near_points: int = 200,
                       rng=None) -> VerificationReport:
    """Check every certificate clause on near-ball and far-region grids for each sign pattern."""
    support = np.sort(np.asarray(support, dtype=float))
    s = support.size
    Gs = ctx.G(support)
    if s > 1 and np.min(np.diff(Gs)) <= 2 * c.r:
        raise ValueError("near balls overlap: support gap must exceed twice the radius")
    system = build_gamma(ctx, support)
    near, owner, sd, far = region_grids(ctx, support, c.r, near_points)
    Kn = ctx.kernel_all(near, support)[..., 0, :2]
    Kf = ctx.kernel_all(far, support)[..., 0, :2] if far.size else np.zeros((0, s, 2))
    d2 = sd * sd
    sgn = np.sign(sd)
    patterns = sign_patterns(s, rng) if patterns is None else [np.asarray(p, float) for p in patterns]
    report = VerificationReport(list(support), c.to_dict())

    def add(kind, v, name, excess, where):
        if excess.size == 0:
            report.results.append(ClauseResult(kind, v.tolist(), name, np.inf))
            return
        k = int(np.argmax(excess))
        report.results.append(ClauseResult(kind, v.tolist(), name, float(-excess[k]), float(where[k])))

    for v in patterns:
        for kind in kinds:
            cert = solve_certificate(system, v, kind)
            en = Kn[..., 0] @ cert.alpha + Kn[..., 1] @ cert.xi
            ef = Kf[..., 0] @ cert.alpha + Kf[..., 1] @ cert.xi
            vk = v[owner]
            if kind == "interpolating":
                add(kind, v, "near_decay", np.abs(en) - (1 - c.C_N * d2), near)
                add(kind, v, "near_value", np.abs(en - vk) - c.C_N_prime * d2, near)
                add(kind, v, "far", np.abs(ef) - (1 - c.C_F), far)
                add(kind, v, "norm", np.array([cert.norm - c.C_B * np.sqrt(s)]), np.array([np.nan]))
            else:
                add(kind, v, "near_slope", np.abs(en - vk * sgn * np.sqrt(d2)) - c.c_N * d2, near)
                add(kind, v, "far", np.abs(ef) - c.c_F, far)
                add(kind, v, "norm", np.array([cert.norm - c.c_B * np.sqrt(s)]), np.array([np.nan]))
    return report
