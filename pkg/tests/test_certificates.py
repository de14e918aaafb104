from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from offgrid.certificates import (SingularSystem, build_gamma, check_coefficient_bounds, check_hypotheses,
                                  coefficient_bounds, evaluate_certificate, optimal_radius, sign_patterns,
                                  solve_certificate, theoretical_constants, verify_assumptions)
from offgrid.experiments import centred_support
from offgrid.kernel import epsilon_inf, gaussian_limit, gaussian_limit_constants, gaussian_scenario, nu_inf
from offgrid.separation import coherence

L = gaussian_limit_constants()
LIM = gaussian_limit(1.0, (-20, 20))
GRID = gaussian_scenario(1024)


def _full_solve(system, v, kind):
    rhs = np.concatenate([v, np.zeros_like(v)]) if kind == "interpolating" else np.concatenate([np.zeros_like(v), v])
    x = np.linalg.solve(system.matrix, rhs)
    return x[: v.size], x[v.size:]


@pytest.mark.parametrize("kind", ["interpolating", "derivative"])
@pytest.mark.parametrize("ctx", [LIM, GRID])
def test_schur_solution_matches_direct_solve(ctx, kind):
    sup = centred_support(ctx, 3, 2.5)
    system = build_gamma(ctx, sup)
    v = np.array([1.0, -1.0, 1.0])
    cert = solve_certificate(system, v, kind)
    a, x = _full_solve(system, v, kind)
    assert np.allclose(cert.alpha, a, atol=1e-10)
    assert np.allclose(cert.xi, x, atol=1e-10)


@pytest.mark.parametrize("kind", ["interpolating", "derivative"])
def test_certificate_interpolation_conditions(kind):
    sup = centred_support(GRID, 3, 2.0)
    v = np.array([-1.0, 1.0, 1.0])
    cert = solve_certificate(build_gamma(GRID, sup), v, kind)
    e0 = evaluate_certificate(GRID, sup, cert.alpha, cert.xi, sup, 0)
    e1 = evaluate_certificate(GRID, sup, cert.alpha, cert.xi, sup, 1)
    if kind == "interpolating":
        assert np.allclose(e0, v, atol=1e-10) and np.allclose(e1, 0, atol=1e-10)
    else:
        assert np.allclose(e0, 0, atol=1e-10) and np.allclose(e1, v, atol=1e-10)


def test_certificate_norm_matches_explicit_vector():
    sup = centred_support(GRID, 2, 3.0)
    cert = solve_certificate(build_gamma(GRID, sup), np.array([1.0, -1.0]), "derivative")
    F = GRID.features(sup)
    p = cert.alpha @ F[:, 0] + cert.xi @ F[:, 1]
    assert cert.norm == pytest.approx(np.sqrt(np.sum(GRID.measure.weights * p * p)), rel=1e-10)


def test_sign_flip_antisymmetry():
    sup = centred_support(LIM, 2, 3.0)
    system = build_gamma(LIM, sup)
    a = solve_certificate(system, np.array([1.0, -1.0]))
    b = solve_certificate(system, np.array([-1.0, 1.0]))
    assert np.allclose(a.alpha, -b.alpha) and np.allclose(a.xi, -b.xi)


def test_repeated_support_is_singular():
    with pytest.raises(SingularSystem):
        build_gamma(LIM, [0.0, 0.0])


def test_nearly_coincident_support_reports_condition():
    with pytest.raises(SingularSystem, match="condition"):
        solve_certificate(build_gamma(LIM, [0.0, 1e-9]), np.array([1.0, 1.0]))


def test_constants_from_limit_values():
    r = optimal_radius(L)
    c = theoretical_constants(L, r)
    e, n = float(epsilon_inf(r / 2)), float(nu_inf(2 * r))
    assert c.H1 == pytest.approx(min(0.5, 1.0, L.L21, n / 10, e / 10))
    assert c.C_N == pytest.approx(n / 180)
    assert c.C_F == pytest.approx(e / 10)
    assert c.c_N == pytest.approx((1 + 5 * L.L21 + 7) / 8)
    assert c.c_F == pytest.approx((5 * np.exp(-0.5) + 7) / 4)
    # the radius balances the two non-constant terms of H2
    t1 = 8 * e / (10 * (5 + 2 * L.L10))
    t2 = 8 * n / (9 * (2 + 2 * L.L21 + 4))
    assert t1 == pytest.approx(t2, rel=1e-6)


def test_radius_must_be_admissible():
    with pytest.raises(ValueError):
        theoretical_constants(L, 0.8)


def test_hypothesis_flags():
    c = theoretical_constants(L, optimal_radius(L))
    ok = check_hypotheses(c, 2, 1e-4, 0.9 * c.H2)
    assert all(ok.values())
    bad = check_hypotheses(c, 2, 1e-2, 0.9 * c.H2)
    assert not bad["interp_gap"]


@pytest.mark.parametrize("kind", ["interpolating", "derivative"])
@settings(max_examples=25, deadline=None)
@given(gap=st.floats(2.0, 8.0), s=st.integers(2, 4), seed=st.integers(0, 10_000))
def test_coefficient_bounds_follow_from_coherence(kind, gap, s, seed):
    sup = centred_support(LIM, s, gap)
    u = coherence(LIM, sup)
    if u >= 0.5:
        return
    v = np.random.default_rng(seed).choice([-1.0, 1.0], s)
    res = check_coefficient_bounds(solve_certificate(build_gamma(LIM, sup), v, kind), u)
    assert all(ok for _, _, ok in res.values())


def test_coefficient_bounds_formulae():
    b = coefficient_bounds(0.1, "interpolating")
    assert b["alpha"] == pytest.approx(0.9 / 0.8) and b["xi"] == pytest.approx(0.1 / 0.8)
    with pytest.raises(ValueError):
        coefficient_bounds(0.5, "derivative")


def test_sign_patterns():
    assert len(sign_patterns(3)) == 8
    assert len(sign_patterns(12, rng=0)) == 64


def test_verification_passes_for_well_separated_support():
    c = theoretical_constants(L, optimal_radius(L))
    rep = verify_assumptions(LIM, centred_support(LIM, 2, 9.0), c)
    assert rep.passed
    assert {r.clause for r in rep.results} == {"near_decay", "near_value", "far", "norm", "near_slope"}


def test_verification_fails_for_close_support():
    c = theoretical_constants(L, optimal_radius(L))
    rep = verify_assumptions(LIM, centred_support(LIM, 2, 1.2), c)
    assert not rep.passed
    assert rep.failures()


def test_report_serializes(tmp_path):
    import json

    c = theoretical_constants(L, optimal_radius(L))
    rep = verify_assumptions(LIM, centred_support(LIM, 2, 9.0), c, kinds=("derivative",))
    rep.to_json(tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["passed"] and len(d["results"]) == 4 * 3
