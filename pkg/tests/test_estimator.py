from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from offgrid.estimator import (Observation, SolverConfig, _cd, error_decomposition, fit, lasso_amplitudes,
                               lasso_bruteforce, prediction_error, soft_threshold, tuning_kappa)
from offgrid.experiments import centred_support
from offgrid.kernel import gaussian_limit, gaussian_scenario
from offgrid.noise import IIDNoise

CTX = gaussian_scenario(1024)


def _observe(theta, beta, sigma=0.0, seed=0):
    clean = beta @ CTX.features(theta)[:, 0]
    noise = IIDNoise(sigma).sample(CTX.measure, seed).values if sigma > 0 else 0.0
    return Observation(CTX.measure.vector(clean + noise), max(sigma, 1e-3), CTX.measure.weights[0], 1024.0)


def test_soft_threshold():
    assert np.allclose(soft_threshold(np.array([-3.0, -0.5, 0.2, 2.0]), 1.0), [-2.0, 0.0, 0.0, 1.0])


def test_tuning_kappa():
    assert tuning_kappa(2.0, 0.01, np.e**4, C1=1.5) == pytest.approx(1.5 * 2 * np.sqrt(0.04))
    with pytest.raises(ValueError):
        tuning_kappa(1.0, 1.0, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 2), st.integers(0, 10**6), st.floats(0.01, 1.0))
def test_lasso_matches_bruteforce(n, seed, kappa):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(5, n))
    A /= np.linalg.norm(A, axis=0)
    Gm = A.T @ A
    c = A.T @ rng.normal(size=5)
    assert np.allclose(_cd(Gm, c, kappa), lasso_bruteforce(Gm, c, kappa), atol=1e-4)


def test_lasso_amplitudes_on_dictionary():
    th = centred_support(CTX, 2, 1.5)
    obs = _observe(th, np.array([1.0, 0.6]), 0.3, 1)
    kappa = 0.05
    b = lasso_amplitudes(CTX, th, obs.y, kappa)
    c = CTX.features(th)[:, 0] @ (CTX.measure.weights * obs.y.values)
    assert np.allclose(b, lasso_bruteforce(CTX.kernel(th, th), c, kappa), atol=1e-4)


@pytest.mark.parametrize("beta", [np.array([1.0, -0.8, 1.2]), np.array([0.5, 0.5])])
def test_noiseless_recovery(beta):
    th = centred_support(CTX, beta.size, 3.0)
    obs = _observe(th, beta)
    est = fit(CTX, obs, SolverConfig(kappa=1e-5))
    assert est.converged and est.theta.size == beta.size
    assert np.allclose(est.theta, th, atol=1e-5)
    assert np.allclose(est.beta, beta, atol=1e-4)
    assert est.kkt["support_residual"] <= 1e-6
    assert est.kkt["sup_ratio"] <= 1 + 1e-6


def test_objective_trace_non_increasing_and_kkt():
    th = centred_support(CTX, 3, 2.5)
    est = fit(CTX, _observe(th, np.array([1.0, 0.7, -1.1]), 0.3, 7), n_true=3)
    assert np.all(np.diff(est.objective_trace) <= 1e-12)
    assert est.kkt["support_residual"] <= 1e-6
    assert est.kkt["sup_ratio"] <= 1 + 1e-5
    assert est.kkt["position_gradient"] <= 1e-6


def test_positions_are_stationary_by_finite_differences():
    th = centred_support(CTX, 2, 3.0)
    obs = _observe(th, np.array([1.0, -1.0]), 0.3, 3)
    est = fit(CTX, obs, n_true=2)
    w, y = CTX.measure.weights, obs.y.values

    def objective(t):
        r = y - est.beta @ CTX.features(t)[:, 0]
        return 0.5 * np.sum(w * r * r) + est.kappa * np.abs(est.beta).sum()

    h = 1e-6
    for k in range(est.theta.size):
        e = np.zeros_like(est.theta)
        e[k] = h
        g = (objective(est.theta + e) - objective(est.theta - e)) / (2 * h)
        assert abs(g) <= 1e-6


def test_error_decomposition_exact_recovery_is_zero():
    th = centred_support(CTX, 2, 3.0)
    b = np.array([1.0, -0.5])
    dec = error_decomposition(CTX, th, b, th, b, 0.45)
    assert dec.I0 == dec.I1 == dec.I2 == dec.I3 == 0
    assert dec.prediction == pytest.approx(0, abs=1e-12)


def test_error_decomposition_terms():
    th = centred_support(CTX, 2, 4.0)
    b = np.array([1.0, -0.5])
    hat_t = np.array([CTX.walk(th[0], 0.1), CTX.walk(th[1], -0.2), CTX.walk(th[1], 1.5)])
    hat_b = np.array([0.9, -0.4, 0.05])
    dec = error_decomposition(CTX, hat_t, hat_b, th, b, 0.45)
    assert dec.I0 == pytest.approx(0.1 + 0.1)
    assert dec.I1 == pytest.approx(0.09 + 0.08)
    assert dec.I2 == pytest.approx(0.9 * 0.01 + 0.4 * 0.04)
    assert dec.I3 == pytest.approx(0.05)


def test_prediction_error_limit_and_grid_agree_in_form():
    lim = gaussian_limit(1.0, (-5, 5))
    # two identical mixtures differ by nothing, one shifted atom gives 2 - 2 K
    assert prediction_error(lim, [0.0], [1.0], [0.0], [1.0]) == pytest.approx(0, abs=1e-7)
    d = prediction_error(lim, [0.0], [1.0], [1.0], [1.0])
    assert d == pytest.approx(np.sqrt(2 - 2 * np.exp(-0.25)), rel=1e-10)


def test_estimate_json_roundtrip(tmp_path):
    import json

    th = centred_support(CTX, 1, 1.0)
    est = fit(CTX, _observe(th, np.array([1.0])), SolverConfig(kappa=1e-3))
    est.to_json(tmp_path / "e.json")
    d = json.loads((tmp_path / "e.json").read_text())
    assert d["theta"] == pytest.approx(list(est.theta))
