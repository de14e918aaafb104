from __future__ import annotations

import numpy as np
import pytest

from offgrid.kernel import gaussian_limit_constants, gaussian_scenario
from offgrid.measure import GridMeasure
from offgrid.noise import (CorrelatedNoise, IIDNoise, NoiseModelError, SeriesNoise, WeightedIIDNoise,
                           check_variance_bound, empirical_sup_exceedance, process_constants, tail_bound)


def _tests(m, rng):
    return [np.exp(-(m.points - c) ** 2) for c in (-1, 0, 2)] + [rng.normal(size=m.size)]


@pytest.mark.parametrize("model", [IIDNoise(0.7), WeightedIIDNoise(1.3, delta=0.05),
                                   CorrelatedNoise.equicorrelated(80, 0.9, 1.0)])
def test_variance_bound_grid_models(model):
    m = GridMeasure.uniform(-2, 2, 80)
    res = check_variance_bound(model, m, _tests(m, np.random.default_rng(0)), reps=4000, rng=1)
    assert all(r.passed for r in res)


def test_iid_variance_is_tight():
    m = GridMeasure.uniform(-2, 2, 80)
    res = check_variance_bound(IIDNoise(1.0), m, [np.ones(80)], reps=20000, rng=2)
    assert res[0].ratio == pytest.approx(1.0, abs=0.05)


def test_weighted_iid_rejects_wrong_spacing():
    with pytest.raises(NoiseModelError):
        WeightedIIDNoise(1.0, delta=0.3).declared(GridMeasure.uniform(0, 1, 10))


def test_correlated_validation():
    T = 20
    cov = np.eye(T)
    cov[0, 1] = cov[1, 0] = 0.5
    with pytest.raises(NoiseModelError):
        CorrelatedNoise(1.0, cov)
    cov = np.full((T, T), -1.0 / T)
    np.fill_diagonal(cov, 1.0)
    CorrelatedNoise(1.0, cov)  # eigenvalue 1/T, still fine
    bad = -np.eye(T)
    with pytest.raises(NoiseModelError):
        CorrelatedNoise(1.0, bad)
    assert CorrelatedNoise.equicorrelated(T, 2.0).declared(GridMeasure.uniform(0, 1, T))[0] == pytest.approx(2 * np.sqrt(2))


def test_correlated_sample_covariance():
    T = 6
    model = CorrelatedNoise.equicorrelated(T, 1.0, 1.0)
    W = model.sample(GridMeasure.uniform(0, 1, T), 0, size=200000)
    assert np.allclose(np.cov(W.T), model.cov, atol=0.02)


def test_brownian_series():
    C, n = 1.5, 100
    model = SeriesNoise.brownian(C, n)
    m = GridMeasure.uniform(0, 1, 400)
    assert model.declared(m) == (1.0, pytest.approx(4 * C**2 / np.pi**2))
    P = model.functions(m)
    assert np.allclose((P * m.weights) @ P.T, np.eye(n), atol=1e-10)
    # variance of w(t) approaches C^2 t
    W = model.sample(m, 3, size=20000)
    k = np.searchsorted(m.points, 0.5)
    assert np.var(W[:, k]) == pytest.approx(C**2 * m.points[k], rel=0.05)
    res = check_variance_bound(model, m, _tests(m, np.random.default_rng(4)), reps=3000, rng=5)
    assert all(r.passed for r in res)


def test_truncated_white_series():
    model = SeriesNoise.truncated_white(30)
    m = GridMeasure.uniform(0, 1, 64)
    assert model.declared(m) == (1.0, 1.0)
    P = model.functions(m)
    raw = np.stack([np.sqrt(2) * np.sin((k + 1) * np.pi * m.points) for k in range(30)])
    assert np.allclose(P, raw, atol=1e-10)  # already orthonormal on this grid
    with pytest.raises(NoiseModelError):
        SeriesNoise.truncated_white(100).functions(m)


def test_tail_bound_shape():
    u = np.linspace(0.1, 5, 50)
    b = tail_bound(1.0, 1.0, 1.0, 0.01, 10.0, u)
    assert np.all(np.diff(b) <= 0)
    assert tail_bound(1.0, 1.0, 1.0, 1.0, 1.0, 1e-6) >= 3


def test_process_constants():
    L = gaussian_limit_constants()
    assert process_constants(0, L) == (1.0, 1.0)
    assert process_constants(1, L) == (1.0, pytest.approx(np.sqrt(6)))
    assert process_constants(2, L) == (pytest.approx(np.sqrt(6)), pytest.approx(np.sqrt(30)))


@pytest.mark.parametrize("i", [0, 1, 2])
def test_empirical_tail_below_bound(i):
    ctx = gaussian_scenario(256)
    L = gaussian_limit_constants()
    model = IIDNoise(1.0)
    sig, delta = model.declared(ctx.measure)
    C1, C2 = process_constants(i, L)
    u = np.linspace(0.5, 5, 6) * sig * np.sqrt(delta) * C1
    p, se, M = empirical_sup_exceedance(ctx, model, i, u, reps=300, rng=i)
    assert np.all(p <= tail_bound(C1, C2, sig, delta, ctx.length(), u) + 3 * se)


def test_suprema_dominate_grid_values():
    ctx = gaussian_scenario(256)
    W = IIDNoise(1.0).sample(ctx.measure, 0, size=20)
    from offgrid.noise import noise_suprema

    M = noise_suprema(ctx, W, 0)
    th = np.linspace(*ctx.window, 3001)
    dense = np.abs(W @ (ctx.features(th)[:, 0] * ctx.measure.weights).T).max(axis=1)
    assert np.all(M >= dense - 1e-6 * dense)
