from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate

from offgrid.dictionary import DictionarySpec
from offgrid.kernel import KernelContext, gaussian_limit, gaussian_profile
from offgrid.measure import GridMeasure
from offgrid.experiments import centred_support
from offgrid.separation import (coherence, delta_hat, gaussian_M, max_coherence, psi, psi_upper_bound)

LIM = gaussian_limit(1.0, (-40, 40))


def test_two_spike_coherence_closed_form():
    for gap in (0.7, 2.0, 4.5):
        sup = centred_support(LIM, 2, gap)
        ref = max(abs(gaussian_profile(gap, i)) for i in range(4))
        assert coherence(LIM, sup) == pytest.approx(ref, abs=1e-12)


def test_max_coherence_at_least_equispaced():
    res = max_coherence(LIM, 3, 2.5, restarts=4, rng=1)
    assert res.value >= res.equispaced - 1e-15
    assert np.min(np.diff(LIM.G(np.sort(res.support)))) >= 2.5 - 1e-9


def test_delta_hat_is_monotone():
    d1 = delta_hat(LIM, 0.05, 2, restarts=2, hi=8)
    d2 = delta_hat(LIM, 0.01, 2, restarts=2, hi=8)
    d3 = delta_hat(LIM, 0.01, 3, restarts=2, hi=8)
    assert d1 <= d2 <= d3 + 1e-2


def test_psi_against_quadrature():
    M = gaussian_M()
    for s in (1, 2, 5):
        for d in (0.3, 2.0, 10.0):
            q, _ = integrate.quad(lambda t: np.exp(-t * t * d * d / 4), 0, s / 2 + 1)
            assert psi(M, d, s) == pytest.approx(2 * M * q, rel=1e-12)


def test_psi_inversion():
    M = gaussian_M()
    for s in (2, 4):
        for u in (0.5, 0.01, 1e-3):
            d = psi_upper_bound(M, u, s)
            assert abs(psi(M, d, s) - u) <= 1e-6
    assert psi_upper_bound(M, 10 * M * 4, 2) == 0.0
    assert psi_upper_bound(M, 1e-3) >= psi_upper_bound(M, 1e-3, 50)


def test_delta_below_psi_bound():
    M = gaussian_M()
    u = 0.01
    assert delta_hat(LIM, u, 2, restarts=2, hi=8) <= psi_upper_bound(M, u, 2)


def test_sinc_grid_coherence_runs():
    # no closed form for the sinc kernel; exercise the numeric path on a grid
    m = GridMeasure.uniform(-30, 30, 1200)
    ctx = KernelContext(DictionarySpec("sinc_translate"), m, (-10, 10))
    sup = centred_support(ctx, 2, 6.0)
    u = coherence(ctx, sup)
    assert 0 < u < 1
