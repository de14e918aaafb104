from __future__ import annotations

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from offgrid.dictionary import (DictionarySpec, DomainError, check_regularity, gaussian_profile,
                                cauchy_profile, sinc_profile)
from offgrid.measure import GridMeasure

from oracles import cauchy_sympy, fd, hermite_sympy


@pytest.mark.parametrize("i", range(7))
def test_gaussian_profile_matches_symbolic(i):
    x = np.linspace(-6, 6, 101)
    assert np.allclose(gaussian_profile(x, i), hermite_sympy(i)(x) * np.exp(-x * x / 2), atol=1e-12)


@pytest.mark.parametrize("i", range(4))
def test_cauchy_profile_matches_symbolic(i):
    x = np.linspace(-6, 6, 101)
    assert np.allclose(cauchy_profile(x, i), cauchy_sympy(i)(x), atol=1e-12)


@pytest.mark.parametrize("i", range(4))
def test_sinc_derivatives_match_high_precision(i):
    mp.mp.dps = 40
    xs = [0.0, 1e-9, 3e-5, 1e-4, 0.01, 0.1, 0.159, 0.16, 0.5, 1.7, -2.3]
    ref = np.array([float(mp.diff(lambda z: mp.sinc(mp.pi * z), x, i)) for x in xs])
    assert np.allclose(sinc_profile(np.array(xs), i), ref, atol=1e-11, rtol=1e-11)


@pytest.mark.parametrize("family", ["gaussian_translate", "cauchy_translate", "sinc_translate", "exp_scale"])
def test_parameter_derivatives_match_finite_differences(family):
    spec = DictionarySpec(family, 0.7, warp=(1.3, 0.2))
    t = np.linspace(0.1, 4, 50)
    th = 1.1
    D = spec.derivatives([th], t)[0]
    for i in (1, 2, 3):
        num = fd(lambda x: spec.derivatives([x], t, 0)[0, 0], th, 1e-3, i)
        assert np.allclose(D[i], num, atol=5e-6 * max(1, np.abs(D[i]).max()))


def test_domain_errors():
    spec = DictionarySpec("exp_scale")
    with pytest.raises(DomainError):
        spec.derivatives([-1.0], [0.0, 1.0])
    with pytest.raises(DomainError):
        DictionarySpec("gaussian_translate", theta_domain=(0, 1)).derivatives([2.0], [0.0])
    with pytest.raises(ValueError):
        DictionarySpec("laplace_translate")


def test_regularity_one_point_grid_fails():
    m = GridMeasure(np.array([0.0]), np.array([1.0]))
    rep = check_regularity(DictionarySpec("gaussian_translate"), m, [0.3, 1.0])
    assert not rep.ok


def test_regularity_two_point_grid_passes():
    m = GridMeasure(np.array([-0.5, 0.5]), np.array([1.0, 1.0]))
    rep = check_regularity(DictionarySpec("gaussian_translate"), m, np.linspace(-1, 1, 7))
    assert rep.ok and rep.min_gram > 1e-6


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.sampled_from(["gaussian_translate", "cauchy_translate", "sinc_translate"]))
def test_regularity_on_fine_grid(theta, family):
    m = GridMeasure.uniform(-8, 8, 400)
    assert check_regularity(DictionarySpec(family), m, [theta]).ok
