import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import HBAR_BETA, KAPPA, LAM, OMEGA_M, TWO_PI
from ionsbm.correlation import nbar_to_hbar_beta
from ionsbm.errors import ParameterError
from ionsbm.spectral import (
    CompositeSpectralDensity,
    LorentzianComponent,
    TargetSpectralDensity,
    eval_composite,
    eval_lorentzian,
    eval_regression_sd,
    fit_objective,
    fit_spectral_density,
    ohmic_slope,
    relative_error_epsilon_j,
)

C = LorentzianComponent(LAM, KAPPA, OMEGA_M)

components = st.builds(
    lambda lam, w, r: LorentzianComponent(lam, r * w, w),
    st.floats(0.0, 1e6), st.floats(1e3, 1e6), st.floats(1e-4, 0.9),
)


def test_component_validation():
    for args in [(-1.0, 1.0, 2.0), (1.0, 0.0, 2.0), (1.0, 1.0, 0.0), (1.0, 2.0, 2.0), (np.nan, 1.0, 2.0)]:
        with pytest.raises(ParameterError):
            LorentzianComponent(*args)


def test_value_at_zero_and_peak():
    assert eval_lorentzian(C, 0.0) == 0.0
    peak = LAM ** 2 * (1 / KAPPA - KAPPA / (KAPPA ** 2 + 4 * OMEGA_M ** 2))
    assert eval_lorentzian(C, OMEGA_M) == pytest.approx(peak, rel=1e-14)


def test_matches_two_term_difference():
    w = np.linspace(-3 * OMEGA_M, 3 * OMEGA_M, 501)
    direct = LAM ** 2 * (KAPPA / (KAPPA ** 2 + (w - OMEGA_M) ** 2) - KAPPA / (KAPPA ** 2 + (w + OMEGA_M) ** 2))
    np.testing.assert_allclose(eval_lorentzian(C, w), direct, rtol=1e-12, atol=1e-12 * np.abs(direct).max())


def test_composite_basics():
    w = np.linspace(0, 4 * OMEGA_M, 301)
    np.testing.assert_array_equal(eval_composite(CompositeSpectralDensity(()), w), 0.0)
    np.testing.assert_array_equal(eval_composite(CompositeSpectralDensity((C,)), w), eval_lorentzian(C, w))
    np.testing.assert_allclose(eval_composite(CompositeSpectralDensity((C, C)), w), 2 * eval_lorentzian(C, w),
                               rtol=1e-15)


def test_regression_sd_examples():
    top = LAM ** 2 * (1 / KAPPA + KAPPA / (KAPPA ** 2 + 4 * OMEGA_M ** 2))
    assert eval_regression_sd(C, HBAR_BETA, OMEGA_M) == pytest.approx(top, rel=1e-13)
    assert eval_regression_sd(C, HBAR_BETA, 0.0) == 0.0
    assert eval_regression_sd(C, HBAR_BETA, 1e-9) < 1e-3 * top


def test_epsilon_golden():
    # direct high-precision evaluation of the two closed forms (mpmath, 50 digits)
    assert relative_error_epsilon_j(C, 5.91e-6, TWO_PI * 150e3) == pytest.approx(0.128930260903034, rel=1e-9)
    hb = nbar_to_hbar_beta(0.025, OMEGA_M)
    assert relative_error_epsilon_j(C, hb, TWO_PI * 150e3) == pytest.approx(0.1289214167820401, rel=1e-9)


def test_epsilon_zero_temperature_limit():
    a, b = 1 / KAPPA, KAPPA / (KAPPA ** 2 + 4 * OMEGA_M ** 2)
    assert 2 * b / (a - b) == pytest.approx(7.8125e-5, rel=1e-3)
    assert relative_error_epsilon_j(C, 1.0, OMEGA_M) == pytest.approx(2 * b / (a - b), rel=1e-10)


def test_epsilon_undefined_at_zero():
    assert np.isnan(relative_error_epsilon_j(C, HBAR_BETA, 0.0))


def test_epsilon_rises_toward_high_frequency():
    w = TWO_PI * np.linspace(110e3, 150e3, 200)
    eps = relative_error_epsilon_j(C, HBAR_BETA, w)
    assert np.all(np.diff(eps) > 0)
    w_all = TWO_PI * np.linspace(1e3, 150e3, 2000)
    assert np.argmax(relative_error_epsilon_j(C, HBAR_BETA, w_all)) == w_all.size - 1


@given(components, st.floats(-1e7, 1e7))
def test_odd_symmetry(c, w):
    assert eval_lorentzian(c, -w) == pytest.approx(-eval_lorentzian(c, w), rel=1e-12, abs=1e-300)


@given(components, st.floats(0.0, 1e8))
def test_nonnegative_on_positive_axis(c, w):
    assert eval_lorentzian(c, w) >= 0.0


@given(components, st.floats(1e-3, 1e4), st.floats(1e-2, 1e3))
def test_epsilon_nonnegative(c, hbar_beta_scale, x):
    eps = relative_error_epsilon_j(c, hbar_beta_scale / c.omega_m, x * c.omega_m)
    assert eps >= 0.0 or np.isnan(eps)


@given(components.filter(lambda c: c.lam > 0))
def test_small_frequency_ohmic_slope(c):
    w = np.array([1e-4, 1e-3, 1e-2]) * c.omega_m
    np.testing.assert_allclose(eval_lorentzian(c, w) / w, ohmic_slope(c), rtol=1e-2)


def test_ohmic_slope_finite_difference():
    h = 1e-6 * OMEGA_M
    fd = (eval_lorentzian(C, h) - eval_lorentzian(C, -h)) / (2 * h)
    assert ohmic_slope(C) == pytest.approx(fd, rel=1e-8)
    assert ohmic_slope(C) == pytest.approx(4 * LAM ** 2 * KAPPA * OMEGA_M / (KAPPA ** 2 + OMEGA_M ** 2) ** 2, rel=1e-14)


@given(st.lists(components, min_size=1, max_size=4), st.floats(0.0, 5e6))
def test_linearity(cs, w):
    total = sum(eval_lorentzian(c, w) for c in cs)
    assert eval_composite(CompositeSpectralDensity(tuple(cs)), w) == pytest.approx(total, rel=1e-12, abs=1e-300)


def test_target_validation():
    with pytest.raises(ParameterError):
        TargetSpectralDensity.from_samples([0.0, 2.0, 1.0], [0.0, 1.0, 1.0])
    with pytest.raises(ParameterError):
        TargetSpectralDensity.from_samples([0.0, 1.0], [0.0, -1.0])
    with pytest.raises(ParameterError):
        TargetSpectralDensity.from_family("drude", alpha=1.0)
    t = TargetSpectralDensity.from_samples([0.0, 1.0, 2.0], [0.0, 2.0, 0.0])
    assert t(0.5) == pytest.approx(1.0)


def test_fit_fixed_point_single():
    truth = LorentzianComponent(TWO_PI * 5e4, TWO_PI * 2e3, TWO_PI * 8e4)
    target = TargetSpectralDensity.from_family("lorentzian", components=[truth])
    res = fit_spectral_density(target, 1, init=[truth])
    got = res.density.components[0]
    for k in ("lam", "kappa", "omega_m"):
        assert getattr(got, k) == pytest.approx(getattr(truth, k), rel=1e-6)
    assert res.residual <= 1e-12 * res.target_norm


def test_fit_idempotence_two_components():
    truth = (LorentzianComponent(TWO_PI * 8e4, TWO_PI * 1e3, TWO_PI * 5e4),
             LorentzianComponent(TWO_PI * 6e4, TWO_PI * 1e3, TWO_PI * 1.5e5))
    target = TargetSpectralDensity.from_family("lorentzian", components=truth)
    res = fit_spectral_density(target, 2, init=list(truth))
    assert res.residual <= 1e-12 * res.target_norm
    assert [c.omega_m for c in res.density.components] == sorted(c.omega_m for c in res.density.components)


def test_fit_flat_band():
    target = TargetSpectralDensity.from_family("flat", value=1e6, low=TWO_PI * 4e4, high=TWO_PI * 6e4)
    res = fit_spectral_density(target, 1, init=[LorentzianComponent(TWO_PI * 1e4, TWO_PI * 1e3, TWO_PI * 5e4)])
    assert res.residual > 0
    assert res.density.components[0].kappa > TWO_PI * 1e3
    h = np.asarray(res.history)
    assert np.all(np.diff(h) <= 1e-12 * h[0])
    assert fit_objective(res.density, target, res.grid) == pytest.approx(res.residual, rel=1e-10)


def test_fit_deterministic_multistart():
    truth = (LorentzianComponent(TWO_PI * 3e4, TWO_PI * 2e3, TWO_PI * 6e4),)
    target = TargetSpectralDensity.from_family("lorentzian", components=truth)
    a = fit_spectral_density(target, 1, n_restarts=4, seed=3)
    b = fit_spectral_density(target, 1, n_restarts=4, seed=3)
    assert a.density == b.density and a.restart == b.restart


def test_fit_rejects_bad_count():
    target = TargetSpectralDensity.from_family("flat", value=1.0, low=0.0, high=1.0)
    with pytest.raises(ParameterError):
        fit_spectral_density(target, 0)
