import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from conftest import HBAR_BETA, KAPPA, LAM, NBAR, OMEGA_M, TWO_PI
from ionsbm.correlation import (
    BathParams,
    distance_d,
    hbar_beta_to_nbar,
    l_from_spectral_density,
    l_lindblad,
    l_ohmic,
    l_ohmic_parts,
    nbar_to_hbar_beta,
)
from ionsbm.errors import ParameterError
from ionsbm.spectral import CompositeSpectralDensity, LorentzianComponent, eval_regression_sd

P = BathParams(OMEGA_M, KAPPA, HBAR_BETA, lam=LAM)
P_NBAR = BathParams.from_nbar(OMEGA_M, KAPPA, NBAR)


def test_nbar_conversion_examples():
    assert nbar_to_hbar_beta(NBAR, OMEGA_M) == pytest.approx(5.91033350943976e-6, rel=1e-12)
    assert nbar_to_hbar_beta(1.0 / (np.e - 1.0), 1.0) == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(ParameterError):
        nbar_to_hbar_beta(0.0, OMEGA_M)


@given(st.floats(1e-3, 10.0), st.floats(1.0, 1e8))
def test_nbar_round_trip(nbar, omega):
    assert hbar_beta_to_nbar(nbar_to_hbar_beta(nbar, omega), omega) == pytest.approx(nbar, rel=1e-12)


def test_bath_validation():
    with pytest.raises(ParameterError):
        BathParams(OMEGA_M, OMEGA_M, HBAR_BETA)
    with pytest.raises(ParameterError):
        BathParams(OMEGA_M, KAPPA, -1.0)
    with pytest.raises(ParameterError):
        BathParams(OMEGA_M, KAPPA, HBAR_BETA, n_matsubara=0)


def test_l_ohmic_at_zero_golden():
    l1, l2, li = l_ohmic_parts(P_NBAR, 0.0)
    # partial sums from a 40-digit evaluation of the same series
    assert float(l1) == pytest.approx(1.04994203645334293, rel=1e-12)
    assert float(l2) == pytest.approx(-0.00404894437510852, rel=1e-9)
    assert float(li) == 0.0
    total = l_ohmic(P_NBAR, 0.0).real
    assert total == pytest.approx(1.04589309207823440, rel=1e-11)
    assert total > 1.05 * 0.99 and l2 < 0


def test_l_ohmic_undamped_limit():
    p = BathParams(OMEGA_M, 1e-6 * OMEGA_M, HBAR_BETA)
    t = np.linspace(0, 10 / OMEGA_M, 101)
    coth = 1 / np.tanh(0.5 * HBAR_BETA * OMEGA_M)
    ref = coth * np.cos(OMEGA_M * t)
    np.testing.assert_allclose(l_ohmic(p, t).real, ref, atol=1e-3 * coth)


def test_l_lindblad_examples():
    p = BathParams.from_nbar(OMEGA_M, KAPPA, NBAR, lam=LAM)
    assert l_lindblad(p, 0.0) == pytest.approx(LAM ** 2 * (2 * NBAR + 1), rel=1e-13)
    t = 1 / KAPPA
    ref = LAM ** 2 * 1.05 * np.cos(OMEGA_M / KAPPA) * np.exp(-1)
    assert l_lindblad(p, t).real == pytest.approx(ref, rel=1e-12)


@given(st.lists(st.floats(-1e-3, 1e-3), min_size=1, max_size=50))
def test_imaginary_parts_coincide(ts):
    t = np.array(ts)
    np.testing.assert_array_equal(l_ohmic(P, t).imag, l_lindblad(P, t).imag)


@given(st.floats(0.0, 2e-3))
def test_parity(t):
    for f in (l_ohmic, l_lindblad):
        a, b = f(P, t), f(P, -t)
        assert b.real == pytest.approx(a.real, rel=1e-12, abs=1e-12 * LAM ** 2)
        assert b.imag == pytest.approx(-a.imag, rel=1e-12, abs=1e-300)


def test_matsubara_truncation_convergence():
    t = 0.01 / OMEGA_M
    ns = [10, 20, 40, 80, 160, 320, 640]
    gaps = [abs(l_ohmic_parts(P, t, n)[1] - l_ohmic_parts(P, t, 2 * n)[1]) for n in ns]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_regime_agreement_window():
    t = np.linspace(0.1 / KAPPA, 5 / KAPPA, 3000)
    assert P.kappa_over_nu1() <= 0.01 and HBAR_BETA * KAPPA <= 0.05
    diff = np.abs(l_ohmic(P, t).real - l_lindblad(P, t).real) / LAM ** 2
    assert diff.max() <= 0.02


def test_kappa_over_nu1():
    assert P.kappa_over_nu1() == pytest.approx(KAPPA / P.matsubara(1)[0], rel=1e-15)
    assert P.kappa_over_nu1() == pytest.approx(7.3875e-3, rel=1e-3)


# Fourier route --------------------------------------------------------------

C = LorentzianComponent(LAM, KAPPA, OMEGA_M)


def test_fourier_zero_density():
    class Zero:
        def __call__(self, w):
            return 0.0 * np.asarray(w)

    assert l_from_spectral_density(Zero(), HBAR_BETA, 1e-5, omega_cut=4 * OMEGA_M, tail=False) == 0


def test_fourier_route_matches_closed_forms():
    s = CompositeSpectralDensity((C,))
    t = np.array([0.0, 0.2, 1.0, 5.0]) / OMEGA_M
    got = l_from_spectral_density(s, HBAR_BETA, t)
    ref = l_ohmic(P, t)
    np.testing.assert_allclose(got.imag, ref.imag, rtol=1e-4, atol=1e-10 * LAM ** 2)
    np.testing.assert_allclose(got.real, ref.real, rtol=1e-8)


def test_fourier_regression_weight_gives_lindblad_real_part():
    class Tilde:
        def __call__(self, w):
            return eval_regression_sd(C, HBAR_BETA, w)

        components = (C,)

    t = np.array([0.0, 0.3, 2.0]) / OMEGA_M
    got = l_from_spectral_density(Tilde(), HBAR_BETA, t)
    np.testing.assert_allclose(got.real, l_lindblad(P, t).real, rtol=1e-7)


def test_fourier_t0_consistency():
    s = CompositeSpectralDensity((C,))
    cut = OMEGA_M + 50 * KAPPA
    direct = integrate.quad(lambda w: float(s(w)) / np.tanh(0.5 * HBAR_BETA * w), 1e-9, cut,
                            points=[OMEGA_M], limit=500, epsrel=1e-10)[0] / np.pi
    got = l_from_spectral_density(s, HBAR_BETA, 0.0, tail=False)
    assert got.real == pytest.approx(direct, rel=1e-7)


# distance d ------------------------------------------------------------------

D_KAPPA = {0.5e3: 2.15674262291673e-10, 1.25e3: 5.36303314895356e-10,
           2.5e3: 1.05204286262842e-9, 5e3: 1.94033470659097e-9}
D_NBAR = {0.005: 5.08960004182650e-9, 0.025: 5.36303314895356e-10, 0.1: 9.30650309511215e-9,
          0.5: 3.26293859142502e-8, 1.0: 5.50963754589565e-8}


@pytest.mark.parametrize("kappa_hz, ref", sorted(D_KAPPA.items()))
def test_distance_golden_kappa(kappa_hz, ref):
    assert distance_d(BathParams.from_nbar(OMEGA_M, TWO_PI * kappa_hz, NBAR)) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("nbar, ref", sorted(D_NBAR.items()))
def test_distance_golden_nbar(nbar, ref):
    assert distance_d(BathParams.from_nbar(OMEGA_M, KAPPA, nbar)) == pytest.approx(ref, rel=1e-9)


def test_distance_small_kappa_vanishes():
    d = [distance_d(BathParams.from_nbar(OMEGA_M, k * OMEGA_M, NBAR)) for k in (1e-3, 1e-5, 1e-7)]
    # d is linear in kappa near zero
    assert d[0] > d[1] > d[2]
    assert d[2] == pytest.approx(1e-4 * d[0], rel=1e-3)


@pytest.mark.parametrize("kappa_hz, nbar", [(1.25e3, 0.025), (5e3, 0.025), (1.25e3, 0.5), (1.25e3, 0.005)])
def test_distance_time_integral_route(kappa_hz, nbar):
    """Integrate L' - L'_L over time numerically and compare with the closed form."""
    p = BathParams.from_nbar(OMEGA_M, TWO_PI * kappa_hz, nbar)

    def osc(t):
        return l_ohmic_parts(p, t, n_matsubara=1)[0] - l_lindblad(p, t).real

    period = TWO_PI / p.omega_m
    edges = np.arange(0.0, 60 / p.kappa + period, period)
    first = sum(integrate.quad(osc, a, b, epsabs=0, epsrel=1e-12)[0] for a, b in zip(edges[:-1], edges[1:]))
    # the Matsubara part decays on 1/nu_1; integrate it on a log grid
    u = np.linspace(np.log(1e-13), np.log(60 / p.matsubara(1)[0]), 6001)
    t = np.exp(u)
    l2 = l_ohmic_parts(p, t)[1]
    second = integrate.simpson(l2 * t, x=u) + l2[0] * t[0]
    assert abs(first + second) == pytest.approx(distance_d(p), rel=1e-9)
