"""Reservoir correlation functions of a single damped mode.

Two closed forms are compared here: the exact finite-temperature result for
an oscillator damped by an Ohmic bath (``l_ohmic``, with a truncated Matsubara
series) and the quantum-regression result for the Lindblad-damped oscillator
(``l_lindblad``). Both are returned as complex arrays ``L' + i L''`` in units
of rad^2/s^2; times are in seconds and ``hbar_beta`` is ``hbar/(k_B T)`` in
seconds.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import kernels
from .errors import ParameterError, QuadratureError

DEFAULT_MATSUBARA = 10_000


def nbar_to_hbar_beta(nbar, omega):
    """``hbar*beta = ln(1 + 1/nbar) / omega`` for a mode of angular frequency ``omega``."""
    nbar = np.asarray(nbar, dtype=float)
    if np.any(nbar <= 0):
        raise ParameterError("nbar must be > 0 (nbar = 0 means infinite beta)")
    if omega <= 0:
        raise ParameterError("omega must be > 0")
    out = np.log1p(1.0 / nbar) / omega
    return float(out) if out.ndim == 0 else out


def hbar_beta_to_nbar(hbar_beta, omega):
    """Bose occupation ``1/(exp(hbar*beta*omega) - 1)``."""
    if np.any(np.asarray(hbar_beta) <= 0) or omega <= 0:
        raise ParameterError("hbar_beta and omega must be > 0")
    out = 1.0 / np.expm1(np.asarray(hbar_beta, dtype=float) * omega)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BathParams:
    omega_m: float
    kappa: float
    hbar_beta: float
    lam: float = 1.0
    n_matsubara: int = DEFAULT_MATSUBARA

    def __post_init__(self):
        if not (self.omega_m > 0 and self.kappa > 0):
            raise ParameterError("omega_m and kappa must be > 0")
        if not self.kappa < self.omega_m:
            raise ParameterError("underdamped regime requires kappa < omega_m")
        if not self.hbar_beta > 0:
            raise ParameterError("hbar_beta must be > 0")
        if self.n_matsubara < 1:
            raise ParameterError("n_matsubara must be >= 1")
        if self.lam < 0:
            raise ParameterError("lam must be >= 0")

    @classmethod
    def from_nbar(cls, omega_m, kappa, nbar, lam=1.0, n_matsubara=DEFAULT_MATSUBARA):
        return cls(omega_m, kappa, nbar_to_hbar_beta(nbar, omega_m), lam, n_matsubara)

    @property
    def free_frequency(self) -> float:
        return float(np.hypot(self.omega_m, self.kappa))

    @property
    def nbar(self) -> float:
        return hbar_beta_to_nbar(self.hbar_beta, self.omega_m)

    def matsubara(self, n=None) -> np.ndarray:
        """First ``n`` (default ``n_matsubara``) Matsubara frequencies ``2 pi k / hbar_beta``."""
        n = self.n_matsubara if n is None else n
        return 2.0 * np.pi * np.arange(1, n + 1) / self.hbar_beta

    def kappa_over_nu1(self) -> float:
        """``kappa * hbar_beta / (2 pi)``; must be << 1 for the Lindblad picture."""
        return self.kappa * self.hbar_beta / (2.0 * np.pi)


def _denominator(p: BathParams, nu):
    om2 = p.omega_m ** 2 + p.kappa ** 2
    return (om2 + nu ** 2) ** 2 - 4.0 * p.kappa ** 2 * nu ** 2


def l_ohmic_parts(p: BathParams, t, n_matsubara=None):
    """Return ``(L1, L2, L'')`` of the Ohmic-damped oscillator at times ``t``."""
    t = np.asarray(t, dtype=float)
    at = np.abs(t)
    x = p.hbar_beta * p.omega_m
    y = p.hbar_beta * p.kappa
    den = np.cosh(x) - np.cos(y)
    damp = np.exp(-p.kappa * at)
    lam2 = p.lam ** 2
    l1 = lam2 * (np.sinh(x) / den * np.cos(p.omega_m * t)
                 + np.sin(y) / den * np.sin(p.omega_m * at)) * damp
    nu = p.matsubara(n_matsubara)
    w = nu / _denominator(p, nu)
    pref = -lam2 * 8.0 * p.kappa * p.omega_m / p.hbar_beta
    l2 = pref * kernels.matsubara_weighted_sum(at, nu, w).reshape(at.shape)
    limag = -lam2 * np.sin(p.omega_m * t) * damp
    return l1, l2, limag


def l_ohmic(p: BathParams, t, n_matsubara=None):
    """Correlation function of a mode damped by an Ohmic oscillator bath."""
    l1, l2, limag = l_ohmic_parts(p, t, n_matsubara)
    return (l1 + l2) + 1j * limag


def l_lindblad(p: BathParams, t):
    """Regression-theorem correlation function of the Lindblad-damped mode."""
    t = np.asarray(t, dtype=float)
    damp = np.exp(-p.kappa * np.abs(t))
    coth = 1.0 / np.tanh(0.5 * p.hbar_beta * p.omega_m)
    lam2 = p.lam ** 2
    return lam2 * coth * np.cos(p.omega_m * t) * damp - 1j * lam2 * np.sin(p.omega_m * t) * damp


def distance_d(p: BathParams, n_matsubara=None) -> float:
    """``|int_0^inf (L - L_L) dt| / lam^2`` in closed form (units: seconds).

    The imaginary parts coincide, so only the real parts contribute.
    """
    x = p.hbar_beta * p.omega_m
    y = p.hbar_beta * p.kappa
    den = np.cosh(x) - np.cos(y)
    c_q = np.sinh(x) / den - 1.0 / np.tanh(0.5 * x)
    c_cl = np.sin(y) / den
    s2 = p.kappa ** 2 + p.omega_m ** 2
    nu = p.matsubara(n_matsubara)
    tail = np.sum(1.0 / _denominator(p, nu))
    d = c_q * p.kappa / s2 + c_cl * p.omega_m / s2 - 8.0 * p.kappa * p.omega_m / p.hbar_beta * tail
    return float(abs(d))


# --------------------------------------------------------------------------- Fourier route

def _coth_weighted(J, hbar_beta, small):
    """``omega -> J(omega) * coth(hbar_beta*omega/2)`` with the removable point at 0."""

    def f(omega):
        if omega < small:
            # J(w) coth(hb w / 2) -> (2/hb) J(w)/w (1 + (hb w)^2/12) as w -> 0
            w = max(omega, small * 1e-3)
            return 2.0 / hbar_beta * float(J(w)) / w * (1.0 + (hbar_beta * w) ** 2 / 12.0)
        return float(J(omega)) / np.tanh(0.5 * hbar_beta * omega)

    return f


def _quad(f, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            return integrate.quad(f, a, b, **kw)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(None, None, f"quadrature did not converge: {exc}") from None


def _default_cut(J):
    comps = getattr(J, "components", None)
    if comps is None and getattr(J, "kind", None) == "lorentzian":
        comps = J.params["components"]
    if comps:
        return max(c.omega_m + 50.0 * c.kappa for c in comps), sorted(
            {x for c in comps for x in (c.omega_m - 5 * c.kappa, c.omega_m, c.omega_m + 5 * c.kappa)}
        )
    if getattr(J, "kind", None) == "tabulated":
        return float(J.omega[-1]), list(J.omega[1:-1][:: max(1, len(J.omega) // 50)])
    upper = J.support_max() if hasattr(J, "support_max") else None
    if upper is None:
        raise ParameterError("omega_cut is required for this spectral density")
    return upper, []


def l_from_spectral_density(J, hbar_beta, t, *, omega_cut=None, points=None,
                            rtol=1e-8, tail=None, limit=2000):
    """Evaluate ``(1/pi) int_0^inf J(w) [coth(hb w/2) cos(wt) - i sin(wt)] dw``.

    The integral is split at ``omega_cut`` (default ``max(omega_m + 50 kappa)``
    for Lorentzian inputs). ``[0, omega_cut]`` is done adaptively with
    breakpoints at the resonances; the remainder ``[omega_cut, inf)`` uses the
    Fourier-weighted semi-infinite rule unless ``tail=False`` or ``J`` is
    tabulated (zero beyond its last sample).

    Raises
    ------
    QuadratureError
        If any piece fails to converge or its error estimate exceeds the
        requested tolerance.
    """
    if not hbar_beta > 0:
        raise ParameterError("hbar_beta must be > 0")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    cut, default_points = _default_cut(J) if omega_cut is None else (omega_cut, [])
    pts = [x for x in (points if points is not None else default_points) if 0 < x < cut]
    if tail is None:
        tail = getattr(J, "kind", None) != "tabulated"
    small = 1e-6 * (min(pts) if pts else cut)
    fc = _coth_weighted(J, hbar_beta, small)

    def fs(omega):
        return float(J(omega))

    out = np.empty(t_arr.shape, dtype=complex)
    for idx, ti in np.ndenumerate(t_arr):
        parts = []
        for g, trig in ((fc, np.cos), (fs, np.sin)):
            val, err = _quad(lambda w: g(w) * trig(w * ti), 0.0, cut,
                             points=pts or None, limit=limit, epsabs=0.0, epsrel=rtol)
            if tail:
                if ti == 0.0:
                    if trig is np.sin:
                        tv, te = 0.0, 0.0
                    else:
                        # omega = cut/u maps the tail onto (0, 1]
                        tv, te = _quad(lambda u: g(cut / u) * cut / (u * u) if u > 0 else 0.0,
                                       0.0, 1.0, limit=limit, epsabs=0.0, epsrel=rtol)
                else:
                    # the semi-infinite Fourier rule only honours an absolute tolerance
                    tv, te = _quad(g, cut, np.inf, weight="cos" if trig is np.cos else "sin",
                                   wvar=abs(ti), limlst=200, limit=limit,
                                   epsabs=rtol * max(abs(val), 1e-300))
                    if trig is np.sin and ti < 0:
                        tv = -tv
                val += tv
                err += te
            scale = max(abs(val), 1e-300)
            if err > max(10.0 * rtol * scale, 1e-14 * _abs_scale(g, cut)):
                raise QuadratureError(val, err)
            parts.append(val)
        out[idx] = (parts[0] - 1j * parts[1]) / np.pi
    return out.reshape(np.shape(t)) if np.ndim(t) else complex(out[0])


def _abs_scale(g, cut):
    probe = np.linspace(cut * 1e-3, cut, 64)
    return max(abs(g(w)) for w in probe) * cut
