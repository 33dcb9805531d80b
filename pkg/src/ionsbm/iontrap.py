"""Trapped-ion parameters for the spin-boson simulator.

Covers the axial modes of a two-ion mixed-species crystal, Lamb-Dicke factors,
the spin-motion coupling produced by an optical dipole force, far-detuned
Raman effective couplings and scattering, and the validity checks of the
model. Frequencies are angular (rad/s), masses in atomic mass units, lengths
in metres. Ion 0 is the coolant, ion 1 carries the spin.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import constants

from .errors import ParameterError

AMU = constants.atomic_mass
HBAR = constants.hbar

PASS_BELOW = 0.05
WARN_BELOW = 0.2


@dataclass(frozen=True)
class TwoIonCrystal:
    mass_1: float
    mass_2: float
    omega_com_ref: float
    mass_ref: float | None = None

    def __post_init__(self):
        if self.mass_ref is None:
            object.__setattr__(self, "mass_ref", self.mass_1)
        for name in ("mass_1", "mass_2", "omega_com_ref", "mass_ref"):
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0")

    @property
    def masses(self) -> np.ndarray:
        return np.array([self.mass_1, self.mass_2], dtype=float)


@dataclass(frozen=True)
class AxialModes:
    omega_1: float
    omega_2: float
    amplitudes: np.ndarray = field(repr=False)
    masses: tuple = (None, None)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([self.omega_1, self.omega_2])


@dataclass(frozen=True)
class RamanLasers:
    wavelength: float
    geometry_angle: float
    omega_odf: float = 0.0
    detuning_delta_m: float = 0.0
    big_detuning: float = np.inf
    gamma: float = 0.0
    rabi_0: float = 0.0

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ParameterError("wavelength must be > 0")
        if not 0 <= self.geometry_angle <= np.pi:
            raise ParameterError("geometry_angle must lie in [0, pi]")
        for name in ("omega_odf", "detuning_delta_m", "big_detuning", "gamma", "rabi_0"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if self.gamma > 0 and np.isfinite(self.big_detuning) and self.gamma / self.big_detuning > PASS_BELOW:
            warnings.warn(f"Raman detuning is only {self.big_detuning / self.gamma:.3g} linewidths",
                          stacklevel=2)

    @property
    def k_eff(self) -> float:
        """``|k_1 - k_2|`` for two beams of equal wavelength crossing at ``geometry_angle``."""
        return 2.0 * (2.0 * np.pi / self.wavelength) * np.sin(0.5 * self.geometry_angle)


def axial_normal_modes(crystal: TwoIonCrystal) -> AxialModes:
    """Axial modes of two singly charged ions in a common harmonic well.

    The trap spring constant ``k = m_ref * omega_ref**2`` is shared by both
    ions; at the equilibrium spacing the Coulomb curvature also equals ``k``,
    giving the stiffness matrix ``k [[2, -1], [-1, 2]]``. Mode vectors are
    mass weighted, orthonormal and signed so the first ion's entry is positive.
    """
    k = crystal.mass_ref * crystal.omega_com_ref ** 2
    stiff = k * np.array([[2.0, -1.0], [-1.0, 2.0]])
    w = 1.0 / np.sqrt(crystal.masses)
    dyn = stiff * np.outer(w, w)
    ev, vecs = np.linalg.eigh(dyn)
    vecs = vecs * np.where(vecs[0] < 0, -1.0, 1.0)
    om = np.sqrt(ev)
    return AxialModes(float(om[0]), float(om[1]), vecs, (crystal.mass_1, crystal.mass_2))


def lamb_dicke(modes: AxialModes, lasers: RamanLasers, ion_index=1, ion_mass=None) -> np.ndarray:
    """``eta_n = sqrt(hbar / (2 m omega_n)) |M_{ion, n}| |k_L|`` for both modes.

    The sign of the mode amplitude is left to the laser phase.
    """
    if ion_mass is None:
        ion_mass = modes.masses[ion_index]
    if ion_mass is None or not ion_mass > 0:
        raise ParameterError("ion_mass (amu) must be given and > 0")
    m = ion_mass * AMU
    x0 = np.sqrt(HBAR / (2.0 * m * modes.frequencies))
    return x0 * np.abs(modes.amplitudes[ion_index]) * lasers.k_eff


def spin_motion_coupling(eta, omega_odf):
    """``lambda = eta * Omega_odf`` with the laser phase chosen to make it real."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0) or np.any(np.asarray(omega_odf) < 0):
        raise ParameterError("eta and omega_odf must be >= 0")
    out = eta * omega_odf
    return float(out) if out.ndim == 0 else out


def _table(rabi, detunings, big_detuning):
    rabi = np.asarray(rabi, dtype=complex)
    if rabi.ndim != 2 or rabi.shape[1] != 2:
        raise ParameterError("Rabi table must have shape (n_beams, 2) with columns (up, down)")
    if detunings is None:
        if big_detuning is None:
            raise ParameterError("give a detuning table or the scalar Raman detuning")
        detunings = np.full(rabi.shape, float(big_detuning))
    detunings = np.broadcast_to(np.asarray(detunings, dtype=float), rabi.shape)
    if np.any(detunings == 0):
        raise ParameterError("detunings must be nonzero")
    return rabi, detunings


@dataclass
class EffectiveRabi:
    raman: np.ndarray
    omega_s: np.ndarray
    omega_odf: complex
    omega_rw: complex
    stark: np.ndarray


def effective_rabi_frequencies(rabi, gamma, detunings=None, big_detuning=None) -> EffectiveRabi:
    """Couplings of the ground-state manifold after eliminating the excited state.

    Parameters
    ----------
    rabi : (n_beams, 2) complex
        ``Omega_{l,s}`` with ``s = 0`` for up and ``1`` for down. The dipole
        force terms need exactly two beams.
    gamma : excited-state linewidth (rad/s), ``>= 0``.
    detunings : (n_beams, 2), optional
        ``delta_{l,s}``; defaults to ``big_detuning`` everywhere.

    Returns
    -------
    EffectiveRabi
        ``raman[l', l]`` stimulated-Raman couplings, ``omega_s`` for (up,
        down), the combinations ``omega_odf``, ``omega_rw`` and the light
        shifts ``stark`` (rad/s, energy over hbar).
    """
    if gamma < 0:
        raise ParameterError("gamma must be >= 0")
    rabi, dt = _table(rabi, detunings, big_detuning)
    up, dn = 0, 1
    g = 1j * gamma
    raman = -(np.conj(rabi[None, :, up]) * rabi[:, None, dn] * (dt[:, None, dn] + dt[None, :, up])
              / ((2 * dt[:, None, dn] - g) * (2 * dt[None, :, up] + g)))
    if rabi.shape[0] != 2:
        raise ParameterError("the dipole-force couplings are defined for two beams")
    omega_s = -(np.conj(rabi[0]) * rabi[1] * (dt[1] + dt[0]) / ((2 * dt[1] - g) * (2 * dt[0] + g)))
    omega_odf = 0.5 * (np.conj(omega_s[up]) - np.conj(omega_s[dn]))
    omega_rw = 0.5 * (np.conj(omega_s[up]) + np.conj(omega_s[dn]))
    stark = -np.sum(np.abs(rabi) ** 2 * dt / (4 * dt ** 2 + gamma ** 2), axis=0)
    return EffectiveRabi(raman, omega_s, complex(omega_odf), complex(omega_rw), stark)


@dataclass
class ScatteringRates:
    coefficients: dict
    rates: dict
    gamma_eff: float


def scattering_rates(rabi, big_detuning, gamma_up, gamma_down, rabi_0=None) -> ScatteringRates:
    """Rayleigh and Raman scattering operators with all detunings set to ``big_detuning``.

    ``coefficients`` are the prefactors of the jump operators ``L_uu ~ sz``,
    ``L_dd ~ sz``, ``L_ud ~ s+`` and ``L_du ~ s-``; ``rates`` their squares.
    ``gamma_eff = Gamma * Omega_0**2 / (2 Delta_R**2)`` with ``Omega_0`` the
    mean beam Rabi modulus unless given.
    """
    gamma = gamma_up + gamma_down
    if not gamma > 0 or gamma_up < 0 or gamma_down < 0:
        raise ParameterError("branching rates must be >= 0 with a positive sum")
    if not big_detuning > 0:
        raise ParameterError("big_detuning must be > 0")
    rabi = np.asarray(rabi, dtype=complex)
    s_up = np.sum(np.abs(rabi[:, 0]) ** 2) / (4 * big_detuning ** 2)
    s_dn = np.sum(np.abs(rabi[:, 1]) ** 2) / (4 * big_detuning ** 2)
    coeff = {
        "uu": 0.5 * np.sqrt(gamma_up * s_up),
        "dd": 0.5 * np.sqrt(gamma_down * s_dn),
        "ud": np.sqrt(gamma_up * s_dn),
        "du": np.sqrt(gamma_down * s_up),
    }
    if rabi_0 is None:
        rabi_0 = float(np.mean(np.abs(rabi))) if rabi.size else 0.0
    omega_l = rabi_0 ** 2 / (2 * big_detuning)
    return ScatteringRates(coeff, {k: v ** 2 for k, v in coeff.items()}, gamma * omega_l / big_detuning)


@dataclass
class RegimeEntry:
    name: str
    ratio: float
    status: str


@dataclass
class RegimeReport:
    entries: list

    @property
    def worst(self) -> str:
        order = {"pass": 0, "warn": 1, "fail": 2}
        return max((e.status for e in self.entries), key=order.get, default="pass")

    def failures(self):
        return [e for e in self.entries if e.status == "fail"]

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


def classify(ratio) -> str:
    if not np.isfinite(ratio):
        return "fail"
    if ratio < PASS_BELOW:
        return "pass"
    if ratio < WARN_BELOW:
        return "warn"
    return "fail"


def regime_check(omega_m, kappa, *, nbar=None, hbar_beta=None, omega_1=None, omega_L=None,
                 eta_1=None, omega_odf=None) -> RegimeReport:
    """Ratios that must be small for the damped-mode and rotating-wave pictures.

    ``kappa/omega_m``, ``kappa/nu_1`` (``= kappa hbar_beta / 2 pi``),
    ``hbar_beta kappa`` and, when the laser quantities are given,
    ``Omega_odf / 2 omega_L`` and ``eta_1 Omega_odf / |omega_1 - omega_L|``.
    """
    if not (omega_m > 0 and kappa >= 0):
        raise ParameterError("omega_m must be > 0 and kappa >= 0")
    if hbar_beta is None and nbar is not None:
        hbar_beta = np.log1p(1.0 / nbar) / omega_m if nbar > 0 else np.inf
    ratios = [("kappa/omega_m", kappa / omega_m)]
    if hbar_beta is not None:
        ratios.append(("kappa/nu_1", kappa * hbar_beta / (2.0 * np.pi)))
        ratios.append(("hbar_beta*kappa", kappa * hbar_beta))
    if omega_odf is not None and omega_L is not None:
        ratios.append(("omega_odf/(2 omega_L)", omega_odf / (2.0 * omega_L)))
        if eta_1 is not None and omega_1 is not None:
            gap = abs(omega_1 - omega_L)
            ratios.append(("eta_1*omega_odf/|omega_1-omega_L|", eta_1 * omega_odf / gap if gap > 0 else np.inf))
    return RegimeReport([RegimeEntry(n, float(r), classify(r)) for n, r in ratios])
