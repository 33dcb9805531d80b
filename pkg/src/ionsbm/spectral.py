"""Effective spectral densities of damped harmonic modes.

All frequencies are angular (rad/s). A single damped mode of reduced frequency
``omega_m``, amplitude damping rate ``kappa`` and spin coupling ``lam`` yields
the two-Lorentzian difference

    J(w) = lam**2 * [kappa / (kappa**2 + (w - omega_m)**2)
                     - kappa / (kappa**2 + (w + omega_m)**2)]

and independent modes add. The temperature-weighted variant seen by the
regression-theorem correlation function is :func:`eval_regression_sd`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import FitError, ParameterError

log = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 2000
DEFAULT_RESTARTS = 8


@dataclass(frozen=True)
class LorentzianComponent:
    """One damped mode: coupling ``lam``, damping ``kappa``, frequency ``omega_m``."""

    lam: float
    kappa: float
    omega_m: float

    def __post_init__(self):
        for name in ("lam", "kappa", "omega_m"):
            if not np.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.lam < 0:
            raise ParameterError(f"lam must be >= 0, got {self.lam}")
        if self.kappa <= 0:
            raise ParameterError(f"kappa must be > 0, got {self.kappa}")
        if self.omega_m <= 0:
            raise ParameterError(f"omega_m must be > 0, got {self.omega_m}")
        if not self.kappa < self.omega_m:
            raise ParameterError(
                f"underdamped regime requires kappa < omega_m (kappa={self.kappa}, "
                f"omega_m={self.omega_m})"
            )

    @property
    def free_frequency(self) -> float:
        """Undamped frequency ``sqrt(omega_m**2 + kappa**2)``."""
        return float(np.hypot(self.omega_m, self.kappa))

    def __call__(self, omega):
        return eval_lorentzian(self, omega)


@dataclass(frozen=True)
class CompositeSpectralDensity:
    components: tuple[LorentzianComponent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))

    def __call__(self, omega):
        return eval_composite(self, omega)

    def __len__(self):
        return len(self.components)

    def sorted(self) -> "CompositeSpectralDensity":
        return CompositeSpectralDensity(tuple(sorted(self.components, key=lambda c: c.omega_m)))

    def max_frequency(self) -> float:
        return max((c.omega_m for c in self.components), default=0.0)


def _lorentz_pair(omega, kappa, omega_m, sign):
    omega = np.asarray(omega, dtype=float)
    k2 = kappa * kappa
    lo = k2 + (omega - omega_m) ** 2
    hi = k2 + (omega + omega_m) ** 2
    if sign < 0:
        # combined over a common denominator; the plain difference cancels for large omega
        return 4.0 * kappa * omega_m * omega / (lo * hi)
    return kappa / lo + kappa / hi


def eval_lorentzian(c: LorentzianComponent, omega):
    """Spectral density of a single damped mode (odd in ``omega``)."""
    return c.lam ** 2 * _lorentz_pair(omega, c.kappa, c.omega_m, -1.0)


def eval_composite(s: CompositeSpectralDensity, omega):
    omega = np.asarray(omega, dtype=float)
    total = np.zeros_like(omega)
    for c in s.components:
        total = total + eval_lorentzian(c, omega)
    return total


def eval_regression_sd(c: LorentzianComponent, hbar_beta: float, omega):
    """Effective density implied by the regression-theorem correlation function.

    ``lam**2 * coth(hb*omega_m/2)/coth(hb*omega/2) * [sum of Lorentzians]`` with
    ``hb = hbar*beta`` in seconds. The coth ratio is evaluated as a tanh ratio,
    which gives the correct limit 0 at ``omega = 0``.
    """
    if not hbar_beta > 0:
        raise ParameterError(f"hbar_beta must be > 0, got {hbar_beta}")
    omega = np.asarray(omega, dtype=float)
    ratio = np.tanh(0.5 * hbar_beta * omega) / np.tanh(0.5 * hbar_beta * c.omega_m)
    return c.lam ** 2 * ratio * _lorentz_pair(omega, c.kappa, c.omega_m, +1.0)


def eval_regression_composite(s: CompositeSpectralDensity, hbar_beta: float, omega):
    omega = np.asarray(omega, dtype=float)
    total = np.zeros_like(omega)
    for c in s.components:
        total = total + eval_regression_sd(c, hbar_beta, omega)
    return total


def relative_error_epsilon_j(c, hbar_beta: float, omega):
    """Pointwise ``|J_tilde - J| / J``.

    ``c`` may be a single component or a composite. Points where ``J`` vanishes
    (``omega = 0``) are undefined and come back as NaN.
    """
    if isinstance(c, LorentzianComponent):
        c = CompositeSpectralDensity((c,))
    omega = np.asarray(omega, dtype=float)
    j = eval_composite(c, omega)
    jt = eval_regression_composite(c, hbar_beta, omega)
    with np.errstate(divide="ignore", invalid="ignore"):
        eps = np.abs(jt - j) / np.abs(j)
    return np.where(j != 0.0, eps, np.nan)


def ohmic_slope(c: LorentzianComponent) -> float:
    """``dJ/domega`` at zero frequency: ``4 lam^2 kappa omega_m / (kappa^2 + omega_m^2)^2``."""
    return 4.0 * c.lam ** 2 * c.kappa * c.omega_m / (c.kappa ** 2 + c.omega_m ** 2) ** 2


# --------------------------------------------------------------------------- targets

_FAMILIES = {"lorentzian", "flat", "ohmic"}


@dataclass(frozen=True)
class TargetSpectralDensity:
    """Spectral density to approximate: a named closed form or tabulated samples.

    Families
    --------
    ``lorentzian``: ``components=[(lam, kappa, omega_m), ...]``
    ``flat``: ``value`` on ``[low, high]``, zero elsewhere
    ``ohmic``: ``alpha * omega**s * omega_c**(1-s) * exp(-omega/omega_c)``
    """

    kind: str
    params: dict = field(default_factory=dict)
    omega: np.ndarray | None = None
    values: np.ndarray | None = None

    @classmethod
    def from_samples(cls, omega, values) -> "TargetSpectralDensity":
        omega = np.asarray(omega, dtype=float)
        values = np.asarray(values, dtype=float)
        if omega.ndim != 1 or omega.shape != values.shape or omega.size < 2:
            raise ParameterError("tabulated target needs two equal-length 1-D arrays (>= 2 samples)")
        if np.any(np.diff(omega) <= 0):
            raise ParameterError("tabulated target frequencies must be strictly increasing")
        if np.any(values < 0):
            raise ParameterError("tabulated target values must be >= 0")
        return cls("tabulated", {}, omega, values)

    @classmethod
    def from_family(cls, name: str, **params) -> "TargetSpectralDensity":
        if name not in _FAMILIES:
            raise ParameterError(f"unknown target family {name!r}; known: {sorted(_FAMILIES)}")
        if name == "lorentzian":
            comps = tuple(
                c if isinstance(c, LorentzianComponent) else LorentzianComponent(*c)
                for c in params["components"]
            )
            params = {"components": comps}
        elif name == "flat":
            if not 0 <= params["low"] < params["high"] or params["value"] < 0:
                raise ParameterError("flat target needs 0 <= low < high and value >= 0")
        elif name == "ohmic":
            params.setdefault("s", 1.0)
            if params["alpha"] < 0 or params["omega_c"] <= 0:
                raise ParameterError("ohmic target needs alpha >= 0 and omega_c > 0")
        return cls(name, dict(params))

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        if self.kind == "tabulated":
            return np.interp(omega, self.omega, self.values, left=0.0, right=0.0)
        p = self.params
        if self.kind == "lorentzian":
            return eval_composite(CompositeSpectralDensity(p["components"]), omega)
        if self.kind == "flat":
            inside = (omega >= p["low"]) & (omega <= p["high"])
            return np.where(inside, float(p["value"]), 0.0)
        w = np.clip(omega, 0.0, None)
        return p["alpha"] * w ** p["s"] * p["omega_c"] ** (1 - p["s"]) * np.exp(-w / p["omega_c"])

    def support_max(self) -> float:
        """Upper end of the frequency range that carries the target."""
        if self.kind == "tabulated":
            return float(self.omega[-1])
        p = self.params
        if self.kind == "lorentzian":
            return 2.0 * max(c.omega_m for c in p["components"])
        if self.kind == "flat":
            return 2.0 * p["high"]
        return 10.0 * p["omega_c"]


# --------------------------------------------------------------------------- fitting

@dataclass
class FitResult:
    density: CompositeSpectralDensity
    residual: float
    """Trapezoidal ``int (J_t - J)^2 domega`` on the fit grid."""
    target_norm: float
    """Trapezoidal ``int J_t^2 domega`` on the same grid."""
    history: list[float]
    """Residual at every accepted iterate of the winning restart."""
    restart: int
    grid: np.ndarray = field(repr=False)

    @property
    def relative_residual(self) -> float:
        return self.residual / self.target_norm if self.target_norm > 0 else self.residual


def trapezoid_weights(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    w = np.zeros_like(grid)
    dx = np.diff(grid)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w


def fit_objective(density: CompositeSpectralDensity, target: Callable, grid) -> float:
    """Trapezoidal estimate of ``int |J_t - J|^2 domega`` over ``grid``."""
    grid = np.asarray(grid, dtype=float)
    diff = target(grid) - eval_composite(density, grid)
    return float(np.sum(trapezoid_weights(grid) * diff ** 2))


_R_MIN = 1e-8
_R_MAX = 1.0 - 1e-8


def _pack(components, scale):
    x = []
    for c in components:
        x += [c.lam / scale, c.kappa / c.omega_m, c.omega_m / scale]
    return np.array(x)


def _unpack(x, scale):
    out = []
    for lam, r, wm in np.asarray(x).reshape(-1, 3):
        wm_abs = wm * scale
        out.append(LorentzianComponent(abs(lam) * scale, r * wm_abs, wm_abs))
    return out


class _Model:
    """Weighted residuals and their analytic Jacobian in scaled parameters.

    Parameters per component are ``(lam/s, kappa/omega_m, omega_m/s)`` with
    ``s`` the grid scale, so box bounds encode ``0 < kappa < omega_m``.
    """

    def __init__(self, grid, target_values, scale):
        self.u = np.asarray(grid, dtype=float) / scale
        self.sw = np.sqrt(trapezoid_weights(self.u))
        self.jt = np.asarray(target_values, dtype=float) / scale
        self.norm = max(float(np.sum(self.sw ** 2 * self.jt ** 2)), np.finfo(float).tiny)
        self.rnorm = np.sqrt(self.norm)
        self.history: list[float] = []
        self._last = None

    def model(self, x):
        u = self.u
        out = np.zeros_like(u)
        for lam, r, wm in x.reshape(-1, 3):
            k = r * wm
            out += lam * lam * (k / (k * k + (u - wm) ** 2) - k / (k * k + (u + wm) ** 2))
        return out

    def residuals(self, x):
        res = self.sw * (self.model(x) - self.jt) / self.rnorm
        self._last = (x.copy(), res)
        return res

    def jacobian(self, x):
        # trf evaluates the Jacobian only at accepted iterates
        if self._last is not None and np.array_equal(self._last[0], x):
            res = self._last[1]
        else:
            res = self.residuals(x)
        self.history.append(float(np.dot(res, res)))
        u = self.u
        cols = []
        for lam, r, wm in x.reshape(-1, 3):
            k = r * wm
            dm, dp = u - wm, u + wm
            qm, qp = k * k + dm ** 2, k * k + dp ** 2
            shape = k / qm - k / qp
            dk = (dm ** 2 - k * k) / qm ** 2 - (dp ** 2 - k * k) / qp ** 2
            dw = 2 * k * dm / qm ** 2 + 2 * k * dp / qp ** 2
            cols += [2 * lam * shape, lam * lam * dk * wm, lam * lam * (dw + dk * r)]
        return (self.sw[:, None] * np.stack(cols, axis=1)) / self.rnorm


def _random_seed_components(rng, n, target_values, grid, spread):
    hi = grid[-1]
    lo = max(grid[0], hi * 1e-3)
    if spread:
        wms = lo + (hi - lo) * (np.arange(n) + 0.5) / n
    else:
        wms = np.sort(rng.uniform(lo, 0.95 * hi, size=n))
    out = []
    for wm in wms:
        r = 10 ** rng.uniform(-3, np.log10(0.3))
        k = r * wm
        jt = float(np.interp(wm, grid, target_values))
        lam = np.sqrt(max(jt, 1e-12 * max(target_values.max(), 1e-300)) * k)
        out.append(LorentzianComponent(lam, k, wm))
    return out


def fit_spectral_density(
    target,
    n_components: int,
    grid=None,
    init: Sequence[LorentzianComponent] | None = None,
    *,
    n_restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    max_nfev: int | None = None,
) -> FitResult:
    """Least-squares fit of a sum of damped-mode Lorentzians to ``target``.

    Parameters
    ----------
    target : callable
        ``TargetSpectralDensity`` or any vectorised ``J_t(omega)``.
    n_components : int
        Number of Lorentzian components.
    grid : array, optional
        Frequencies for the trapezoidal objective. Defaults to
        ``DEFAULT_GRID_POINTS`` points on ``[0, target.support_max()]``.
    init : sequence of LorentzianComponent, optional
        Starting point. Without it, ``n_restarts`` seeded starts are tried and
        the lowest residual wins (ties: lowest restart index).

    Returns
    -------
    FitResult
        Components sorted by ``omega_m``.

    Raises
    ------
    FitError
        If no start converged; ``best`` and ``residual`` hold the best attempt.
    """
    if n_components < 1:
        raise ParameterError("n_components must be >= 1")
    if grid is None:
        upper = target.support_max() if hasattr(target, "support_max") else None
        if init:
            upper = max(upper or 0.0, 2.0 * max(c.omega_m for c in init))
        if not upper:
            raise ParameterError("a grid is required when the target has no natural support")
        grid = np.linspace(0.0, upper, DEFAULT_GRID_POINTS)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3 or np.any(np.diff(grid) <= 0):
        raise ParameterError("grid must be a strictly increasing 1-D array with >= 3 points")
    target_values = np.asarray(target(grid), dtype=float)
    scale = float(grid[-1])

    if init is not None:
        init = list(init)
        if len(init) != n_components:
            raise ParameterError(f"init has {len(init)} components, expected {n_components}")
        starts = [init]
    else:
        rng = np.random.default_rng(seed)
        starts = [
            _random_seed_components(rng, n_components, target_values, grid, spread=(i == 0))
            for i in range(n_restarts)
        ]

    lower = np.tile([0.0, _R_MIN, 1e-9], n_components)
    upper = np.tile([np.inf, _R_MAX, np.inf], n_components)
    best = None
    for index, comps in enumerate(starts):
        model = _Model(grid, target_values, scale)
        x0 = np.clip(_pack(comps, scale), lower, np.nextafter(upper, 0))
        try:
            sol = least_squares(
                model.residuals, x0, jac=model.jacobian, bounds=(lower, upper),
                method="trf", x_scale="jac", ftol=1e-15, xtol=1e-15, gtol=1e-15,
                max_nfev=max_nfev or 200 * (3 * n_components + 1),
            )
        except (ValueError, FloatingPointError) as exc:  # pragma: no cover - defensive
            log.debug("restart %d failed: %s", index, exc)
            continue
        e_rel = float(np.dot(sol.fun, sol.fun))
        ok = sol.status > 0 and np.isfinite(e_rel)
        log.debug("restart %d: status=%d E/E0=%.3e", index, sol.status, e_rel)
        cand = (not ok, e_rel, index, sol.x, model)
        if best is None or cand[:3] < best[:3]:
            best = cand

    if best is None:
        raise FitError("all optimizer starts raised")
    failed, e_rel, index, x, model = best
    density = CompositeSpectralDensity(_unpack(x, scale)).sorted()
    norm_abs = model.norm * scale ** 3
    residual = fit_objective(density, target, grid)
    if failed:
        raise FitError("optimizer did not converge", best=density, residual=residual)
    return FitResult(
        density=density,
        residual=residual,
        target_norm=norm_abs,
        history=[h * norm_abs for h in model.history],
        restart=index,
        grid=grid,
    )
