"""Spin coupled to damped, truncated bosonic modes.

All generators are in angular-frequency units (``H/hbar``, rad/s) and times in
seconds. The spin is the first tensor factor with basis order (up, down), so
``sigma_z = diag(1, -1)``; the modes follow in the order given.

Density matrices are vectorized by column stacking, ``vec(rho)[i + D*j] =
rho[i, j]``. With this layout ``vec(A rho B) = (B^T kron A) vec(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import expm_multiply

from . import kernels
from .errors import CapExceededError, ParameterError, PropagationError

DEFAULT_MAX_DIM = 1024

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1j], [1j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

TRACE_TOL = 1e-10
HERM_TOL = 1e-11
POS_TOL = -1e-8
# generators up to this size step uniform grids with a dense one-step propagator
DENSE_STEP_MAX = 1024


@dataclass(frozen=True)
class SpinParams:
    """Bias ``epsilon/hbar`` and tunneling ``Delta`` (both rad/s)."""

    epsilon_over_hbar: float = 0.0
    delta_rabi: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.epsilon_over_hbar) and np.isfinite(self.delta_rabi)):
            raise ParameterError("spin parameters must be finite")

    @property
    def omega_d(self) -> float:
        """Drive amplitude of the ``sigma_x`` term, ``-Delta``."""
        return -self.delta_rabi


@dataclass(frozen=True)
class ModeSpec:
    omega_m: float
    lam: float
    kappa: float = 0.0
    nbar: float = 0.0
    n_max: int = 15

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ParameterError(f"n_max must be an integer >= 1, got {self.n_max}")
        if self.nbar < 0:
            raise ParameterError(f"nbar must be >= 0, got {self.nbar}")
        if self.kappa < 0:
            raise ParameterError(f"kappa must be >= 0, got {self.kappa}")
        if not (np.isfinite(self.omega_m) and np.isfinite(self.lam)):
            raise ParameterError("omega_m and lam must be finite")

    @property
    def levels(self) -> int:
        return int(self.n_max) + 1


@dataclass(frozen=True)
class SystemSpec:
    """Spin plus a list of modes.

    ``spin_dephasing`` attaches a pure-dephasing channel to the spin that
    damps coherences at that rate (rad/s). It is zero in every physical run
    and exists for Markovian reference dynamics.
    """

    spin: SpinParams
    modes: tuple = ()
    spin_dephasing: float = 0.0
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if self.spin_dephasing < 0:
            raise ParameterError("spin_dephasing must be >= 0")
        if self.dim > self.max_dim:
            raise CapExceededError(self.dim, self.max_dim, "Hilbert dimension")

    @property
    def mode_dims(self) -> tuple:
        return tuple(m.levels for m in self.modes)

    @property
    def env_dim(self) -> int:
        return int(np.prod(self.mode_dims, dtype=np.int64)) if self.modes else 1

    @property
    def dim(self) -> int:
        return 2 * self.env_dim

    def with_n_max(self, n_max) -> "SystemSpec":
        modes = tuple(ModeSpec(m.omega_m, m.lam, m.kappa, m.nbar, n_max) for m in self.modes)
        return SystemSpec(self.spin, modes, self.spin_dephasing, max(self.max_dim, 2 * (n_max + 1) ** len(modes)))


# --------------------------------------------------------------------------- operators

def destroy(levels: int):
    return sparse.diags(np.sqrt(np.arange(1, levels, dtype=float)), 1, format="csr", dtype=complex)


def _embed(spec: SystemSpec, spin_op=None, mode_ops=None):
    """Tensor ``spin_op`` (2x2) with per-mode operators ``{index: op}``."""
    factors = [sparse.csr_matrix(spin_op if spin_op is not None else np.eye(2), dtype=complex)]
    mode_ops = mode_ops or {}
    for k, d in enumerate(spec.mode_dims):
        factors.append(sparse.csr_matrix(mode_ops[k]) if k in mode_ops else sparse.identity(d, dtype=complex, format="csr"))
    out = factors[0]
    for f in factors[1:]:
        out = sparse.kron(out, f, format="csr")
    return out


def spin_operator(spec: SystemSpec, op) -> sparse.csr_matrix:
    """Embed a 2x2 spin operator in the full space."""
    return _embed(spec, spin_op=np.asarray(op, dtype=complex))


def mode_operator(spec: SystemSpec, index: int, op) -> sparse.csr_matrix:
    return _embed(spec, mode_ops={index: op})


def number_operator(spec: SystemSpec, index: int) -> sparse.csr_matrix:
    a = destroy(spec.mode_dims[index])
    return mode_operator(spec, index, a.conj().T @ a)


def build_hamiltonian(spec: SystemSpec) -> sparse.csr_matrix:
    """``H/hbar = (delta/2) sz + (Omega_d/2) sx + sum_k [-(lam_k/2)(a_k + a_k^dag) sz + omega_k a_k^dag a_k]``."""
    sp = spec.spin
    h = spin_operator(spec, 0.5 * sp.epsilon_over_hbar * SIGMA_Z + 0.5 * sp.omega_d * SIGMA_X)
    for k, m in enumerate(spec.modes):
        a = destroy(m.levels)
        x = a + a.conj().T
        h = h + _embed(spec, spin_op=-0.5 * m.lam * SIGMA_Z, mode_ops={k: x})
        h = h + m.omega_m * mode_operator(spec, k, a.conj().T @ a)
    return h.tocsr()


def _left(a, dim):
    return sparse.kron(sparse.identity(dim, dtype=complex), a, format="csr")


def _right(b, dim):
    # rho -> rho b
    return sparse.kron(b.T, sparse.identity(dim, dtype=complex), format="csr")


def _lindblad_term(op, rate, dim):
    """``rate * (2 A rho A^dag - A^dag A rho - rho A^dag A)`` as a superoperator."""
    op = sparse.csr_matrix(op)
    ad_a = (op.conj().T @ op).tocsr()
    sandwich = sparse.kron(op.conj(), op, format="csr")
    return rate * (2.0 * sandwich - _left(ad_a, dim) - _right(ad_a, dim))


def build_dissipator(index: int, spec: SystemSpec) -> sparse.csr_matrix:
    """Thermal damping of mode ``index`` acting on the full vectorized state.

    ``kappa (n+1) (2 a rho a^dag - a^dag a rho - rho a^dag a)
    + kappa n (2 a^dag rho a - a a^dag rho - rho a a^dag)``
    """
    m = spec.modes[index]
    dim = spec.dim
    if m.kappa == 0.0:
        return sparse.csr_matrix((dim * dim, dim * dim), dtype=complex)
    a = mode_operator(spec, index, destroy(m.levels))
    out = _lindblad_term(a, m.kappa * (m.nbar + 1.0), dim)
    if m.nbar > 0:
        out = out + _lindblad_term(a.conj().T, m.kappa * m.nbar, dim)
    return out.tocsr()


def liouvillian(spec: SystemSpec) -> sparse.csr_matrix:
    """Generator ``L`` of ``d vec(rho)/dt = L vec(rho)``."""
    dim = spec.dim
    h = build_hamiltonian(spec)
    gen = -1j * (_left(h, dim) - _right(h, dim))
    for k in range(len(spec.modes)):
        gen = gen + build_dissipator(k, spec)
    if spec.spin_dephasing > 0:
        gen = gen + _lindblad_term(spin_operator(spec, SIGMA_Z), 0.25 * spec.spin_dephasing, dim)
    return gen.tocsr()


# --------------------------------------------------------------------------- states

def thermal_state(nbar: float, n_max: int) -> np.ndarray:
    """Truncated Bose-Einstein state, renormalized to unit trace."""
    if nbar < 0:
        raise ParameterError("nbar must be >= 0")
    p = np.zeros(n_max + 1)
    if nbar == 0:
        p[0] = 1.0
    else:
        p = (nbar / (nbar + 1.0)) ** np.arange(n_max + 1)
        p /= p.sum()
    return np.diag(p).astype(complex)


_SPIN_KETS = {
    "up": np.array([1.0, 0.0], dtype=complex),
    "down": np.array([0.0, 1.0], dtype=complex),
    "plus_x": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),
    "minus_x": np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0),
    "plus_y": np.array([1.0, 1j], dtype=complex) / np.sqrt(2.0),
    "minus_y": np.array([1.0, -1j], dtype=complex) / np.sqrt(2.0),
}

SPIN_TAGS = tuple(_SPIN_KETS)


def spin_state(tag: str) -> np.ndarray:
    try:
        k = _SPIN_KETS[tag]
    except KeyError:
        raise ParameterError(f"unknown spin state {tag!r}; expected one of {SPIN_TAGS}") from None
    return np.outer(k, k.conj())


def environment_state(spec: SystemSpec) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in spec.modes:
        out = np.kron(out, thermal_state(m.nbar, m.n_max))
    return out


def initial_state(spec: SystemSpec, rho0) -> np.ndarray:
    """Full density matrix from a spin tag, a 2x2 spin matrix or a full matrix.

    Spin inputs are tensored with the thermal states of all modes.
    """
    if isinstance(rho0, str):
        rho0 = spin_state(rho0)
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape == (2, 2) and spec.dim != 2:
        return np.kron(rho0, environment_state(spec))
    if rho0.shape != (spec.dim, spec.dim):
        raise ParameterError(f"initial state has shape {rho0.shape}, system dimension is {spec.dim}")
    return rho0


def vec(rho) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v, dim) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


# --------------------------------------------------------------------------- propagation

def _is_uniform(times) -> bool:
    if times.size < 3:
        return True
    dt = np.diff(times)
    return bool(np.allclose(dt, dt[0], rtol=1e-10, atol=0.0))


def propagate_blocks(gen, v0, times, chunk=256):
    """Yield ``(start, block)`` with ``block[q] = exp(times[start+q] L) v0``.

    ``v0`` is (n,) or (n, k). Uniform grids use a dense one-step propagator
    when the generator is small, otherwise chunks of the multi-point
    exponential action; other grids step one interval at a time. ``times``
    must start at 0 and be non-decreasing.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ParameterError("times must be a non-empty 1-d grid")
    if times[0] != 0.0 or np.any(np.diff(times) < 0):
        raise ParameterError("times must start at 0 and be non-decreasing")
    cur = np.asarray(v0, dtype=complex)
    yield 0, cur[None]
    n_pts = times.size
    idx = 0
    uniform = _is_uniform(times)
    if uniform and n_pts > 2 and gen.shape[0] <= DENSE_STEP_MAX:
        # the exponential action leaves ~1e-14 error per chunk, enough to fake
        # divisibility breaking in reconstructed maps
        dt = times[1] - times[0]
        try:
            step = linalg.expm(dt * (gen.toarray() if sparse.issparse(gen) else np.asarray(gen)))
        except Exception as exc:
            raise PropagationError(1, str(exc)) from exc
        while idx < n_pts - 1:
            n = min(chunk, n_pts - 1 - idx)
            block = np.empty((n,) + cur.shape, dtype=complex)
            for q in range(n):
                cur = step @ cur
                block[q] = cur
            bad = ~np.isfinite(block).reshape(n, -1).all(axis=1)
            if bad.any():
                raise PropagationError(idx + 1 + int(np.argmax(bad)), "non-finite state")
            yield idx + 1, block
            idx += n
        return
    while idx < n_pts - 1:
        if uniform:
            n = min(chunk, n_pts - 1 - idx)
            span = times[idx + n] - times[idx]
            try:
                block = expm_multiply(gen, cur, start=0.0, stop=span, num=n + 1, endpoint=True)[1:]
            except Exception as exc:  # scipy raises a mix of types
                raise PropagationError(idx + 1, str(exc)) from exc
        else:
            n = 1
            dt = times[idx + 1] - times[idx]
            try:
                block = (expm_multiply(dt * gen, cur) if dt > 0 else cur.copy())[None]
            except Exception as exc:
                raise PropagationError(idx + 1, str(exc)) from exc
        bad = ~np.isfinite(block).reshape(block.shape[0], -1).all(axis=1)
        if bad.any():
            raise PropagationError(idx + 1 + int(np.argmax(bad)), "non-finite state")
        yield idx + 1, block
        cur = block[-1]
        idx += n


def state_diagnostics(rho):
    """``(trace error, hermiticity error, minimum eigenvalue)`` of a stack of states."""
    rho = np.asarray(rho)
    tr = np.trace(rho, axis1=-2, axis2=-1)
    herm = np.abs(rho - rho.conj().swapaxes(-1, -2)).max(axis=(-2, -1))
    ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().swapaxes(-1, -2)))
    return np.abs(tr - 1.0), herm, ev[..., 0]


def check_states(rho, start=0):
    tr, herm, mn = state_diagnostics(rho)
    for name, arr, bad in (("trace", tr, tr > TRACE_TOL), ("hermiticity", herm, herm > HERM_TOL),
                           ("positivity", mn, mn < POS_TOL)):
        if bad.any():
            i = int(np.argmax(bad))
            raise PropagationError(start + i, f"{name} violated ({arr[i]:.3e})")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray = field(repr=False)

    def expect(self, op) -> np.ndarray:
        return np.array([expect(op, r) for r in self.states])


def evolve(spec: SystemSpec, rho0, times, *, check=True, gen=None) -> Trajectory:
    """Density matrices at every point of ``times``.

    Raises
    ------
    PropagationError
        If the exponential action fails or, with ``check``, a state breaks
        the trace/Hermiticity/positivity tolerances. The step index is
        reported.
    """
    rho0 = initial_state(spec, rho0)
    dim = spec.dim
    gen = liouvillian(spec) if gen is None else gen
    times = np.asarray(times, dtype=float)
    out = np.empty((times.size, dim, dim), dtype=complex)
    for start, block in propagate_blocks(gen, vec(rho0), times):
        states = block.reshape(-1, dim, dim).swapaxes(-1, -2)
        if check:
            check_states(states, start)
        out[start:start + len(states)] = states
    return Trajectory(times, out)


def expect(op, rho) -> float:
    """``Tr(O rho)`` for Hermitian ``O``; raises if the result is not real."""
    rho = np.asarray(rho)
    if op.shape != rho.shape:
        raise ParameterError(f"operator shape {op.shape} does not match state shape {rho.shape}")
    if sparse.issparse(op):
        val = (op.multiply(rho.T)).sum()
    else:
        val = np.sum(np.asarray(op) * rho.T)
    if abs(val.imag) >= 1e-8:
        raise PropagationError(None, f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


@dataclass
class SigmaZSeries:
    times: np.ndarray
    t_natural: np.ndarray
    sigma_z: np.ndarray
    trace_err: np.ndarray
    min_eig: np.ndarray
    herm_err: np.ndarray

    def zero_crossings(self) -> int:
        return count_zero_crossings(self.sigma_z)


def sigma_z_trajectory(spec: SystemSpec, rho0, times, *, check=True) -> SigmaZSeries:
    """``<sigma_z>(t)`` with per-point state diagnostics.

    States are reduced on the fly, so long grids do not hold the full
    trajectory in memory.
    """
    rho0 = initial_state(spec, rho0)
    dim = spec.dim
    gen = liouvillian(spec)
    times = np.asarray(times, dtype=float)
    sz = np.empty(times.size)
    tr = np.empty(times.size)
    mn = np.empty(times.size)
    he = np.empty(times.size)
    for start, block in propagate_blocks(gen, vec(rho0), times):
        states = block.reshape(-1, dim, dim).swapaxes(-1, -2)
        sl = slice(start, start + len(states))
        if check:
            check_states(states, start)
        tr[sl], he[sl], mn[sl] = state_diagnostics(states)
        spin = kernels.reduce_to_spin(block.reshape(len(states), -1), spec.env_dim)
        sz[sl] = (spin[:, 0, 0] - spin[:, 1, 1]).real
    return SigmaZSeries(times, spec.spin.delta_rabi * times, sz, tr, mn, he)


def count_zero_crossings(y, tol=0.0) -> int:
    """Sign changes of ``y``; samples with ``|y| <= tol`` are skipped."""
    y = np.asarray(y, dtype=float)
    s = np.sign(y[np.abs(y) > tol])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def truncation_audit(spec: SystemSpec, rho0, times, extra=5) -> float:
    """Largest change of ``<sigma_z>`` when every mode gets ``extra`` more levels.

    ``rho0`` must be a spin tag or 2x2 matrix so that it can be rebuilt on
    the larger space.
    """
    if not isinstance(rho0, str) and np.asarray(rho0).shape != (2, 2):
        raise ParameterError("truncation audit needs a spin-only initial state")
    if not spec.modes:
        return 0.0
    n_max = max(m.n_max for m in spec.modes)
    a = sigma_z_trajectory(spec, rho0, times).sigma_z
    b = sigma_z_trajectory(spec.with_n_max(n_max + extra), rho0, times).sigma_z
    return float(np.max(np.abs(a - b)))
