"""Dynamical maps of the spin and two non-Markovianity measures.

A map ``E(t, 0)`` is a 4x4 matrix acting on the row-major spin vector
``v = [rho_uu, rho_ud, rho_du, rho_dd]``; its columns are the evolved
operator-basis inputs ``|k><j|`` (column ``2k + j``) with the modes starting
in their thermal state.

The divisibility measure uses the Choi matrix ``reshuffle(E)/2`` of the
intermediate maps ``E(t_{i+1}, t_i) = E(t_{i+1}, 0) E(t_i, 0)^-1``; the
trace-distance measure sums increases of ``D(rho_1(t), rho_2(t))`` over
orthogonal spin pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import IllConditionedMapError, ParameterError
from .lindblad import SystemSpec, environment_state, liouvillian, propagate_blocks, spin_state, vec

G_THRESHOLD = 1e-14
COND_LIMIT = 1e12

# orthogonal pairs built from the six Pauli eigenstates
PAIRS = {
    "z": ("up", "down"),
    "x": ("plus_x", "minus_x"),
    "y": ("plus_y", "minus_y"),
}


@dataclass
class DynamicalMapSeries:
    times: np.ndarray
    maps: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.maps = np.asarray(self.maps, dtype=complex)
        if self.maps.shape != (self.times.size, 4, 4):
            raise ParameterError(f"maps have shape {self.maps.shape}, expected ({self.times.size}, 4, 4)")

    def __len__(self):
        return self.times.size

    def apply(self, rho) -> np.ndarray:
        """Spin states ``E(t_i, 0) rho`` for a 2x2 initial state."""
        v = np.asarray(rho, dtype=complex).reshape(4)
        return (self.maps @ v).reshape(-1, 2, 2)


def reconstruct_maps(spec: SystemSpec, times, *, chunk=256) -> DynamicalMapSeries:
    """Evolve the four basis inputs ``|k><j| (x) rho_env`` and pack the reduced results."""
    times = np.asarray(times, dtype=float)
    env = environment_state(spec)
    v0 = np.empty((spec.dim ** 2, 4), dtype=complex)
    for c in range(4):
        basis = np.zeros((2, 2), dtype=complex)
        basis[divmod(c, 2)] = 1.0
        v0[:, c] = vec(np.kron(basis, env))
    gen = liouvillian(spec)
    maps = np.empty((times.size, 4, 4), dtype=complex)
    for start, block in propagate_blocks(gen, v0, times, chunk=chunk):
        n = block.shape[0]
        flat = block.swapaxes(1, 2).reshape(n * 4, -1)
        spin = kernels.reduce_to_spin(flat, spec.env_dim).reshape(n, 4, 4)
        maps[start:start + n] = spin.swapaxes(1, 2)
    return DynamicalMapSeries(times, maps)


def _solve_right(a, b):
    # x such that x @ b = a
    return np.linalg.solve(b.T, a.T).T


def intermediate_map(series: DynamicalMapSeries, i: int, j: int) -> np.ndarray:
    """``E(t_i, t_j) = E(t_i, 0) E(t_j, 0)^-1`` for ``j <= i``."""
    if not 0 <= j <= i < len(series):
        raise ParameterError(f"need 0 <= j <= i < {len(series)}, got i={i}, j={j}")
    if i == j:
        return np.eye(4, dtype=complex)
    ej = series.maps[j]
    cond = np.linalg.cond(ej)
    if not cond <= COND_LIMIT:
        raise IllConditionedMapError(j, cond)
    return _solve_right(series.maps[i], ej)


def reshuffle(e) -> np.ndarray:
    """``E^R[2p+q, 2r+s] = E[2p+r, 2q+s]``; an involution."""
    return kernels.reshuffle(np.asarray(e))


def choi(e) -> np.ndarray:
    return 0.5 * reshuffle(e)


def trace_norm_excess(e) -> float:
    """``||choi(E)||_1 - 1``; zero for completely positive trace-preserving ``E``."""
    c = choi(e)
    c = 0.5 * (c + c.conj().T)
    return float(np.abs(np.linalg.eigvalsh(c)).sum() - 1.0)


def g_discrete(series: DynamicalMapSeries, i: int, threshold=G_THRESHOLD) -> float:
    """Divisibility-breaking rate on ``[t_i, t_{i+1}]`` (1/s); 0 below ``threshold``."""
    if not 0 <= i < len(series) - 1:
        raise ParameterError(f"i must be in [0, {len(series) - 2}]")
    num = trace_norm_excess(intermediate_map(series, i + 1, i))
    if num < threshold:
        return 0.0
    return num / (series.times[i + 1] - series.times[i])


def g_series(series: DynamicalMapSeries, threshold=G_THRESHOLD) -> np.ndarray:
    """``g(t_i)`` for every interval of the grid (vectorized ``g_discrete``)."""
    excess, cond = kernels.choi_excess(series.maps)
    bad = ~(cond <= COND_LIMIT)
    if bad.any():
        i = int(np.argmax(bad))
        raise IllConditionedMapError(i, cond[i])
    dt = np.diff(series.times)
    return np.where(excess < threshold, 0.0, excess / dt)


def n_rhp(g_or_series, threshold=G_THRESHOLD) -> float:
    """Mean of ``tanh(g)`` over the intervals with ``g > 0``; 0 when there are none.

    ``g`` is taken in 1/s, so the value depends on the time unit.
    """
    if isinstance(g_or_series, DynamicalMapSeries):
        if len(g_or_series) < 2:
            raise ParameterError("need at least two times")
        g = g_series(g_or_series, threshold)
    else:
        g = np.asarray(g_or_series, dtype=float)
    pos = g > 0
    count = int(np.count_nonzero(pos))
    if count == 0:
        return 0.0
    return float(np.tanh(g[pos]).sum() / count)


def trace_distance(rho1, rho2) -> np.ndarray:
    """``||rho1 - rho2||_1 / 2``, broadcast over leading axes."""
    rho1 = np.asarray(rho1)
    rho2 = np.asarray(rho2)
    if rho1.shape[-2:] != rho2.shape[-2:] or rho1.shape[-1] != rho1.shape[-2]:
        raise ParameterError(f"shape mismatch: {rho1.shape} vs {rho2.shape}")
    if rho1.shape[-1] == 2:
        out = kernels.trace_distance_2x2(rho1, rho2)
    else:
        x = rho1 - rho2
        out = 0.5 * np.abs(np.linalg.eigvalsh(0.5 * (x + x.conj().swapaxes(-1, -2)))).sum(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def positive_increments(d, threshold=G_THRESHOLD) -> float:
    """Sum of the increments of ``d`` that exceed ``threshold``."""
    inc = np.diff(np.asarray(d, dtype=float))
    return float(inc[inc > threshold].sum())


@dataclass
class BLPResult:
    times: np.ndarray
    distances: dict
    per_pair: dict

    @property
    def value(self) -> float:
        return max(self.per_pair.values()) if self.per_pair else 0.0

    @property
    def best_pair(self) -> str:
        return max(self.per_pair, key=self.per_pair.get)


def _pair_distances_direct(spec, times, pairs):
    env = environment_state(spec)
    gen = liouvillian(spec)
    names = [s for p in pairs for s in PAIRS[p]]
    v0 = np.stack([vec(np.kron(spin_state(s), env)) for s in names], axis=1)
    spins = np.empty((times.size, len(names), 2, 2), dtype=complex)
    for start, block in propagate_blocks(gen, v0, times):
        n = block.shape[0]
        flat = block.swapaxes(1, 2).reshape(n * len(names), -1)
        spins[start:start + n] = kernels.reduce_to_spin(flat, spec.env_dim).reshape(n, len(names), 2, 2)
    return {p: trace_distance(spins[:, 2 * k], spins[:, 2 * k + 1]) for k, p in enumerate(pairs)}


def n_blp_lower_bound(source, times=None, pairs=None, *, threshold=G_THRESHOLD,
                      method="maps") -> BLPResult:
    """Trace-distance measure over orthogonal Pauli-eigenstate pairs.

    Parameters
    ----------
    source : SystemSpec or DynamicalMapSeries
        With ``method="maps"`` the pair states are obtained from the map
        series (built from ``source`` and ``times`` if needed). ``"direct"``
        evolves every pair member separately and needs a ``SystemSpec``.
    pairs : iterable of keys of ``PAIRS``; default all three.
    threshold : increments at or below it count as numerical noise.
    """
    pairs = tuple(PAIRS) if pairs is None else tuple(pairs)
    for p in pairs:
        if p not in PAIRS:
            raise ParameterError(f"unknown pair {p!r}; expected one of {tuple(PAIRS)}")
    if method == "direct":
        if not isinstance(source, SystemSpec):
            raise ParameterError("direct evaluation needs a SystemSpec")
        times = np.asarray(times, dtype=float)
        dist = _pair_distances_direct(source, times, pairs)
    elif method == "maps":
        series = source if isinstance(source, DynamicalMapSeries) else reconstruct_maps(source, times)
        times = series.times
        dist = {}
        for p in pairs:
            a, b = (series.apply(spin_state(s)) for s in PAIRS[p])
            dist[p] = trace_distance(a, b)
    else:
        raise ParameterError(f"unknown method {method!r}")
    per_pair = {p: positive_increments(d, threshold) for p, d in dist.items()}
    return BLPResult(times, dist, per_pair)
