"""Star-to-chain mapping of a bosonic bath and a small exact chain solver.

The bath measure ``dmu = J(omega)/pi domega`` on ``[0, omega_max]`` is
discretized with composite Gauss-Legendre rules; Lanczos on the resulting
discrete measure gives the recurrence coefficients, which are the chain's
site frequencies, hoppings and the spin-chain coupling.

The chain Hamiltonian (rad/s) is

    (delta/2) sz + (Omega_d/2) sx - (t_0/2) sz (b_0 + b_0^dag)
    + sum_n omega_n b_n^dag b_n + sum_n t_{n+1} (b_n^dag b_{n+1} + h.c.)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import kernels
from .errors import CapExceededError, ChainMapError, ParameterError
from .lindblad import SIGMA_X, SIGMA_Z, SpinParams, destroy, propagate_blocks, spin_state

GL_ORDER = 16
DEFAULT_CHAIN_CAP = 2 * 4 ** 7


@dataclass(frozen=True)
class DiscretizedMeasure:
    nodes: np.ndarray
    weights: np.ndarray
    omega_max: float

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def __len__(self):
        return self.nodes.size


@dataclass(frozen=True)
class ChainCoefficients:
    """``frequencies[n]`` for sites 0..N-1, ``hoppings[n]`` between sites n and n+1."""

    frequencies: np.ndarray
    hoppings: np.ndarray
    coupling: float

    @property
    def n_chain(self) -> int:
        return self.frequencies.size

    def truncate(self, n_sites) -> "ChainCoefficients":
        if n_sites > self.n_chain:
            raise ParameterError(f"chain has only {self.n_chain} sites")
        return ChainCoefficients(self.frequencies[:n_sites], self.hoppings[: n_sites - 1], self.coupling)


def _default_breakpoints(J, omega_max):
    comps = getattr(J, "components", None)
    if comps is None and getattr(J, "kind", None) == "lorentzian":
        comps = J.params["components"]
    if not comps:
        return []
    pts = {c.omega_m + s * c.kappa for c in comps for s in (-5, -1, 0, 1, 5)}
    return sorted(p for p in pts if 0 < p < omega_max)


def discretize_measure(J, omega_max, n_nodes, breakpoints=None) -> DiscretizedMeasure:
    """Nodes and weights of ``J(omega)/pi domega`` on ``[0, omega_max]``.

    Uniform panels (about ``GL_ORDER`` nodes each) are refined at
    ``breakpoints``, which default to the resonances of Lorentzian inputs.
    Exactly ``n_nodes`` nodes are returned.
    """
    if not omega_max > 0:
        raise ParameterError("omega_max must be > 0")
    n_nodes = int(n_nodes)
    if n_nodes < 2:
        raise ParameterError("n_nodes must be >= 2")
    if breakpoints is None:
        breakpoints = _default_breakpoints(J, omega_max)
    n_uniform = max(1, n_nodes // GL_ORDER)
    edges = np.union1d(np.linspace(0.0, omega_max, n_uniform + 1),
                       [b for b in breakpoints if 0 < b < omega_max])
    n_pan = edges.size - 1
    if n_pan > n_nodes:
        raise ParameterError("too many breakpoints for the requested node count")
    orders = np.full(n_pan, n_nodes // n_pan)
    orders[: n_nodes % n_pan] += 1
    nodes, weights = [], []
    rules = {}
    for (a, b), q in zip(zip(edges[:-1], edges[1:]), orders):
        if q not in rules:
            rules[q] = np.polynomial.legendre.leggauss(int(q))
        x, w = rules[q]
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * w)
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights)
    vals = np.asarray(J(nodes), dtype=float)
    if np.any(vals < 0):
        i = int(np.argmax(vals < 0))
        raise ParameterError(f"spectral density is negative at omega={nodes[i]:.6g} ({vals[i]:.3g})")
    return DiscretizedMeasure(nodes, weights * vals / np.pi, float(omega_max))


def chain_coefficients(measure: DiscretizedMeasure, n_chain: int) -> ChainCoefficients:
    """Lanczos recurrence of the discrete measure.

    ``frequencies = alpha_n``, ``hoppings = sqrt(beta_{n+1})`` and
    ``coupling = sqrt(beta_0)`` (the square root of the total weight).

    Raises
    ------
    ChainMapError
        When the recurrence breaks down (a vanishing or non-positive
        ``beta``), naming the index.
    """
    n_chain = int(n_chain)
    if n_chain < 1:
        raise ParameterError("n_chain must be >= 1")
    if n_chain > len(measure) // 2:
        raise ParameterError(f"n_chain={n_chain} exceeds half the node count ({len(measure)})")
    alpha, beta, fail = kernels.lanczos_tridiag(measure.nodes, measure.weights, n_chain)
    if fail >= 0:
        raise ChainMapError(int(fail))
    # a beta this small means the Krylov space has collapsed onto a few nodes
    tiny = (1e-12 * measure.omega_max) ** 2
    small = np.nonzero(beta[1:] <= tiny)[0]
    if small.size:
        raise ChainMapError(int(small[0]) + 1)
    return ChainCoefficients(alpha.copy(), np.sqrt(beta[1:]), float(np.sqrt(beta[0])))


def chain_hamiltonian(spin: SpinParams, chain: ChainCoefficients, d_max: int) -> sparse.csr_matrix:
    """Spin plus chain Hamiltonian; spin first, then sites 0..N-1 with ``d_max`` levels each."""
    n = chain.n_chain
    d = int(d_max)
    b = destroy(d)
    eye = sparse.identity(d, dtype=complex, format="csr")

    def site(op, k):
        out = sparse.identity(2, dtype=complex, format="csr")
        for j in range(n):
            out = sparse.kron(out, op if j == k else eye, format="csr")
        return out

    def spin_op(op):
        return sparse.kron(sparse.csr_matrix(op), sparse.identity(d ** n, dtype=complex), format="csr")

    ann = [site(b, k) for k in range(n)]
    h = spin_op(0.5 * spin.epsilon_over_hbar * SIGMA_Z + 0.5 * spin.omega_d * SIGMA_X)
    sz = spin_op(SIGMA_Z)
    h = h - 0.5 * chain.coupling * (sz @ (ann[0] + ann[0].conj().T))
    for k in range(n):
        h = h + chain.frequencies[k] * (ann[k].conj().T @ ann[k])
    for k in range(n - 1):
        hop = ann[k].conj().T @ ann[k + 1]
        h = h + chain.hoppings[k] * (hop + hop.conj().T)
    return h.tocsr()


@dataclass
class ChainEvolution:
    times: np.ndarray
    sigma_z: np.ndarray
    norm_err: np.ndarray


def exact_chain_evolution(spin: SpinParams, chain: ChainCoefficients, d_max: int, n_sites: int,
                          rho0, times, *, max_dim=DEFAULT_CHAIN_CAP) -> ChainEvolution:
    """``<sigma_z>(t)`` for the spin coupled to the first ``n_sites`` of the chain.

    The chain starts in its vacuum. A mixed spin state is split into its
    eigenvectors and each pure branch is evolved separately.
    """
    dim = 2 * int(d_max) ** int(n_sites)
    if dim > max_dim:
        raise CapExceededError(dim, max_dim, "chain Hilbert")
    if d_max < 2 or n_sites < 1:
        raise ParameterError("need d_max >= 2 and n_sites >= 1")
    sub = chain.truncate(n_sites)
    h = chain_hamiltonian(spin, sub, d_max)
    gen = (-1j * h).tocsr()
    rho0 = spin_state(rho0) if isinstance(rho0, str) else np.asarray(rho0, dtype=complex)
    p, vecs = np.linalg.eigh(0.5 * (rho0 + rho0.conj().T))
    keep = p > 1e-14
    env = np.zeros(dim // 2, dtype=complex)
    env[0] = 1.0
    psi0 = np.stack([np.kron(vecs[:, k], env) for k in np.nonzero(keep)[0]], axis=1)
    w = p[keep]
    times = np.asarray(times, dtype=float)
    sz = np.zeros(times.size)
    nerr = np.zeros(times.size)
    half = dim // 2
    for start, block in propagate_blocks(gen, psi0, times):
        pops = np.abs(block) ** 2
        up = pops[:, :half, :].sum(axis=1)
        dn = pops[:, half:, :].sum(axis=1)
        sl = slice(start, start + block.shape[0])
        sz[sl] = (up - dn) @ w
        nerr[sl] = np.abs(up + dn - 1.0).max(axis=1)
    return ChainEvolution(times, sz, nerr)
