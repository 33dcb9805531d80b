"""Pure-numpy implementations of the hot kernels.

Each function here has a numba twin in ``_numba.py`` with the same signature
and semantics; ``tests/test_kernels.py`` checks them against each other.
"""

import numpy as np

# rows of the (t, n) broadcast block kept in memory at once
_CHUNK = 256


def matsubara_weighted_sum(t, nu, w):
    """Return ``sum_n w[n] * exp(-nu[n] * |t|)`` for every entry of ``t``."""
    t = np.abs(np.asarray(t, dtype=float).ravel())
    out = np.empty_like(t)
    for start in range(0, t.size, _CHUNK):
        block = t[start:start + _CHUNK, None]
        out[start:start + _CHUNK] = np.exp(-block * nu[None, :]) @ w
    return out


def lanczos_tridiag(nodes, weights, n):
    """Jacobi-matrix coefficients of a discrete measure.

    Lanczos on ``diag(nodes)`` started from ``sqrt(weights)``, with two full
    Gram-Schmidt passes per step.

    Returns
    -------
    alpha : (n,) diagonal recurrence coefficients
    beta : (n,) with ``beta[0]`` the total weight and ``beta[k]`` the squared
        off-diagonal between rows ``k-1`` and ``k``
    fail : index of the first non-positive ``beta`` or -1
    """
    nodes = np.asarray(nodes, dtype=float)
    weights = np.asarray(weights, dtype=float)
    m = nodes.size
    alpha = np.zeros(n)
    beta = np.zeros(n)
    q = np.zeros((n, m))
    total = weights.sum()
    beta[0] = total
    if total <= 0.0:
        return alpha, beta, 0
    q[0] = np.sqrt(weights / total)
    for k in range(n):
        alpha[k] = np.dot(nodes * q[k], q[k])
        if k == n - 1:
            break
        r = nodes * q[k] - alpha[k] * q[k]
        if k > 0:
            r -= np.sqrt(beta[k]) * q[k - 1]
        for _ in range(2):
            r -= q[: k + 1].T @ (q[: k + 1] @ r)
        b2 = np.dot(r, r)
        if not b2 > 0.0:
            return alpha, beta, k + 1
        beta[k + 1] = b2
        q[k + 1] = r / np.sqrt(b2)
    return alpha, beta, -1


def reshuffle(e):
    """Index permutation ``E^R[2p+q, 2r+s] = E[2p+r, 2q+s]`` on (..., 4, 4)."""
    e = np.asarray(e)
    shape = e.shape[:-2]
    return e.reshape(shape + (2, 2, 2, 2)).swapaxes(-3, -2).reshape(shape + (4, 4))


def choi_excess(maps):
    """Trace-norm excess of the Choi matrices of consecutive intermediate maps.

    For ``maps[i] = E(t_i, t_0)`` forms ``E(t_{i+1}, t_i) = E_{i+1} E_i^{-1}``,
    reshuffles it, scales by 1/2 and returns ``||C||_1 - 1`` together with the
    condition number of ``E_i``.
    """
    maps = np.asarray(maps, dtype=complex)
    prev = maps[:-1]
    nxt = maps[1:]
    inter = np.linalg.solve(prev.swapaxes(-1, -2), nxt.swapaxes(-1, -2)).swapaxes(-1, -2)
    choi = 0.5 * reshuffle(inter)
    choi = 0.5 * (choi + choi.conj().swapaxes(-1, -2))
    ev = np.linalg.eigvalsh(choi)
    excess = np.abs(ev).sum(axis=-1) - 1.0
    cond = np.linalg.cond(prev)
    return excess, cond


def trace_distance_2x2(rho1, rho2):
    """Trace distance between stacks of 2x2 matrices, closed form."""
    x = np.asarray(rho1, dtype=complex) - np.asarray(rho2, dtype=complex)
    a = x[..., 0, 0].real
    d = x[..., 1, 1].real
    b = 0.5 * (x[..., 0, 1] + np.conj(x[..., 1, 0]))
    mid = 0.5 * (a + d)
    rad = np.sqrt((0.5 * (a - d)) ** 2 + np.abs(b) ** 2)
    return 0.5 * (np.abs(mid + rad) + np.abs(mid - rad))


def reduce_to_spin(vecs, d_env):
    """Partial trace over everything but the leading qubit.

    ``vecs`` has shape (m, D*D) and holds column-stacked density matrices with
    ``D = 2 * d_env``. Returns (m, 2, 2) reduced spin states.
    """
    vecs = np.asarray(vecs)
    m = vecs.shape[0]
    dim = 2 * d_env
    rho = vecs.reshape(m, dim, dim).swapaxes(-1, -2)
    return np.einsum("maebe->mab", rho.reshape(m, 2, d_env, 2, d_env))
