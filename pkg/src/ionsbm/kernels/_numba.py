"""numba-compiled twins of the kernels in ``_numpy.py``."""

import numpy as np
from numba import njit


@njit(cache=True)
def _matsubara_loop(t, nu, w, out):
    for i in range(t.size):
        ti = abs(t[i])
        acc = 0.0
        for n in range(nu.size):
            x = nu[n] * ti
            # nu is ascending, so every later term underflows too
            if x > 745.0:
                break
            acc += w[n] * np.exp(-x)
        out[i] = acc


def matsubara_weighted_sum(t, nu, w):
    t = np.ascontiguousarray(np.asarray(t, dtype=np.float64).ravel())
    out = np.empty_like(t)
    _matsubara_loop(t, np.ascontiguousarray(nu, dtype=np.float64),
                    np.ascontiguousarray(w, dtype=np.float64), out)
    return out


@njit(cache=True)
def _lanczos(nodes, weights, n):
    m = nodes.size
    alpha = np.zeros(n)
    beta = np.zeros(n)
    q = np.zeros((n, m))
    total = 0.0
    for j in range(m):
        total += weights[j]
    beta[0] = total
    if total <= 0.0:
        return alpha, beta, 0
    for j in range(m):
        q[0, j] = np.sqrt(weights[j] / total)
    r = np.empty(m)
    for k in range(n):
        a = 0.0
        for j in range(m):
            a += nodes[j] * q[k, j] * q[k, j]
        alpha[k] = a
        if k == n - 1:
            break
        bk = np.sqrt(beta[k]) if k > 0 else 0.0
        for j in range(m):
            r[j] = (nodes[j] - a) * q[k, j]
            if k > 0:
                r[j] -= bk * q[k - 1, j]
        for _ in range(2):
            for i in range(k + 1):
                c = 0.0
                for j in range(m):
                    c += q[i, j] * r[j]
                for j in range(m):
                    r[j] -= c * q[i, j]
        b2 = 0.0
        for j in range(m):
            b2 += r[j] * r[j]
        if not b2 > 0.0:
            return alpha, beta, k + 1
        beta[k + 1] = b2
        s = np.sqrt(b2)
        for j in range(m):
            q[k + 1, j] = r[j] / s
    return alpha, beta, -1


def lanczos_tridiag(nodes, weights, n):
    return _lanczos(np.ascontiguousarray(nodes, dtype=np.float64),
                    np.ascontiguousarray(weights, dtype=np.float64), int(n))


@njit(cache=True)
def _reshuffle4(e):
    out = np.empty((4, 4), dtype=e.dtype)
    for p in range(2):
        for q in range(2):
            for r in range(2):
                for s in range(2):
                    out[2 * p + q, 2 * r + s] = e[2 * p + r, 2 * q + s]
    return out


def reshuffle(e):
    e = np.asarray(e)
    if e.shape == (4, 4):
        return _reshuffle4(np.ascontiguousarray(e))
    flat = e.reshape(-1, 4, 4)
    return np.stack([_reshuffle4(np.ascontiguousarray(x)) for x in flat]).reshape(e.shape)


@njit(cache=True)
def _choi_excess(maps, excess, cond):
    for i in range(maps.shape[0] - 1):
        prev = maps[i]
        inter = np.linalg.solve(prev.T.copy(), maps[i + 1].T.copy()).T.copy()
        choi = 0.5 * _reshuffle4(inter)
        choi = 0.5 * (choi + choi.conj().T)
        ev = np.linalg.eigvalsh(choi)
        excess[i] = np.abs(ev).sum() - 1.0
        cond[i] = np.linalg.cond(prev)


def choi_excess(maps):
    maps = np.ascontiguousarray(maps, dtype=np.complex128)
    n = maps.shape[0] - 1
    excess = np.empty(max(n, 0))
    cond = np.empty(max(n, 0))
    if n > 0:
        _choi_excess(maps, excess, cond)
    return excess, cond


@njit(cache=True)
def _trace_distance(x, out):
    for i in range(x.shape[0]):
        a = x[i, 0, 0].real
        d = x[i, 1, 1].real
        b = 0.5 * (x[i, 0, 1] + np.conj(x[i, 1, 0]))
        mid = 0.5 * (a + d)
        rad = np.sqrt((0.5 * (a - d)) ** 2 + abs(b) ** 2)
        out[i] = 0.5 * (abs(mid + rad) + abs(mid - rad))


def trace_distance_2x2(rho1, rho2):
    x = np.asarray(rho1, dtype=np.complex128) - np.asarray(rho2, dtype=np.complex128)
    shape = x.shape[:-2]
    flat = np.ascontiguousarray(x.reshape(-1, 2, 2))
    out = np.empty(flat.shape[0])
    _trace_distance(flat, out)
    return out.reshape(shape)


@njit(cache=True)
def _reduce(vecs, d_env, out):
    dim = 2 * d_env
    for m in range(vecs.shape[0]):
        for s in range(2):
            for sp in range(2):
                acc = 0.0j
                for e in range(d_env):
                    # column stacking: rho[i, j] lives at i + dim * j
                    acc += vecs[m, (s * d_env + e) + dim * (sp * d_env + e)]
                out[m, s, sp] = acc


def reduce_to_spin(vecs, d_env):
    vecs = np.ascontiguousarray(vecs, dtype=np.complex128)
    out = np.empty((vecs.shape[0], 2, 2), dtype=np.complex128)
    _reduce(vecs, int(d_env), out)
    return out
