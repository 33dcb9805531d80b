"""Time the numba kernels against the numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the IONSBM_DISABLE_NUMBA flag does
not matter here. Numba compilation happens in a warm-up call and is not timed.
"""

import argparse
import time

import numpy as np

from ionsbm import kernels


def _cases(rng):
    tp = 2 * np.pi
    hbar_beta = 5.91e-6
    nu = tp * np.arange(1, 10_001) / hbar_beta
    w = nu / ((tp * 1e5) ** 2 + nu ** 2) ** 2
    t = np.linspace(5e-6, 2e-3, 4000)

    nodes, weights = np.polynomial.legendre.leggauss(64)
    nodes = np.concatenate([0.5 * (nodes + 1) + k for k in range(32)])
    weights = np.tile(0.5 * weights, 32) * np.exp(-nodes / 8)

    maps = np.eye(4, dtype=complex) + 1e-3 * (rng.standard_normal((2001, 4, 4))
                                              + 1j * rng.standard_normal((2001, 4, 4)))
    a = rng.standard_normal((20000, 2, 2)) + 1j * rng.standard_normal((20000, 2, 2))
    b = rng.standard_normal((20000, 2, 2)) + 1j * rng.standard_normal((20000, 2, 2))
    vecs = rng.standard_normal((512, 32 * 32)) + 1j * rng.standard_normal((512, 32 * 32))
    return {
        "matsubara_weighted_sum (4000 t x 1e4 terms)": ("matsubara_weighted_sum", (t, nu, w)),
        "lanczos_tridiag (2048 nodes, 40 steps)": ("lanczos_tridiag", (nodes, weights, 40)),
        "choi_excess (2000 maps)": ("choi_excess", (maps,)),
        "trace_distance_2x2 (20000 pairs)": ("trace_distance_2x2", (a, b)),
        "reduce_to_spin (512 states, D=32)": ("reduce_to_spin", (vecs, 16)),
    }


def _time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(1)
    backends = [("numpy", kernels.numpy_backend)]
    if kernels.numba_backend is not None:
        backends.append(("numba", kernels.numba_backend))
    else:
        print("numba not installed; timing the numpy backend only")
    print(f"{'kernel':48s}" + "".join(f"{name:>12s}" for name, _ in backends) + f"{'speedup':>10s}")
    for label, (name, fargs) in _cases(rng).items():
        times = []
        for _, mod in backends:
            fn = getattr(mod, name)
            fn(*fargs)  # warm-up (and JIT)
            times.append(_time(fn, fargs, args.repeat))
        speed = f"{times[0] / times[1]:9.2f}x" if len(times) == 2 else ""
        print(f"{label:48s}" + "".join(f"{1e3 * x:10.2f}ms" for x in times) + f"{speed:>10s}")


if __name__ == "__main__":
    main()
