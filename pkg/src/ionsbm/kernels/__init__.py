"""Hot numerical kernels with a numba path and a pure-numpy fallback.

The backend is picked once at import (see :mod:`ionsbm._accel`); both
implementations stay importable as ``kernels.numpy_backend`` and, when numba
is installed, ``kernels.numba_backend``.
"""

from .. import _accel
from . import _numpy as numpy_backend

if _accel.HAVE_NUMBA:
    from . import _numba as numba_backend
else:  # pragma: no cover - numba is installed in the dev environment
    numba_backend = None

_active = numba_backend if _accel.USE_NUMBA else numpy_backend

BACKEND = "numba" if _accel.USE_NUMBA else "numpy"

matsubara_weighted_sum = _active.matsubara_weighted_sum
lanczos_tridiag = _active.lanczos_tridiag
reshuffle = _active.reshuffle
choi_excess = _active.choi_excess
trace_distance_2x2 = _active.trace_distance_2x2
reduce_to_spin = _active.reduce_to_spin

__all__ = [
    "BACKEND",
    "numpy_backend",
    "numba_backend",
    "matsubara_weighted_sum",
    "lanczos_tridiag",
    "reshuffle",
    "choi_excess",
    "trace_distance_2x2",
    "reduce_to_spin",
]
