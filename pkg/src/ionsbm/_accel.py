"""Backend selection for the hot numerical kernels.

Set ``IONSBM_DISABLE_NUMBA=1`` to force the pure-numpy path even when numba
is importable. The choice is made once, at import time.
"""

import os

_FALSEY = {"", "0", "false", "no", "off"}

NUMBA_DISABLED = os.environ.get("IONSBM_DISABLE_NUMBA", "").strip().lower() not in _FALSEY

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED
