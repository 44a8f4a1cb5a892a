"""Hot loops with a numba path and a pure-numpy fallback.

Set ``MFGPD_DISABLE_NUMBA=1`` to force the numpy implementations (also used
automatically when numba is not importable).
"""

import os

from . import _numpy

USE_NUMBA = os.environ.get("MFGPD_DISABLE_NUMBA", "").lower() not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from . import _numba as _impl
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False
        _impl = _numpy
else:
    _impl = _numpy

BACKEND = "numba" if USE_NUMBA else "numpy"

bellman_backward = _impl.bellman_backward
forward_propagate = _impl.forward_propagate
simulate_counts = _impl.simulate_counts

__all__ = ["BACKEND", "USE_NUMBA", "bellman_backward", "forward_propagate", "simulate_counts"]
