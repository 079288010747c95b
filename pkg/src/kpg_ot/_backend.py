"""Kernel selection: compiled transportation simplex with pure-python fallback.

The compiled extension ``kpg_ot._simplex`` is preferred when it imports;
otherwise the pure-python twin ``kpg_ot._simplex_py`` is used.  Setting the
environment variable ``KPG_OT_PURE_PYTHON=1`` (read at import time) forces
the fallback, which is useful for benchmarking and debugging.  Both kernels
implement identical deterministic pivot rules and return bit-for-bit equal
plans.
"""

import os

_force_pure = os.environ.get("KPG_OT_PURE_PYTHON", "") not in ("", "0")

if _force_pure:
    from . import _simplex_py as _kernel

    COMPILED = False
else:
    try:
        from . import _simplex as _kernel  # type: ignore[attr-defined]

        COMPILED = True
    except ImportError:
        from . import _simplex_py as _kernel

        COMPILED = False

solve_transportation = _kernel.solve_transportation

__all__ = ["solve_transportation", "COMPILED"]
