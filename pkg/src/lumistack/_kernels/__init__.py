"""Kernel backend selection.

The hot loops (max-flow, epipolar painting, sloped integration) exist twice:
compiled Cython in ``_native`` and a NumPy/Python reference in ``pure``. The
compiled module is preferred when the build produced it; ``LUMISTACK_PURE=1``
forces the reference implementation.
"""

import os

if os.environ.get("LUMISTACK_PURE") == "1":
    from . import pure as _impl

    BACKEND = "pure"
else:
    try:
        from . import _native as _impl

        BACKEND = "native"
    except ImportError:
        from . import pure as _impl

        BACKEND = "pure"

max_flow = _impl.max_flow
paint_rows = _impl.paint_rows
integrate_rows = _impl.integrate_rows

__all__ = ["BACKEND", "max_flow", "paint_rows", "integrate_rows"]
