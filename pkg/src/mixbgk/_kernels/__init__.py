"""Velocity-space kernels with a compiled core and a numpy fallback.

The compiled extension ``_core`` is used when it has been built; set
``MIXBGK_BACKEND=python`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
if os.environ.get("MIXBGK_BACKEND", "").lower() != "python":
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

velocity_moments = _impl.velocity_moments
expquad_solve = _impl.expquad_solve

__all__ = ["BACKEND", "velocity_moments", "expquad_solve"]
