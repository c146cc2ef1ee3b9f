"""Kernel backend selection.

The compiled core is used when importable; setting ``VACRNG_PURE_PYTHON=1``
forces the numpy fallback.
"""

import os

from . import _pycore

if os.environ.get("VACRNG_PURE_PYTHON", "") not in ("", "0"):
    core = _pycore
else:
    try:
        from . import _core as core
    except ImportError:
        core = _pycore

BACKEND = core.NAME
