"""Select the assembly kernel at import time.

The compiled kernel is used when present; the NumPy fallback is always
available.  Set ZPINCHSTAB_BACKEND=python (or =cython) to force a choice,
e.g. for benchmarking.
"""
from __future__ import annotations

import os

_forced = os.environ.get("ZPINCHSTAB_BACKEND", "").strip().lower()

if _forced == "python":
    from . import _asm_py as _impl

    BACKEND = "python"
elif _forced == "cython":
    from . import _asm_c as _impl  # raises if the extension was not built

    BACKEND = "cython"
else:
    try:
        from . import _asm_c as _impl

        BACKEND = "cython"
    except ImportError:
        from . import _asm_py as _impl

        BACKEND = "python"

accumulate_forms = _impl.accumulate_forms
