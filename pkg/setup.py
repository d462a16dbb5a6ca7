"""Build shim: compile the optional Cython assembly kernel.

The package is fully functional without the extension (a vectorized NumPy
kernel is selected at import time), so any failure here degrades to a
pure-Python install instead of aborting.
"""
import sys

from setuptools import Extension, setup


def _extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError as exc:  # pragma: no cover - build environment dependent
        sys.stderr.write(f"zpinchstab: skipping compiled kernel ({exc})\n")
        return []
    ext = Extension(
        "zpinchstab._asm_c",
        ["src/zpinchstab/_asm_c.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    try:
        return cythonize([ext], language_level=3)
    except Exception as exc:  # pragma: no cover - build environment dependent
        sys.stderr.write(f"zpinchstab: skipping compiled kernel ({exc})\n")
        return []


setup(ext_modules=_extensions())
