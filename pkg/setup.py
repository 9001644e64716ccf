"""Build script: compiles the optional Mittag-Leffler extension kernel.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so any build failure here degrades to a warning
instead of breaking the install.
"""

import warnings

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/fracorder/_kernels/_mlf_cy.pyx"],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
    include_dirs = [np.get_include()]
except Exception as exc:  # pragma: no cover
    warnings.warn(f"building without the compiled kernel: {exc}")
    include_dirs = []

setup(ext_modules=ext_modules, include_dirs=include_dirs)
