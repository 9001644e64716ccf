"""Summation kernel backend: compiled extension when available, NumPy otherwise.

Set ``FRACORDER_PURE_PYTHON=1`` to force the fallback (used by the
benchmark and for debugging).
"""

import os

from . import _mlf_py

if os.environ.get("FRACORDER_PURE_PYTHON"):
    impl = _mlf_py
    BACKEND = "python"
else:
    try:
        from . import _mlf_cy as impl

        BACKEND = "cython"
    except ImportError:
        impl = _mlf_py
        BACKEND = "python"

series_sum = impl.series_sum
asym_sum = impl.asym_sum
