"""Selects the compiled jet kernel when available.

Set ``JETOPTICS_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
jet_bmm = _kernels_py.jet_bmm

if not os.environ.get("JETOPTICS_PURE_PYTHON"):
    try:
        from . import _kernels_c
    except ImportError:  # extension not built
        pass
    else:
        jet_bmm = _kernels_c.jet_bmm
        BACKEND = "cython"
