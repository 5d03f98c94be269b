"""Backend selection for the model evaluation kernel.

The compiled extension is used when it imports; setting the environment
variable ``TENDONKIN_PURE_PYTHON`` to a non-empty value forces the numpy
fallback. Both backends expose ``evaluate_model`` with the same signature.
"""

import os

from . import _kernels_py

BACKEND = "python"
evaluate_model = _kernels_py.evaluate_model

if not os.environ.get("TENDONKIN_PURE_PYTHON"):
    try:
        from . import _kernels_c
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        evaluate_model = _kernels_c.evaluate_model

__all__ = ["BACKEND", "evaluate_model"]
