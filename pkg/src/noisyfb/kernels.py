"""Hot-loop kernels, compiled when available.

The Cython extension ``noisyfb._kernels`` is preferred; the numpy
implementation in ``noisyfb._kernels_py`` is used if the extension was not
built or if the environment variable ``NOISYFB_PURE_PYTHON`` is set to a
non-empty value other than ``0``.
"""

import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("NOISYFB_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

select_groups = _impl.select_groups
message_values = _impl.message_values
mixture_loglik = _impl.mixture_loglik
counts_loglik = _impl.counts_loglik
message_categories = _impl.message_categories
category_counts = _impl.category_counts
parabolic_cut_grid_min = _impl.parabolic_cut_grid_min

__all__ = [
    "BACKEND",
    "select_groups",
    "message_values",
    "mixture_loglik",
    "message_categories",
    "category_counts",
    "counts_loglik",
    "parabolic_cut_grid_min",
    "python_backend",
    "compiled_backend",
]
