"""Numerical kernels with a selectable backend.

Two interchangeable implementations exist: ``numpy_impl`` (vectorised,
always available) and ``numba_impl`` (compiled loops). The active one
is chosen once at import time from the ``OCCUFIT_BACKEND`` environment
variable:

* ``auto`` (default) - use numba when it imports, else numpy
* ``numba``          - require numba, raise if missing
* ``numpy``          - force the pure numpy path

``BACKEND`` records which one won. Both submodules stay importable so
tests and benchmarks can compare them directly.
"""

from __future__ import annotations

import os

_choice = os.environ.get("OCCUFIT_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"OCCUFIT_BACKEND must be 'auto', 'numba', or 'numpy', got {_choice!r}"
    )

if _choice == "numpy":
    from . import numpy_impl as _active

    BACKEND = "numpy"
else:
    try:
        from . import numba_impl as _active

        BACKEND = "numba"
    except ImportError:
        if _choice == "numba":
            raise
        from . import numpy_impl as _active

        BACKEND = "numpy"

P_LO = _active.P_LO
logistic = _active.logistic
detection_probs = _active.detection_probs
theta_rows = _active.theta_rows
cond_loglik = _active.cond_loglik
cond_loglik_grad_hess = _active.cond_loglik_grad_hess
partial_loglik = _active.partial_loglik
partial_loglik_grad = _active.partial_loglik_grad
partial_score_info = _active.partial_score_info
iwls_system = _active.iwls_system
cross_term = _active.cross_term
full_loglik = _active.full_loglik
full_loglik_grad = _active.full_loglik_grad
offset_loglik = _active.offset_loglik
offset_loglik_grad_hess = _active.offset_loglik_grad_hess
xoshiro_fill = _active.xoshiro_fill

__all__ = [
    "BACKEND",
    "P_LO",
    "logistic",
    "detection_probs",
    "theta_rows",
    "cond_loglik",
    "cond_loglik_grad_hess",
    "partial_loglik",
    "partial_loglik_grad",
    "partial_score_info",
    "iwls_system",
    "cross_term",
    "full_loglik",
    "full_loglik_grad",
    "offset_loglik",
    "offset_loglik_grad_hess",
    "xoshiro_fill",
]
