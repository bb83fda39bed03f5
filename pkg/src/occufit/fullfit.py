"""Joint maximum likelihood over occupancy and detection together.

The reference the two-stage methods are compared against. The joint
likelihood is maximised by quasi-Newton ascent from zero; if that
stalls, one restart from the two-stage solution is attempted and the
better of the two runs is kept. Boundary drift (sites detected on
every visit, or never) shows up as extreme coefficients, which are
flagged rather than rejected because simulation studies need those
replicates recorded.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    ConvergenceWarning,
    NonConvergence,
    NotPositiveDefinite,
    OccufitError,
    RankDeficientDesign,
)
from .model import Dataset
from .optim import bfgs_maximize, fd_jacobian, solve_spd

__all__ = ["FullFit", "fit_full"]

_EXTREME_NORM = 30.0


@dataclass(frozen=True)
class FullFit:
    """Result of the joint fit.

    ``var_joint`` inverts a finite-difference Hessian of the joint log
    likelihood at the maximum, with the occupancy block leading.
    ``extreme_flag`` marks coefficient drift beyond 30 in magnitude.
    """

    alpha_hat: np.ndarray
    beta_hat: np.ndarray
    loglik: float
    var_joint: np.ndarray
    converged: bool
    iterations: int
    extreme_flag: bool
    restarted: bool


def _two_stage_start(data: Dataset) -> np.ndarray | None:
    from .detection import fit_detection
    from .occupancy import fit_occupancy

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            det = fit_detection(data)
            occ = fit_occupancy(data, det)
        return np.concatenate([occ.alpha_hat, det.beta_hat])
    except OccufitError:
        return None


def fit_full(
    data: Dataset,
    *,
    max_iter: int = 500,
    grad_tol: float = 1e-8,
    restart: bool = True,
) -> FullFit:
    """Maximise the joint occupancy-detection log likelihood.

    Raises :class:`RankDeficientDesign` when either design lacks full
    column rank and :class:`NonConvergence` only when no finite
    estimate could be produced; fits that stop short of the tolerance
    are returned with ``converged=False`` and a warning.
    """
    p = data.n_occ_coefs
    q = data.n_det_coefs
    if np.linalg.matrix_rank(data.occ_design) < p:
        raise RankDeficientDesign("occupancy design is rank deficient")
    det_rows = data.det_design.reshape(-1, q)
    if np.linalg.matrix_rank(det_rows) < q:
        raise RankDeficientDesign("detection design is rank deficient")

    y = data.detections
    w = data.w
    X = data.occ_design
    U = data.det_design

    def f(x):
        return kernels.full_loglik(y, w, X, U, x[:p], x[p:])

    def grad(x):
        _, ga, gb = kernels.full_loglik_grad(y, w, X, U, x[:p], x[p:])
        return np.concatenate([ga, gb])

    res = bfgs_maximize(f, grad, np.zeros(p + q), max_iter=max_iter, grad_tol=grad_tol)
    restarted = False
    if not res.converged and restart:
        start = _two_stage_start(data)
        if start is not None and np.isfinite(start).all():
            res2 = bfgs_maximize(f, grad, start, max_iter=max_iter, grad_tol=grad_tol)
            if res2.value > res.value or (res2.converged and not res.converged):
                res = res2
                restarted = True

    xhat = res.argmax
    if not np.isfinite(xhat).all():
        raise NonConvergence("joint fit produced non-finite coefficients")
    if not res.converged:
        warnings.warn(
            f"joint fit stopped after {res.iterations} iterations "
            f"({res.termination.value}); gradient norm {res.gradient_norm:.2e}",
            ConvergenceWarning,
            stacklevel=2,
        )

    hess = fd_jacobian(grad, xhat)
    hess = 0.5 * (hess + hess.T)
    try:
        var_joint = solve_spd(-hess, np.eye(p + q))
    except (NotPositiveDefinite, ValueError):
        var_joint = np.linalg.pinv(-hess)
    var_joint = 0.5 * (var_joint + var_joint.T)

    return FullFit(
        alpha_hat=xhat[:p],
        beta_hat=xhat[p:],
        loglik=res.value,
        var_joint=var_joint,
        converged=res.converged,
        iterations=res.iterations,
        extreme_flag=bool(np.max(np.abs(xhat)) > _EXTREME_NORM),
        restarted=restarted,
    )
