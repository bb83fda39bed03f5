"""Stage two: occupancy coefficients with detection held fixed.

Given stage-one estimates of each site's chance of being detected at
least once (theta), the detection indicators are Bernoulli with
success probability ``psi(alpha) * theta``. Maximising that objective
in ``alpha`` ignores the sampling error in theta, so the reported
variance adds a correction term propagating the stage-one covariance
through the cross derivative of the occupancy score.

Three maximisers are provided. ``iwls`` is a scoring loop on the
fixed-theta objective and ``direct`` maximises the same objective by
quasi-Newton ascent, so the two agree at the optimum. ``offset``
alternates an offset computation with ordinary logistic fits; its
fixed point solves the unweighted moment equation
``sum x (w - psi * theta) = 0``, which is a consistent but less
efficient estimator, so it is kept separate and never used as a
fallback target.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .detection import DetectionFit
from .errors import (
    BoundaryEstimate,
    ConvergenceWarning,
    DimensionMismatch,
    NonConvergence,
    NotPositiveDefinite,
    RankDeficientDesign,
)
from .model import Dataset
from .optim import bfgs_maximize, newton_maximize, solve_spd

__all__ = [
    "Stage2Method",
    "OccupancyFit",
    "TwoStageFit",
    "fit_occupancy",
    "fit_two_stage",
    "occupancy_information",
    "detection_cross_term",
    "sandwich_variance",
    "psi_with_se",
]

_BOUNDARY_NORM = 30.0
_BOUNDARY_PSI = 1.0 - 1e-8


class Stage2Method(str, enum.Enum):
    """Maximiser used for the occupancy stage."""

    IWLS = "iwls"
    DIRECT = "direct"
    OFFSET = "offset"


@dataclass(frozen=True)
class OccupancyFit:
    """Result of the occupancy stage.

    ``var_naive`` inverts the observed information of the fixed-theta
    objective; ``var_sandwich`` adds the stage-one propagation term and
    is the variance to report. ``psi_se`` comes from the delta method
    on the sandwich variance.
    """

    alpha_hat: np.ndarray
    var_naive: np.ndarray
    var_sandwich: np.ndarray
    method: Stage2Method
    psi_hat: np.ndarray
    psi_se: np.ndarray
    converged: bool
    iterations: int
    fallback_used: bool


@dataclass(frozen=True)
class TwoStageFit:
    """Both stages of a two-stage fit."""

    detection: DetectionFit
    occupancy: OccupancyFit


def _run_iwls(w, X, theta, max_iter, tol):
    p = X.shape[1]
    alpha = np.zeros(p)
    iterations = 0
    converged = False
    for k in range(1, max_iter + 1):
        J, rhs = kernels.iwls_system(w, X, theta, alpha)
        try:
            alpha_new = solve_spd(J, rhs)
        except NotPositiveDefinite:
            break
        if not np.isfinite(alpha_new).all():
            break
        step = float(np.max(np.abs(alpha_new - alpha)))
        alpha = alpha_new
        iterations = k
        _, g = kernels.partial_loglik_grad(w, X, theta, alpha)
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= tol or step <= tol:
            # a tiny step alone is not enough: the score itself must be
            # near zero for the fit to count as converged
            converged = gnorm <= max(tol, 1e-6)
            break
    return alpha, converged, iterations


def _run_direct(w, X, theta, max_iter, tol):
    def f(a):
        return kernels.partial_loglik(w, X, theta, a)

    def grad(a):
        return kernels.partial_loglik_grad(w, X, theta, a)[1]

    res = bfgs_maximize(
        f, grad, np.zeros(X.shape[1]), max_iter=max_iter, grad_tol=tol
    )
    return res.argmax, res.converged, res.iterations


def _offset_vector(X, theta, alpha):
    gamma = X @ alpha
    with np.errstate(divide="ignore"):
        lt = np.log(theta)
        l1mt = np.log1p(-theta)
    return lt - np.logaddexp(0.0, gamma + l1mt)


def _run_offset(w, X, theta, max_iter, tol):
    alpha = np.zeros(X.shape[1])
    iterations = 0
    converged = False
    for k in range(1, max_iter + 1):
        offs = _offset_vector(X, theta, alpha)

        def f(a, offs=offs):
            return kernels.offset_loglik(w, X, offs, a)

        def grad(a, offs=offs):
            return kernels.offset_loglik_grad_hess(w, X, offs, a)[1]

        def hess(a, offs=offs):
            return kernels.offset_loglik_grad_hess(w, X, offs, a)[2]

        inner = newton_maximize(f, grad, hess, alpha, max_iter=50, grad_tol=tol)
        step = float(np.max(np.abs(inner.argmax - alpha)))
        alpha = inner.argmax
        iterations = k
        if step <= tol:
            converged = inner.converged
            break
    return alpha, converged, iterations


def fit_occupancy(
    data: Dataset,
    det: DetectionFit,
    method: Stage2Method | str = Stage2Method.IWLS,
    *,
    max_iter: int = 200,
    tol: float = 1e-8,
    fallback: bool = True,
    use_expected_w: bool = True,
) -> OccupancyFit:
    """Fit the occupancy coefficients with detection fixed at ``det``.

    On scoring (``iwls``) non-convergence with ``fallback`` enabled the
    same objective is re-maximised by the ``direct`` quasi-Newton path
    and the result is flagged ``fallback_used``.

    Raises :class:`RankDeficientDesign` for a deficient design,
    :class:`NonConvergence` when no usable estimate was produced, and
    :class:`BoundaryEstimate` when the estimate sits on the boundary
    (every fitted occupancy probability above ``1 - 1e-8``, or a
    coefficient beyond 30 in magnitude).
    """
    method = Stage2Method(method)
    X = data.occ_design
    w = data.w
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficientDesign("occupancy design is rank deficient")
    theta = np.asarray(det.theta_hat, dtype=np.float64)
    if theta.shape[0] != data.n_sites:
        raise DimensionMismatch(
            f"detection fit covers {theta.shape[0]} sites, dataset has {data.n_sites}"
        )

    fallback_used = False
    if method is Stage2Method.IWLS:
        alpha, converged, iterations = _run_iwls(w, X, theta, max_iter, tol)
        if not converged and fallback:
            alpha, converged, iterations = _run_direct(w, X, theta, max(max_iter, 200), tol)
            fallback_used = True
    elif method is Stage2Method.DIRECT:
        alpha, converged, iterations = _run_direct(w, X, theta, max(max_iter, 200), tol)
    else:
        alpha, converged, iterations = _run_offset(w, X, theta, max_iter, tol)

    if not np.isfinite(alpha).all():
        raise NonConvergence(
            f"occupancy fit ({method.value}) produced non-finite coefficients"
        )
    if not converged:
        warnings.warn(
            f"occupancy fit ({method.value}) stopped after {iterations} "
            "iterations without meeting the tolerance",
            ConvergenceWarning,
            stacklevel=2,
        )

    psi = kernels.logistic(X @ alpha)
    if float(np.max(np.abs(alpha))) > _BOUNDARY_NORM:
        raise BoundaryEstimate(
            f"occupancy coefficient magnitude {np.max(np.abs(alpha)):.2f} "
            "exceeds 30; the estimate is on the boundary"
        )
    if bool(np.all(psi > _BOUNDARY_PSI)):
        raise BoundaryEstimate(
            "every fitted occupancy probability is above 1 - 1e-8"
        )

    info = occupancy_information(data, alpha, det)
    try:
        var_naive = solve_spd(info, np.eye(X.shape[1]))
    except NotPositiveDefinite:
        # indefinite observed information can happen away from an
        # interior optimum; fall back to a pseudo-inverse so the fit is
        # still reportable
        var_naive = np.linalg.pinv(0.5 * (info + info.T))
    var_naive = 0.5 * (var_naive + var_naive.T)
    cross = detection_cross_term(data, alpha, det, use_expected_w=use_expected_w)
    var_sandwich = var_naive + var_naive @ cross @ det.v_beta @ cross.T @ var_naive
    var_sandwich = 0.5 * (var_sandwich + var_sandwich.T)
    psi_hat, psi_se = psi_with_se(data, alpha, var_sandwich)

    return OccupancyFit(
        alpha_hat=alpha,
        var_naive=var_naive,
        var_sandwich=var_sandwich,
        method=method,
        psi_hat=psi_hat,
        psi_se=psi_se,
        converged=converged,
        iterations=iterations,
        fallback_used=fallback_used,
    )


def fit_two_stage(
    data: Dataset,
    method: Stage2Method | str = Stage2Method.IWLS,
    *,
    max_iter: int = 200,
    tol: float = 1e-8,
    fallback: bool = True,
) -> TwoStageFit:
    """Run both stages and bundle the results."""
    from .detection import fit_detection

    det = fit_detection(data, grad_tol=tol)
    occ = fit_occupancy(
        data, det, method, max_iter=max_iter, tol=tol, fallback=fallback
    )
    return TwoStageFit(detection=det, occupancy=occ)


def occupancy_information(
    data: Dataset, alpha, det: DetectionFit, *, observed: bool = True
) -> np.ndarray:
    """Information matrix of the fixed-theta occupancy objective.

    With ``observed=True`` the realised detection indicators enter;
    replacing them by their expectation (``observed=False``) collapses
    the matrix to the weighted cross product driving the scoring
    update.
    """
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    theta = np.asarray(det.theta_hat, dtype=np.float64)
    if observed:
        wvals = data.w
    else:
        psi = kernels.logistic(data.occ_design @ alpha)
        wvals = psi * theta
    _, info = kernels.partial_score_info(wvals, data.occ_design, theta, alpha)
    return info


def detection_cross_term(
    data: Dataset, alpha, det: DetectionFit, *, use_expected_w: bool = True
) -> np.ndarray:
    """Cross derivative of the occupancy score in the detection
    coefficients, evaluated at the fitted probabilities.

    Only undetected sites contribute; when every site is detected (or
    detection is certain) the matrix is zero and the sandwich collapses
    to the naive variance.
    """
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    theta = np.asarray(det.theta_hat, dtype=np.float64)
    psi = kernels.logistic(data.occ_design @ alpha)
    wvals = psi * theta if use_expected_w else data.w
    return kernels.cross_term(
        wvals, data.occ_design, data.det_design, det.p_hat, theta, psi
    )


def sandwich_variance(
    info: np.ndarray, cross: np.ndarray, v_beta: np.ndarray
) -> np.ndarray:
    """Two-stage variance: the inverse information plus the stage-one
    propagation term."""
    info = np.asarray(info, dtype=np.float64)
    cross = np.asarray(cross, dtype=np.float64)
    v_beta = np.asarray(v_beta, dtype=np.float64)
    if cross.shape[0] != info.shape[0] or cross.shape[1] != v_beta.shape[0]:
        raise DimensionMismatch(
            f"incompatible shapes: info {info.shape}, cross {cross.shape}, "
            f"v_beta {v_beta.shape}"
        )
    inv = solve_spd(info, np.eye(info.shape[0]))
    out = inv + inv @ cross @ v_beta @ cross.T @ inv
    return 0.5 * (out + out.T)


def psi_with_se(data: Dataset, alpha, var_alpha: np.ndarray):
    """Fitted occupancy probabilities and delta-method standard errors.

    Returns ``(psi, se)`` with one entry per site.
    """
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    var_alpha = np.asarray(var_alpha, dtype=np.float64)
    X = data.occ_design
    if var_alpha.shape != (X.shape[1], X.shape[1]):
        raise DimensionMismatch(
            f"var_alpha shape {var_alpha.shape} does not match design with "
            f"{X.shape[1]} columns"
        )
    psi = kernels.logistic(X @ alpha)
    quad = np.einsum("si,ij,sj->s", X, var_alpha, X)
    se = psi * (1.0 - psi) * np.sqrt(np.maximum(quad, 0.0))
    return psi, se
