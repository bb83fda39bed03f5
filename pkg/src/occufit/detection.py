"""Stage one: detection coefficients from the detected sites.

Sites with no detections carry no information about detection once
occupancy is unknown, so the detection coefficients are estimated by
maximising the detection likelihood conditional on at-least-one
detection, summed over detected sites. The fitted visit probabilities
then give every site (detected or not) an estimated chance of being
detected at least once, which stage two treats as known.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    ConvergenceWarning,
    NoDetectedSites,
    NotPositiveDefinite,
    RankDeficientDesign,
    SeparationSuspected,
)
from .model import Dataset
from .optim import newton_maximize, solve_spd

__all__ = ["DetectionModel", "DetectionFit", "fit_detection", "detection_aic"]

_SEPARATION_NORM = 30.0


class DetectionModel(str, enum.Enum):
    """Structure tag for a detection design."""

    TIME_INDEPENDENT = "time_independent"
    TIME_VARYING_INTERCEPTS = "time_varying_intercepts"
    TIME_VARYING_COVARIATES = "time_varying_covariates"
    BOTH = "both"


@dataclass(frozen=True)
class DetectionFit:
    """Result of the conditional detection fit.

    ``theta_hat`` and ``p_hat`` cover every site in the dataset, not
    just the detected ones, so stage two can use them directly.
    """

    beta_hat: np.ndarray
    v_beta: np.ndarray
    cond_loglik: float
    aic: float
    p_hat: np.ndarray
    theta_hat: np.ndarray
    converged: bool
    iterations: int
    model_tag: DetectionModel
    separation_suspected: bool = field(default=False)


def _infer_model_tag(data: Dataset) -> DetectionModel:
    if data.det_time_constant:
        return DetectionModel.TIME_INDEPENDENT
    return DetectionModel.TIME_VARYING_COVARIATES


def fit_detection(
    data: Dataset,
    model: DetectionModel | None = None,
    *,
    max_iter: int = 100,
    grad_tol: float = 1e-8,
) -> DetectionFit:
    """Fit the detection coefficients by Newton ascent from zero.

    Raises :class:`NoDetectedSites` when nothing was ever detected and
    :class:`RankDeficientDesign` when the detection design restricted
    to detected site-visits does not have full column rank. A fit that
    stops without meeting the tolerance is still returned, flagged
    ``converged=False`` with a :class:`ConvergenceWarning`.
    """
    if data.n_detected == 0:
        raise NoDetectedSites("no site has a detection; cannot fit detection model")
    mask = data.w > 0.0
    q = data.n_det_coefs
    rows = data.det_design[mask].reshape(-1, q)
    if np.linalg.matrix_rank(rows) < q:
        raise RankDeficientDesign(
            "detection design on detected sites is rank deficient"
        )

    y = data.detections
    w = data.w
    u = data.det_design

    def f(b):
        return kernels.cond_loglik(y, w, u, b)

    def grad(b):
        return kernels.cond_loglik_grad_hess(y, w, u, b)[1]

    def hess(b):
        return kernels.cond_loglik_grad_hess(y, w, u, b)[2]

    res = newton_maximize(
        f, grad, hess, np.zeros(q), max_iter=max_iter, grad_tol=grad_tol
    )
    beta_hat = res.argmax
    if not res.converged:
        warnings.warn(
            f"detection fit stopped after {res.iterations} iterations "
            f"({res.termination.value}); gradient norm {res.gradient_norm:.2e}",
            ConvergenceWarning,
            stacklevel=2,
        )

    separation = bool(np.max(np.abs(beta_hat)) > _SEPARATION_NORM)
    if separation:
        warnings.warn(
            "detection coefficients are extreme; complete or quasi-complete "
            "separation of the detection histories is likely",
            SeparationSuspected,
            stacklevel=2,
        )

    ll, _, h = kernels.cond_loglik_grad_hess(y, w, u, beta_hat)
    try:
        v_beta = solve_spd(-h, np.eye(q))
    except NotPositiveDefinite:
        # near-singular information at the optimum; report the
        # pseudo-inverse rather than refusing the fit
        v_beta = np.linalg.pinv(-0.5 * (h + h.T))
    v_beta = 0.5 * (v_beta + v_beta.T)

    p_hat = kernels.detection_probs(u, beta_hat)
    theta_hat = kernels.theta_rows(p_hat)
    return DetectionFit(
        beta_hat=beta_hat,
        v_beta=v_beta,
        cond_loglik=ll,
        aic=-2.0 * ll + 2.0 * q,
        p_hat=p_hat,
        theta_hat=theta_hat,
        converged=res.converged,
        iterations=res.iterations,
        model_tag=model if model is not None else _infer_model_tag(data),
        separation_suspected=separation,
    )


def detection_aic(fit: DetectionFit) -> float:
    """Information criterion for comparing detection structures fitted
    to the same detected sites: twice the coefficient count minus twice
    the conditional log likelihood."""
    return -2.0 * fit.cond_loglik + 2.0 * fit.beta_hat.shape[0]
