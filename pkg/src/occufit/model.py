"""Core data model and likelihood components.

A study records, for each of S sites, a binary detection history over
T repeated visits together with site-level occupancy covariates and
per-visit detection covariates. Site occupancy and per-visit detection
both follow logistic regressions; a site yields no detections either
because it is unoccupied or because every visit missed.

This module owns the immutable :class:`Dataset` container, the
probability surfaces derived from coefficient values, and the three
log likelihoods the fitters maximise: the joint likelihood, the
detection likelihood conditional on detection, and the fixed-theta
occupancy objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .errors import (
    DimensionMismatch,
    EmptyInput,
    InvalidConfig,
    LengthMismatch,
    NoDetectedSites,
    NonBinaryDetection,
)

__all__ = [
    "Dataset",
    "Coefficients",
    "ProbabilitySurface",
    "probability_surface",
    "logistic",
    "detection_probs",
    "theta_from_p",
    "full_log_likelihood",
    "full_score",
    "conditional_detection_loglik",
    "conditional_detection_score",
    "partial_occupancy_loglik",
    "partial_occupancy_score",
    "detection_indicator_loglik",
]


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


def _vec(x, name: str) -> np.ndarray:
    out = np.ascontiguousarray(x, dtype=np.float64)
    if out.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional, got shape {out.shape}")
    return out


@dataclass(frozen=True)
class Dataset:
    """Immutable container for one occupancy study.

    Parameters
    ----------
    detections : array (S, T)
        Binary detection histories, one row per site.
    occ_design : array (S, p)
        Occupancy design matrix.
    det_design : array (S, T, q) or (S, q)
        Detection design; a two-dimensional input is treated as
        visit-constant and broadcast across visits.
    site_labels, occ_names, det_names : optional tuples of str
        Labels carried through to reports; never used numerically.
    """

    detections: np.ndarray
    occ_design: np.ndarray
    det_design: np.ndarray
    site_labels: tuple | None = None
    occ_names: tuple | None = None
    det_names: tuple | None = None

    def __post_init__(self):
        y = np.asarray(self.detections, dtype=np.float64)
        if y.ndim != 2:
            raise DimensionMismatch(f"detections must be (S, T), got shape {y.shape}")
        s, t = y.shape
        if s == 0:
            raise EmptyInput("dataset has no sites")
        if t < 2:
            raise InvalidConfig(f"at least 2 visits are required, got {t}")
        bad = (y != 0.0) & (y != 1.0)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise NonBinaryDetection(
                f"detections[{i}, {j}] = {y[i, j]!r} is not 0 or 1"
            )

        x = np.asarray(self.occ_design, dtype=np.float64)
        if x.ndim != 2:
            raise DimensionMismatch(f"occ_design must be (S, p), got shape {x.shape}")
        if x.shape[0] != s:
            raise DimensionMismatch(
                f"occ_design has {x.shape[0]} rows for {s} sites"
            )

        u = np.asarray(self.det_design, dtype=np.float64)
        if u.ndim == 2:
            if u.shape[0] != s:
                raise DimensionMismatch(
                    f"det_design has {u.shape[0]} rows for {s} sites"
                )
            u = np.broadcast_to(u[:, None, :], (s, t, u.shape[1]))
        elif u.ndim == 3:
            if u.shape[0] != s or u.shape[1] != t:
                raise DimensionMismatch(
                    f"det_design shape {u.shape} does not match ({s}, {t}, q)"
                )
        else:
            raise DimensionMismatch(
                f"det_design must be (S, T, q) or (S, q), got shape {u.shape}"
            )

        for arr, name in ((x, "occ_design"), (u, "det_design")):
            if not np.isfinite(arr).all():
                raise InvalidConfig(f"{name} contains non-finite values")

        if self.site_labels is not None and len(self.site_labels) != s:
            raise LengthMismatch(
                f"{len(self.site_labels)} site labels for {s} sites"
            )
        if self.occ_names is not None and len(self.occ_names) != x.shape[1]:
            raise LengthMismatch(
                f"{len(self.occ_names)} occupancy names for {x.shape[1]} columns"
            )
        if self.det_names is not None and len(self.det_names) != u.shape[2]:
            raise LengthMismatch(
                f"{len(self.det_names)} detection names for {u.shape[2]} columns"
            )

        object.__setattr__(self, "detections", _freeze(y))
        object.__setattr__(self, "occ_design", _freeze(x))
        object.__setattr__(self, "det_design", _freeze(u))
        if self.site_labels is not None:
            object.__setattr__(self, "site_labels", tuple(self.site_labels))
        if self.occ_names is not None:
            object.__setattr__(self, "occ_names", tuple(str(v) for v in self.occ_names))
        if self.det_names is not None:
            object.__setattr__(self, "det_names", tuple(str(v) for v in self.det_names))

    @property
    def n_sites(self) -> int:
        return self.detections.shape[0]

    @property
    def n_visits(self) -> int:
        return self.detections.shape[1]

    @property
    def n_occ_coefs(self) -> int:
        return self.occ_design.shape[1]

    @property
    def n_det_coefs(self) -> int:
        return self.det_design.shape[2]

    @cached_property
    def w(self) -> np.ndarray:
        """Per-site detection indicator (1.0 when any visit detected)."""
        out = (self.detections.max(axis=1) > 0.0).astype(np.float64)
        out.setflags(write=False)
        return out

    @property
    def n_detected(self) -> int:
        return int(self.w.sum())

    @cached_property
    def det_time_constant(self) -> bool:
        """True when no detection covariate varies across visits."""
        first = self.det_design[:, :1, :]
        return bool(np.all(self.det_design == first))


@dataclass(frozen=True)
class Coefficients:
    """Occupancy (alpha) and detection (beta) coefficient vectors."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = _vec(self.alpha, "alpha")
        b = _vec(self.beta, "beta")
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise InvalidConfig("coefficients must be finite")
        object.__setattr__(self, "alpha", _freeze(a))
        object.__setattr__(self, "beta", _freeze(b))


@dataclass(frozen=True)
class ProbabilitySurface:
    """Per-site probabilities implied by one coefficient value.

    ``psi`` is occupancy, ``p`` the (S, T) visit detection matrix,
    ``theta`` the chance of at least one detection given occupancy,
    and ``eta = psi * theta`` the unconditional detection chance.
    """

    psi: np.ndarray
    p: np.ndarray
    theta: np.ndarray
    eta: np.ndarray


def _check_lengths(data: Dataset, alpha=None, beta=None):
    if alpha is not None and alpha.shape[0] != data.n_occ_coefs:
        raise DimensionMismatch(
            f"alpha has length {alpha.shape[0]}, occupancy design has "
            f"{data.n_occ_coefs} columns"
        )
    if beta is not None and beta.shape[0] != data.n_det_coefs:
        raise DimensionMismatch(
            f"beta has length {beta.shape[0]}, detection design has "
            f"{data.n_det_coefs} columns"
        )


def logistic(x):
    """Inverse logit, clamped away from 0 and 1 by 1e-12.

    Accepts scalars or arrays and preserves shape.
    """
    arr = np.asarray(x, dtype=np.float64)
    flat = kernels.logistic(np.ascontiguousarray(arr.ravel()))
    if arr.ndim == 0:
        return float(flat[0])
    return flat.reshape(arr.shape)


def detection_probs(data: Dataset, beta) -> np.ndarray:
    """Visit detection probabilities under ``beta``, shape (S, T)."""
    beta = _vec(beta, "beta")
    _check_lengths(data, beta=beta)
    return kernels.detection_probs(data.det_design, beta)


def theta_from_p(p) -> np.ndarray | float:
    """Probability of at least one detection from visit probabilities.

    Accepts one site's vector (returns a float) or an (S, T) matrix
    (returns a vector). Accumulates ``log1p(-p)`` so near-zero and
    near-one probabilities keep full precision.
    """
    arr = np.asarray(p, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("no visit probabilities given")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise InvalidConfig("visit probabilities must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        acc = np.log1p(-arr).sum(axis=-1)
    out = -np.expm1(acc)
    if arr.ndim == 1:
        return float(out)
    return out


def probability_surface(data: Dataset, coefs: Coefficients) -> ProbabilitySurface:
    """All per-site probabilities implied by ``coefs``."""
    _check_lengths(data, coefs.alpha, coefs.beta)
    psi = kernels.logistic(data.occ_design @ coefs.alpha)
    p = kernels.detection_probs(data.det_design, coefs.beta)
    theta = kernels.theta_rows(p)
    return ProbabilitySurface(psi=psi, p=p, theta=theta, eta=psi * theta)


def full_log_likelihood(data: Dataset, coefs: Coefficients) -> float:
    """Joint log likelihood of occupancy and detection coefficients."""
    _check_lengths(data, coefs.alpha, coefs.beta)
    return kernels.full_loglik(
        data.detections, data.w, data.occ_design, data.det_design,
        coefs.alpha, coefs.beta,
    )


def full_score(data: Dataset, coefs: Coefficients) -> np.ndarray:
    """Gradient of the joint log likelihood, alpha block first."""
    _check_lengths(data, coefs.alpha, coefs.beta)
    _, ga, gb = kernels.full_loglik_grad(
        data.detections, data.w, data.occ_design, data.det_design,
        coefs.alpha, coefs.beta,
    )
    return np.concatenate([ga, gb])


def conditional_detection_loglik(data: Dataset, beta) -> float:
    """Detection log likelihood conditional on at-least-one detection,
    over the detected sites only."""
    beta = _vec(beta, "beta")
    _check_lengths(data, beta=beta)
    if data.n_detected == 0:
        raise NoDetectedSites("no site has a detection")
    return kernels.cond_loglik(data.detections, data.w, data.det_design, beta)


def conditional_detection_score(data: Dataset, beta) -> np.ndarray:
    """Gradient of :func:`conditional_detection_loglik` in ``beta``."""
    beta = _vec(beta, "beta")
    _check_lengths(data, beta=beta)
    if data.n_detected == 0:
        raise NoDetectedSites("no site has a detection")
    _, g, _ = kernels.cond_loglik_grad_hess(
        data.detections, data.w, data.det_design, beta
    )
    return g


def _check_theta(data: Dataset, theta) -> np.ndarray:
    theta = _vec(theta, "theta")
    if theta.shape[0] != data.n_sites:
        raise DimensionMismatch(
            f"theta has length {theta.shape[0]} for {data.n_sites} sites"
        )
    if np.any(theta <= 0.0) or np.any(theta > 1.0):
        raise InvalidConfig("theta entries must lie in (0, 1]")
    return theta


def partial_occupancy_loglik(data: Dataset, alpha, theta) -> float:
    """Log likelihood of the detection indicators with the per-site
    detection probability held fixed at ``theta``."""
    alpha = _vec(alpha, "alpha")
    _check_lengths(data, alpha=alpha)
    theta = _check_theta(data, theta)
    return kernels.partial_loglik(data.w, data.occ_design, theta, alpha)


def partial_occupancy_score(data: Dataset, alpha, theta) -> np.ndarray:
    """Gradient of :func:`partial_occupancy_loglik` in ``alpha``."""
    alpha = _vec(alpha, "alpha")
    _check_lengths(data, alpha=alpha)
    theta = _check_theta(data, theta)
    _, g = kernels.partial_loglik_grad(data.w, data.occ_design, theta, alpha)
    return g


def detection_indicator_loglik(w, eta) -> float:
    """Bernoulli log likelihood of detection indicators ``w`` under
    unconditional detection probabilities ``eta``."""
    w = _vec(w, "w")
    eta = _vec(eta, "eta")
    if w.shape[0] != eta.shape[0]:
        raise LengthMismatch(
            f"w has length {w.shape[0]}, eta has length {eta.shape[0]}"
        )
    if w.shape[0] == 0:
        raise EmptyInput("no sites given")
    if np.any(eta <= 0.0) or np.any(eta >= 1.0):
        raise InvalidConfig("eta entries must lie in (0, 1)")
    return float(np.sum(w * np.log(eta) + (1.0 - w) * np.log1p(-eta)))
