"""Coefficient tables and diagnostics for fitted models.

A :class:`FitReport` is the presentation form of a fit: one row per
coefficient with estimate, standard error, t ratio, and two-sided
normal p value, plus a diagnostics block. It serialises to a plain
dict (for JSON) and renders to an aligned text table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .fullfit import FullFit
from .model import Dataset
from .occupancy import TwoStageFit

__all__ = ["CoefficientRow", "FitReport", "two_stage_report", "full_report"]


@dataclass(frozen=True)
class CoefficientRow:
    """One coefficient with its uncertainty.

    ``t`` and ``p`` are None when the standard error is zero or not
    finite; JSON renders them as null.
    """

    block: str
    name: str
    estimate: float
    se: float
    t: float | None
    p: float | None


@dataclass(frozen=True)
class FitReport:
    """Presentation form of one fitted model."""

    model: dict
    method: str
    coefficients: tuple
    diagnostics: dict

    def to_dict(self) -> dict:
        return {
            "model": dict(self.model),
            "method": self.method,
            "coefficients": [
                {
                    "block": c.block,
                    "name": c.name,
                    "estimate": c.estimate,
                    "se": c.se,
                    "t": c.t,
                    "p": c.p,
                }
                for c in self.coefficients
            ],
            "diagnostics": dict(self.diagnostics),
        }

    def to_text(self) -> str:
        lines = [f"Method: {self.method}"]
        for part, desc in self.model.items():
            lines.append(f"{part.capitalize()} model: {desc}")
        lines.append("")
        header = f"{'block':<11} {'parameter':<16} {'estimate':>10} {'se':>9} {'t':>8} {'p':>9}"
        lines.append(header)
        lines.append("-" * len(header))
        for c in self.coefficients:
            t_txt = f"{c.t:8.3f}" if c.t is not None else f"{'--':>8}"
            p_txt = f"{c.p:9.2g}" if c.p is not None else f"{'--':>9}"
            lines.append(
                f"{c.block:<11} {c.name:<16} {c.estimate:>10.4f} {c.se:>9.4f} {t_txt} {p_txt}"
            )
        lines.append("")
        diag = " ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        lines.append(f"Diagnostics: {diag}")
        return "\n".join(lines)


def _row(block: str, name: str, estimate: float, se: float) -> CoefficientRow:
    estimate = float(estimate)
    se = float(se)
    if se > 0.0 and math.isfinite(se):
        t = estimate / se
        p = float(2.0 * ndtr(-abs(t)))
    else:
        t = None
        p = None
    return CoefficientRow(block=block, name=name, estimate=estimate, se=se, t=t, p=p)


def _names(given, prefix: str, count: int) -> list[str]:
    if given is not None and len(given) == count:
        return list(given)
    return [f"{prefix}{i}" for i in range(count)]


def _se_from_var(var: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(np.diag(var), 0.0))


def two_stage_report(data: Dataset, fit: TwoStageFit, model: dict | None = None) -> FitReport:
    """Report for a two-stage fit.

    Occupancy standard errors come from the sandwich variance, so they
    include the uncertainty propagated from the detection stage.
    """
    occ_names = _names(data.occ_names, "a", data.n_occ_coefs)
    det_names = _names(data.det_names, "b", data.n_det_coefs)
    occ_se = _se_from_var(fit.occupancy.var_sandwich)
    det_se = _se_from_var(fit.detection.v_beta)
    rows = [
        _row("occupancy", n, e, s)
        for n, e, s in zip(occ_names, fit.occupancy.alpha_hat, occ_se)
    ] + [
        _row("detection", n, e, s)
        for n, e, s in zip(det_names, fit.detection.beta_hat, det_se)
    ]
    return FitReport(
        model=model or {"occupancy": "+".join(occ_names), "detection": "+".join(det_names)},
        method=f"two-stage({fit.occupancy.method.value})",
        coefficients=tuple(rows),
        diagnostics={
            "converged": bool(fit.detection.converged and fit.occupancy.converged),
            "iterations": int(fit.occupancy.iterations),
            "fallback_used": bool(fit.occupancy.fallback_used),
            "extreme_flag": bool(fit.detection.separation_suspected),
            "detection_aic": float(fit.detection.aic),
        },
    )


def full_report(data: Dataset, fit: FullFit, model: dict | None = None) -> FitReport:
    """Report for a joint maximum likelihood fit."""
    occ_names = _names(data.occ_names, "a", data.n_occ_coefs)
    det_names = _names(data.det_names, "b", data.n_det_coefs)
    se = _se_from_var(fit.var_joint)
    p = data.n_occ_coefs
    rows = [
        _row("occupancy", n, e, s)
        for n, e, s in zip(occ_names, fit.alpha_hat, se[:p])
    ] + [
        _row("detection", n, e, s)
        for n, e, s in zip(det_names, fit.beta_hat, se[p:])
    ]
    return FitReport(
        model=model or {"occupancy": "+".join(occ_names), "detection": "+".join(det_names)},
        method="full",
        coefficients=tuple(rows),
        diagnostics={
            "converged": bool(fit.converged),
            "iterations": int(fit.iterations),
            "fallback_used": bool(fit.restarted),
            "extreme_flag": bool(fit.extreme_flag),
            "loglik": float(fit.loglik),
        },
    )
