"""Small dense maximisers and derivative checks used by the fitters.

Everything here maximises (the fitting code works with log
likelihoods directly, no sign flipping at call sites). Problems are
low dimensional, so the linear algebra is plain Cholesky on dense
matrices.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NonFiniteEvaluation, NotPositiveDefinite

__all__ = [
    "Termination",
    "OptimResult",
    "newton_maximize",
    "bfgs_maximize",
    "solve_spd",
    "fd_gradient",
    "fd_jacobian",
]

_ARMIJO = 1e-4
_MIN_STEP = 1e-14


class Termination(str, enum.Enum):
    """Why an iterative maximiser stopped."""

    GRADIENT_TOL = "gradient_tol"
    STEP_TOL = "step_tol"
    MAX_ITER = "max_iter"
    LINE_SEARCH_FAIL = "line_search_fail"


@dataclass(frozen=True)
class OptimResult:
    """Outcome of a maximiser run.

    ``converged`` is true only when the gradient tolerance was met, so
    a converged result always has ``gradient_norm <= grad_tol``.
    """

    argmax: np.ndarray
    value: float
    iterations: int
    converged: bool
    gradient_norm: float
    termination: Termination


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a x = b`` for symmetric positive definite ``a``.

    Raises :class:`NotPositiveDefinite` when the Cholesky factorisation
    fails or any pivot falls at or below ``1e-12 * max(diag(a))``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(
            f"right-hand side length {b.shape[0]} does not match matrix order {a.shape[0]}"
        )
    scale = np.max(np.abs(a)) if a.size else 0.0
    if np.max(np.abs(a - a.T)) > 1e-10 * max(1.0, scale):
        raise ValueError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    pivots = np.diag(factor[0]) ** 2
    if np.min(pivots) <= 1e-12 * max(np.max(np.diag(a)), 0.0):
        raise NotPositiveDefinite(
            f"pivot ratio {np.min(pivots):.3e} below tolerance"
        )
    return scipy.linalg.cho_solve(factor, b, check_finite=False)


def _chol_with_ridge(a: np.ndarray):
    """Cholesky of ``a``, adding an escalating ridge when needed.

    The first repair adds ``1e-8 * (1 + max|diag|)`` to the diagonal
    and each retry doubles it, ten times. As a last resort the matrix
    is replaced by a scaled identity, which turns the Newton step into
    a gradient step rather than aborting the whole fit.
    """
    try:
        return scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        pass
    ridge = 1e-8 * (1.0 + np.max(np.abs(np.diag(a))))
    eye = np.eye(a.shape[0])
    for _ in range(10):
        try:
            return scipy.linalg.cho_factor(a + ridge * eye, lower=True, check_finite=False)
        except scipy.linalg.LinAlgError:
            ridge *= 2.0
    scale = 1.0 + np.max(np.abs(np.diag(a)))
    return scipy.linalg.cho_factor(scale * eye, lower=True, check_finite=False)


def _armijo(f, x, fx, g, d):
    """Backtracking line search along the ascent direction ``d``.

    Returns ``(t, f_new)`` or ``(0.0, fx)`` when no acceptable step is
    found above the minimum step size. Once the required increase falls
    below the float resolution of ``fx`` the objective can no longer
    certify progress, so any step that does not materially decrease the
    value is accepted; this keeps the final iterations moving until the
    gradient tolerance takes over.
    """
    slope = float(g @ d)
    floor = 4.0 * np.finfo(np.float64).eps * (1.0 + abs(fx))
    t = 1.0
    while t >= _MIN_STEP:
        f_new = f(x + t * d)
        if np.isfinite(f_new):
            need = _ARMIJO * t * slope
            if f_new >= fx + need or (need <= floor and f_new >= fx - floor):
                return t, float(f_new)
        t *= 0.5
    return 0.0, fx


def _resolution_converged(gnorm: float, grad_tol: float, fx: float) -> bool:
    """Whether a step-limited stop still counts as converged.

    When the objective is a sum over many observations its magnitude
    inflates the floating point granularity of function values, and the
    smallest gradient the line search can resolve grows with it.  A
    gradient within ``grad_tol * (1 + |f|)`` of zero is then
    indistinguishable from an exact stationary point at this scale.
    """
    return gnorm <= grad_tol * (1.0 + abs(fx))


def newton_maximize(
    f,
    grad,
    hess,
    x0: np.ndarray,
    *,
    max_iter: int = 100,
    grad_tol: float = 1e-8,
    step_tol: float = 1e-12,
) -> OptimResult:
    """Damped Newton ascent with Armijo backtracking.

    The negated Hessian is repaired with an escalating ridge whenever
    it is not positive definite, so directions are always ascent
    directions.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    fx = float(f(x))
    if not np.isfinite(fx):
        raise NonFiniteEvaluation("objective is not finite at the starting point")
    g = np.asarray(grad(x), dtype=np.float64)
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    for it in range(max_iter):
        if gnorm <= grad_tol:
            return OptimResult(x, fx, it, True, gnorm, Termination.GRADIENT_TOL)
        a = -np.asarray(hess(x), dtype=np.float64)
        factor = _chol_with_ridge(0.5 * (a + a.T))
        d = scipy.linalg.cho_solve(factor, g, check_finite=False)
        t, f_new = _armijo(f, x, fx, g, d)
        if t == 0.0:
            ok = _resolution_converged(gnorm, grad_tol, fx)
            return OptimResult(x, fx, it + 1, ok, gnorm, Termination.LINE_SEARCH_FAIL)
        step = t * d
        x = x + step
        fx = f_new
        g = np.asarray(grad(x), dtype=np.float64)
        gnorm = float(np.max(np.abs(g)))
        if np.max(np.abs(step)) <= step_tol:
            if gnorm <= grad_tol:
                return OptimResult(x, fx, it + 1, True, gnorm, Termination.GRADIENT_TOL)
            ok = _resolution_converged(gnorm, grad_tol, fx)
            return OptimResult(x, fx, it + 1, ok, gnorm, Termination.STEP_TOL)
    if gnorm <= grad_tol:
        return OptimResult(x, fx, max_iter, True, gnorm, Termination.GRADIENT_TOL)
    return OptimResult(x, fx, max_iter, False, gnorm, Termination.MAX_ITER)


def bfgs_maximize(
    f,
    grad,
    x0: np.ndarray,
    *,
    max_iter: int = 200,
    grad_tol: float = 1e-8,
    step_tol: float = 1e-12,
) -> OptimResult:
    """BFGS ascent with Armijo backtracking.

    Maintains an approximation to the inverse of the negated Hessian,
    seeded as ``I / (1 + |g0|)`` so the first trial step is modest even
    when the initial gradient is large.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    n = x.shape[0]
    fx = float(f(x))
    if not np.isfinite(fx):
        raise NonFiniteEvaluation("objective is not finite at the starting point")
    g = np.asarray(grad(x), dtype=np.float64)
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    binv = np.eye(n) / (1.0 + float(np.linalg.norm(g)))
    eye = np.eye(n)
    for it in range(max_iter):
        if gnorm <= grad_tol:
            return OptimResult(x, fx, it, True, gnorm, Termination.GRADIENT_TOL)
        d = binv @ g
        if float(g @ d) <= 0.0:
            # curvature estimate has gone bad; reset to a gradient step
            binv = np.eye(n) / (1.0 + float(np.linalg.norm(g)))
            d = binv @ g
        t, f_new = _armijo(f, x, fx, g, d)
        if t == 0.0:
            ok = _resolution_converged(gnorm, grad_tol, fx)
            return OptimResult(x, fx, it + 1, ok, gnorm, Termination.LINE_SEARCH_FAIL)
        step = t * d
        x_new = x + step
        g_new = np.asarray(grad(x_new), dtype=np.float64)
        yk = g - g_new
        sy = float(yk @ step)
        if sy > 1e-10 * float(np.linalg.norm(yk)) * float(np.linalg.norm(step)):
            rho = 1.0 / sy
            left = eye - rho * np.outer(step, yk)
            binv = left @ binv @ left.T + rho * np.outer(step, step)
        x = x_new
        fx = f_new
        g = g_new
        gnorm = float(np.max(np.abs(g)))
        if np.max(np.abs(step)) <= step_tol:
            if gnorm <= grad_tol:
                return OptimResult(x, fx, it + 1, True, gnorm, Termination.GRADIENT_TOL)
            ok = _resolution_converged(gnorm, grad_tol, fx)
            return OptimResult(x, fx, it + 1, ok, gnorm, Termination.STEP_TOL)
    if gnorm <= grad_tol:
        return OptimResult(x, fx, max_iter, True, gnorm, Termination.GRADIENT_TOL)
    return OptimResult(x, fx, max_iter, False, gnorm, Termination.MAX_ITER)


def fd_gradient(f, x: np.ndarray, h: float | None = None) -> np.ndarray:
    """Central difference gradient of a scalar function.

    The default step for coordinate ``i`` is
    ``cbrt(eps) * max(1, |x_i|)``.
    """
    x = np.asarray(x, dtype=np.float64)
    base = np.cbrt(np.finfo(np.float64).eps)
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        hi = h if h is not None else base * max(1.0, abs(float(x[i])))
        xp = x.copy()
        xm = x.copy()
        xp[i] += hi
        xm[i] -= hi
        fp = float(f(xp))
        fm = float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteEvaluation(
                f"function not finite near coordinate {i} during differencing"
            )
        out[i] = (fp - fm) / (2.0 * hi)
    return out


def fd_jacobian(fun, x: np.ndarray, h: float | None = None) -> np.ndarray:
    """Central difference Jacobian of a vector-valued function.

    Row ``r`` holds the partial derivatives of output ``r``.
    """
    x = np.asarray(x, dtype=np.float64)
    base = np.cbrt(np.finfo(np.float64).eps)
    cols = []
    for i in range(x.shape[0]):
        hi = h if h is not None else base * max(1.0, abs(float(x[i])))
        xp = x.copy()
        xm = x.copy()
        xp[i] += hi
        xm[i] -= hi
        fp = np.asarray(fun(xp), dtype=np.float64)
        fm = np.asarray(fun(xm), dtype=np.float64)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NonFiniteEvaluation(
                f"function not finite near coordinate {i} during differencing"
            )
        cols.append((fp - fm) / (2.0 * hi))
    return np.stack(cols, axis=-1)
