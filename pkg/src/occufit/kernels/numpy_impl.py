"""Vectorised numpy implementations of the numerical kernels.

These are the reference semantics for the package. The numba twins in
``numba_impl`` implement the same contracts with explicit loops; the
test suite checks the two backends agree to float round-off.

Conventions shared by every kernel:

* ``y``      detection history, float64, shape (S, T), entries 0.0/1.0
* ``w``      site detection indicator, float64, shape (S,), 1.0 when a
             site has at least one detection
* ``X``      occupancy design, shape (S, p)
* ``U``      detection design, shape (S, T, q)
* probabilities are clamped into [P_LO, 1 - P_LO] so logs stay finite
* per-site non-detection products are accumulated as sums of
  ``log1p(-p)``; the probability of at least one detection is then
  ``-expm1(sum)``, which is accurate when the p's are tiny or huge
"""

from __future__ import annotations

import numpy as np

P_LO = 1e-12

__all__ = [
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


def logistic(x: np.ndarray) -> np.ndarray:
    """Clamped inverse logit, overflow-safe for any finite input."""
    x = np.asarray(x, dtype=np.float64)
    # evaluate exp on the non-positive side only so it never overflows
    e = np.exp(-np.abs(x))
    out = np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))
    return np.clip(out, P_LO, 1.0 - P_LO)


def detection_probs(U: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Per-visit detection probabilities, shape (S, T)."""
    return logistic(U @ beta)


def theta_rows(p: np.ndarray) -> np.ndarray:
    """Probability of at least one detection per site, shape (S,)."""
    return -np.expm1(np.log1p(-p).sum(axis=1))


def cond_loglik(y, w, U, beta) -> float:
    """Detection log likelihood conditional on detection, summed over
    sites with at least one detection."""
    p = detection_probs(U, beta)
    lq = np.log1p(-p)
    theta = -np.expm1(lq.sum(axis=1))
    site = (y * np.log(p) + (1.0 - y) * lq).sum(axis=1) - np.log(theta)
    return float(site @ w)


def cond_loglik_grad_hess(y, w, U, beta):
    """Value, gradient, and Hessian of the conditional detection
    log likelihood at ``beta``."""
    p = detection_probs(U, beta)
    lq = np.log1p(-p)
    theta = -np.expm1(lq.sum(axis=1))
    site = (y * np.log(p) + (1.0 - y) * lq).sum(axis=1) - np.log(theta)
    ll = float(site @ w)

    resid = y - p
    tsum = np.einsum("st,stk->sk", p, U)
    ratio = (1.0 - theta) / theta
    g = np.einsum("s,sk->k", w, np.einsum("st,stk->sk", resid, U) - ratio[:, None] * tsum)

    pq = p * (1.0 - p)
    msum = np.einsum("st,stk,stl->skl", pq, U, U)
    outer = np.einsum("sk,sl->skl", tsum, tsum)
    hsite = -msum / theta[:, None, None] + (ratio / theta)[:, None, None] * outer
    h = np.einsum("s,skl->kl", w, hsite)
    return ll, g, h


def partial_loglik(w, X, theta, alpha) -> float:
    """Bernoulli log likelihood of the detection indicators with the
    per-site detection probability held fixed at ``theta``."""
    psi = logistic(X @ alpha)
    eta = psi * theta
    return float(np.sum((1.0 - w) * np.log1p(-eta) + w * np.log(eta)))


def partial_loglik_grad(w, X, theta, alpha):
    """Value and gradient of :func:`partial_loglik` in ``alpha``."""
    psi = logistic(X @ alpha)
    eta = psi * theta
    ll = float(np.sum((1.0 - w) * np.log1p(-eta) + w * np.log(eta)))
    coef = (w - eta) * (1.0 - psi) / (1.0 - eta)
    return ll, X.T @ coef


def partial_score_info(w, X, theta, alpha):
    """Score vector and observed information of the fixed-theta
    occupancy objective at ``alpha``.

    The information uses the realised detection indicators; replacing
    them by their expectation collapses it to the weighted cross
    product used by the scoring update.
    """
    psi = logistic(X @ alpha)
    eta = psi * theta
    one_m_eta = 1.0 - eta
    score = X.T @ ((w - eta) * (1.0 - psi) / one_m_eta)
    bracket = (theta - 2.0 * eta + eta * eta + w * (1.0 - theta)) / (one_m_eta * one_m_eta)
    wts = bracket * psi * (1.0 - psi)
    info = (X * wts[:, None]).T @ X
    return score, info


def iwls_system(w, X, theta, alpha):
    """Normal equations for one iteratively reweighted least squares
    step of the fixed-theta occupancy fit.

    Returns ``(J, rhs)`` with the update solving ``J a = rhs``. Both
    weight vectors are floored at 1e-12 so boundary sites cannot zero
    out the system.
    """
    gamma = X @ alpha
    psi = logistic(gamma)
    eta = psi * theta
    u = np.maximum(theta * psi * (1.0 - psi), 1e-12)
    v = np.maximum(eta * (1.0 - eta), 1e-12)
    z = u * gamma + w - eta
    c = u * u / v
    J = (X * c[:, None]).T @ X
    rhs = X.T @ (u / v * z)
    return J, rhs


def cross_term(wvals, X, U, p, theta, psi):
    """Cross derivative of the occupancy score with respect to the
    detection coefficients, shape (p_occ, q).

    ``wvals`` may hold the realised indicators or their expectation
    ``psi * theta``; only undetected mass contributes either way.
    """
    eta = psi * theta
    d = psi * (1.0 - psi) * (1.0 - wvals) * (1.0 - theta) / ((1.0 - eta) ** 2)
    su = np.einsum("st,stk->sk", p, U)
    return -(X * d[:, None]).T @ su


def full_loglik(y, w, X, U, alpha, beta) -> float:
    """Joint occupancy-detection log likelihood."""
    psi = logistic(X @ alpha)
    p = detection_probs(U, beta)
    lq = np.log1p(-p)
    theta = -np.expm1(lq.sum(axis=1))
    det = (y * np.log(p) + (1.0 - y) * lq).sum(axis=1)
    site = (1.0 - w) * np.log1p(-psi * theta) + w * (np.log(psi) + det)
    return float(site.sum())


def full_loglik_grad(y, w, X, U, alpha, beta):
    """Value and gradient blocks of :func:`full_loglik`.

    Returns ``(ll, g_alpha, g_beta)``.
    """
    psi = logistic(X @ alpha)
    p = detection_probs(U, beta)
    lq = np.log1p(-p)
    theta = -np.expm1(lq.sum(axis=1))
    det = (y * np.log(p) + (1.0 - y) * lq).sum(axis=1)
    site = (1.0 - w) * np.log1p(-psi * theta) + w * (np.log(psi) + det)
    ll = float(site.sum())

    one_m_eta = 1.0 - psi * theta
    ca = w * (1.0 - psi) - (1.0 - w) * theta * psi * (1.0 - psi) / one_m_eta
    ga = X.T @ ca

    tsum = np.einsum("st,stk->sk", p, U)
    rb = np.einsum("st,stk->sk", y - p, U)
    cb = (1.0 - w) * psi * (1.0 - theta) / one_m_eta
    gb = np.einsum("s,sk->k", w, rb) - np.einsum("s,sk->k", cb, tsum)
    return ll, ga, gb


def offset_loglik(w, X, offs, alpha) -> float:
    """Bernoulli log likelihood of ``w`` under a logistic model with a
    fixed per-site offset."""
    eta = logistic(X @ alpha + offs)
    return float(np.sum(w * np.log(eta) + (1.0 - w) * np.log1p(-eta)))


def offset_loglik_grad_hess(w, X, offs, alpha):
    """Value, gradient, and Hessian of :func:`offset_loglik`."""
    eta = logistic(X @ alpha + offs)
    ll = float(np.sum(w * np.log(eta) + (1.0 - w) * np.log1p(-eta)))
    g = X.T @ (w - eta)
    wts = eta * (1.0 - eta)
    h = -(X * wts[:, None]).T @ X
    return ll, g, h


_MASK64 = (1 << 64) - 1


def xoshiro_fill(state: np.ndarray, out: np.ndarray) -> None:
    """Fill ``out`` (uint64) from a 4-word xoshiro256++ state, advancing
    the state in place."""
    s0 = int(state[0])
    s1 = int(state[1])
    s2 = int(state[2])
    s3 = int(state[3])
    for i in range(out.shape[0]):
        tmp = (s0 + s3) & _MASK64
        out[i] = (((tmp << 23) | (tmp >> 41)) + s0) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK64
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
