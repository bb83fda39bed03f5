"""Numba implementations of the numerical kernels.

Loop-based twins of ``numpy_impl`` with identical contracts. Importing
this module requires numba; the package falls back to the numpy
backend when it is unavailable (see ``occufit.kernels``). Kernels are
compiled lazily and cached on disk, so the first call in a fresh
environment pays the compile cost once.
"""

from __future__ import annotations

import math

import numba
import numpy as np

P_LO = 1e-12
_P_HI = 1.0 - 1e-12

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


@numba.njit(cache=True)
def _sigmoid(x):
    if x >= 0.0:
        e = math.exp(-x)
        v = 1.0 / (1.0 + e)
    else:
        e = math.exp(x)
        v = e / (1.0 + e)
    if v < P_LO:
        return P_LO
    if v > _P_HI:
        return _P_HI
    return v


@numba.njit(cache=True)
def logistic(x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = _sigmoid(x[i])
    return out


@numba.njit(cache=True)
def detection_probs(U, beta):
    S, T, q = U.shape
    out = np.empty((S, T))
    for s in range(S):
        for j in range(T):
            lin = 0.0
            for k in range(q):
                lin += U[s, j, k] * beta[k]
            out[s, j] = _sigmoid(lin)
    return out


@numba.njit(cache=True)
def theta_rows(p):
    S, T = p.shape
    out = np.empty(S)
    for s in range(S):
        lt = 0.0
        for j in range(T):
            lt += math.log1p(-p[s, j])
        out[s] = -math.expm1(lt)
    return out


@numba.njit(cache=True)
def cond_loglik(y, w, U, beta):
    S, T, q = U.shape
    ll = 0.0
    for s in range(S):
        if w[s] == 0.0:
            continue
        lt = 0.0
        acc = 0.0
        for j in range(T):
            lin = 0.0
            for k in range(q):
                lin += U[s, j, k] * beta[k]
            p = _sigmoid(lin)
            lq = math.log1p(-p)
            lt += lq
            acc += y[s, j] * math.log(p) + (1.0 - y[s, j]) * lq
        ll += acc - math.log(-math.expm1(lt))
    return ll


@numba.njit(cache=True)
def cond_loglik_grad_hess(y, w, U, beta):
    S, T, q = U.shape
    ll = 0.0
    g = np.zeros(q)
    h = np.zeros((q, q))
    ts = np.empty(q)
    gr = np.empty(q)
    ms = np.empty((q, q))
    for s in range(S):
        if w[s] == 0.0:
            continue
        lt = 0.0
        acc = 0.0
        for k in range(q):
            ts[k] = 0.0
            gr[k] = 0.0
            for l in range(q):
                ms[k, l] = 0.0
        for j in range(T):
            lin = 0.0
            for k in range(q):
                lin += U[s, j, k] * beta[k]
            p = _sigmoid(lin)
            lq = math.log1p(-p)
            lt += lq
            acc += y[s, j] * math.log(p) + (1.0 - y[s, j]) * lq
            resid = y[s, j] - p
            pq = p * (1.0 - p)
            for k in range(q):
                uk = U[s, j, k]
                ts[k] += p * uk
                gr[k] += resid * uk
                for l in range(q):
                    ms[k, l] += pq * uk * U[s, j, l]
        theta = -math.expm1(lt)
        ratio = (1.0 - theta) / theta
        ll += acc - math.log(theta)
        for k in range(q):
            g[k] += gr[k] - ratio * ts[k]
            for l in range(q):
                h[k, l] += -ms[k, l] / theta + (ratio / theta) * ts[k] * ts[l]
    return ll, g, h


@numba.njit(cache=True)
def partial_loglik(w, X, theta, alpha):
    S, p = X.shape
    ll = 0.0
    for s in range(S):
        gam = 0.0
        for i in range(p):
            gam += X[s, i] * alpha[i]
        eta = _sigmoid(gam) * theta[s]
        ll += (1.0 - w[s]) * math.log1p(-eta) + w[s] * math.log(eta)
    return ll


@numba.njit(cache=True)
def partial_loglik_grad(w, X, theta, alpha):
    S, p = X.shape
    ll = 0.0
    g = np.zeros(p)
    for s in range(S):
        gam = 0.0
        for i in range(p):
            gam += X[s, i] * alpha[i]
        psi = _sigmoid(gam)
        eta = psi * theta[s]
        ll += (1.0 - w[s]) * math.log1p(-eta) + w[s] * math.log(eta)
        c = (w[s] - eta) * (1.0 - psi) / (1.0 - eta)
        for i in range(p):
            g[i] += c * X[s, i]
    return ll, g


@numba.njit(cache=True)
def partial_score_info(w, X, theta, alpha):
    S, p = X.shape
    score = np.zeros(p)
    info = np.zeros((p, p))
    for s in range(S):
        gam = 0.0
        for i in range(p):
            gam += X[s, i] * alpha[i]
        psi = _sigmoid(gam)
        eta = psi * theta[s]
        ome = 1.0 - eta
        c = (w[s] - eta) * (1.0 - psi) / ome
        br = (theta[s] - 2.0 * eta + eta * eta + w[s] * (1.0 - theta[s])) / (ome * ome)
        br *= psi * (1.0 - psi)
        for i in range(p):
            score[i] += c * X[s, i]
            for k in range(p):
                info[i, k] += br * X[s, i] * X[s, k]
    return score, info


@numba.njit(cache=True)
def iwls_system(w, X, theta, alpha):
    S, p = X.shape
    J = np.zeros((p, p))
    rhs = np.zeros(p)
    for s in range(S):
        gam = 0.0
        for i in range(p):
            gam += X[s, i] * alpha[i]
        psi = _sigmoid(gam)
        eta = psi * theta[s]
        u = theta[s] * psi * (1.0 - psi)
        if u < 1e-12:
            u = 1e-12
        v = eta * (1.0 - eta)
        if v < 1e-12:
            v = 1e-12
        z = u * gam + w[s] - eta
        c = u * u / v
        r = u / v * z
        for i in range(p):
            rhs[i] += r * X[s, i]
            for k in range(p):
                J[i, k] += c * X[s, i] * X[s, k]
    return J, rhs


@numba.njit(cache=True)
def cross_term(wvals, X, U, p, theta, psi):
    S, T, q = U.shape
    pdim = X.shape[1]
    B = np.zeros((pdim, q))
    su = np.empty(q)
    for s in range(S):
        eta = psi[s] * theta[s]
        ome = 1.0 - eta
        d = psi[s] * (1.0 - psi[s]) * (1.0 - wvals[s]) * (1.0 - theta[s]) / (ome * ome)
        for k in range(q):
            su[k] = 0.0
        for j in range(T):
            for k in range(q):
                su[k] += p[s, j] * U[s, j, k]
        for i in range(pdim):
            for k in range(q):
                B[i, k] -= d * X[s, i] * su[k]
    return B


@numba.njit(cache=True)
def full_loglik(y, w, X, U, alpha, beta):
    S, T, q = U.shape
    pdim = X.shape[1]
    ll = 0.0
    for s in range(S):
        gam = 0.0
        for i in range(pdim):
            gam += X[s, i] * alpha[i]
        psi = _sigmoid(gam)
        lt = 0.0
        det = 0.0
        for j in range(T):
            lin = 0.0
            for k in range(q):
                lin += U[s, j, k] * beta[k]
            p = _sigmoid(lin)
            lq = math.log1p(-p)
            lt += lq
            det += y[s, j] * math.log(p) + (1.0 - y[s, j]) * lq
        theta = -math.expm1(lt)
        if w[s] == 0.0:
            ll += math.log1p(-psi * theta)
        else:
            ll += math.log(psi) + det
    return ll


@numba.njit(cache=True)
def full_loglik_grad(y, w, X, U, alpha, beta):
    S, T, q = U.shape
    pdim = X.shape[1]
    ll = 0.0
    ga = np.zeros(pdim)
    gb = np.zeros(q)
    ts = np.empty(q)
    gr = np.empty(q)
    for s in range(S):
        gam = 0.0
        for i in range(pdim):
            gam += X[s, i] * alpha[i]
        psi = _sigmoid(gam)
        lt = 0.0
        det = 0.0
        for k in range(q):
            ts[k] = 0.0
            gr[k] = 0.0
        for j in range(T):
            lin = 0.0
            for k in range(q):
                lin += U[s, j, k] * beta[k]
            p = _sigmoid(lin)
            lq = math.log1p(-p)
            lt += lq
            det += y[s, j] * math.log(p) + (1.0 - y[s, j]) * lq
            resid = y[s, j] - p
            for k in range(q):
                ts[k] += p * U[s, j, k]
                gr[k] += resid * U[s, j, k]
        theta = -math.expm1(lt)
        if w[s] == 0.0:
            ome = 1.0 - psi * theta
            ll += math.log(ome)
            ca = -theta * psi * (1.0 - psi) / ome
            cb = psi * (1.0 - theta) / ome
            for i in range(pdim):
                ga[i] += ca * X[s, i]
            for k in range(q):
                gb[k] -= cb * ts[k]
        else:
            ll += math.log(psi) + det
            ca = 1.0 - psi
            for i in range(pdim):
                ga[i] += ca * X[s, i]
            for k in range(q):
                gb[k] += gr[k]
    return ll, ga, gb


@numba.njit(cache=True)
def offset_loglik(w, X, offs, alpha):
    S, p = X.shape
    ll = 0.0
    for s in range(S):
        lin = offs[s]
        for i in range(p):
            lin += X[s, i] * alpha[i]
        eta = _sigmoid(lin)
        ll += w[s] * math.log(eta) + (1.0 - w[s]) * math.log1p(-eta)
    return ll


@numba.njit(cache=True)
def offset_loglik_grad_hess(w, X, offs, alpha):
    S, p = X.shape
    ll = 0.0
    g = np.zeros(p)
    h = np.zeros((p, p))
    for s in range(S):
        lin = offs[s]
        for i in range(p):
            lin += X[s, i] * alpha[i]
        eta = _sigmoid(lin)
        ll += w[s] * math.log(eta) + (1.0 - w[s]) * math.log1p(-eta)
        r = w[s] - eta
        wt = eta * (1.0 - eta)
        for i in range(p):
            g[i] += r * X[s, i]
            for k in range(p):
                h[i, k] -= wt * X[s, i] * X[s, k]
    return ll, g, h


@numba.njit(cache=True)
def xoshiro_fill(state, out):
    s0 = state[0]
    s1 = state[1]
    s2 = state[2]
    s3 = state[3]
    r23 = np.uint64(23)
    r41 = np.uint64(41)
    r17 = np.uint64(17)
    r45 = np.uint64(45)
    r19 = np.uint64(19)
    for i in range(out.shape[0]):
        tmp = s0 + s3
        out[i] = ((tmp << r23) | (tmp >> r41)) + s0
        t = s1 << r17
        s2 = s2 ^ s0
        s3 = s3 ^ s1
        s1 = s1 ^ s2
        s0 = s0 ^ s3
        s2 = s2 ^ t
        s3 = (s3 << r45) | (s3 >> r19)
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
