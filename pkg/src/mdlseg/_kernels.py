"""Compiled Cochrane-Orcutt scoring used as the GA fitness.

Mirrors :func:`mdlseg.regression.cochrane_orcutt` step for step (seasonal
Yule-Walker, exact edge whitening, equilibrated normal equations, the same
stopping rule) but returns only what the search needs: the likelihood part
of the objective. The numpy implementation stays the reference; the test
suite holds the two to 1e-9 relative agreement.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

OK, DEGENERATE, SINGULAR, NONPOSITIVE, NONCAUSAL, RANK = 0, 1, 2, 3, 4, 5


@njit(cache=True)
def _acvf(e, T, h_max):
    N = e.shape[0]
    d = N // T
    g = np.zeros((T, h_max + 1))
    for t in range(N):
        s = t % T
        for h in range(h_max + 1):
            if t - h >= 0:
                g[s, h] += e[t] * e[t - h]
    return g / d


@njit(cache=True)
def _yule_walker(g, T, p):
    phi = np.zeros((T, p))
    sigma2 = np.empty(T)
    for s in range(T):
        acc = g[s, 0]
        if p > 0:
            G = np.empty((p, p))
            r = np.empty(p)
            for j in range(1, p + 1):
                r[j - 1] = g[s, j]
                for k in range(1, p + 1):
                    if k <= j:
                        G[j - 1, k - 1] = g[(s - k) % T, j - k]
                    else:
                        G[j - 1, k - 1] = g[(s - j) % T, k - j]
            if p == 1:
                # a 1x1 system is singular only when it is zero
                if not (G[0, 0] != 0.0 and np.isfinite(G[0, 0])):
                    return phi, sigma2, SINGULAR
            else:
                sv = np.linalg.svd(G)[1]
                if not (sv[-1] > 1e-12 * sv[0]) or not np.isfinite(sv[0]):
                    return phi, sigma2, SINGULAR
            sol = np.linalg.solve(G, r)
            for k in range(p):
                phi[s, k] = sol[k]
                acc -= sol[k] * r[k]
        if not acc > 0:
            return phi, sigma2, NONPOSITIVE
        sigma2[s] = acc
    return phi, sigma2, OK


@njit(cache=True)
def _radius_ok(rho):
    if not np.isfinite(rho) or rho >= 1.0:
        return False
    if rho > 0 and 2 * 1000 * math.log(rho) > math.log(1e-12):
        return False
    return True


@njit(cache=True)
def _edge_cholesky(phi, sigma2, T, p):
    """Cholesky factor of Cov(e_1..e_p); status NONCAUSAL on failure."""
    L = np.zeros((p, p))
    if p == 1:
        gain, acc = 1.0, 0.0
        for s in range(T):
            gain *= phi[s, 0]
            acc = phi[s, 0] * phi[s, 0] * acc + sigma2[s]
        if not _radius_ok(abs(gain)):
            return L, NONCAUSAL
        var = acc / (1.0 - gain * gain)
        var = phi[0, 0] * phi[0, 0] * var + sigma2[0]
        if not var > 0:
            return L, NONCAUSAL
        L[0, 0] = math.sqrt(var)
        return L, OK
    r = p
    Phi = np.eye(r)
    Q = np.zeros((r, r))
    A = np.zeros((r, r))
    for i in range(1, r):
        A[i, i - 1] = 1.0
    for s in range(T):
        for k in range(p):
            A[0, k] = phi[s, k]
        Phi = A @ Phi
        Q = A @ Q @ A.T
        Q[0, 0] += sigma2[s]
    ev = np.linalg.eigvals(Phi.astype(np.complex128))
    rho = 0.0
    for z in ev:
        rho = max(rho, abs(z))
    if not _radius_ok(rho):
        return L, NONCAUSAL
    K = np.eye(r * r)
    for a in range(r):
        for b in range(r):
            for c in range(r):
                for d in range(r):
                    K[a * r + c, b * r + d] -= Phi[a, b] * Phi[c, d]
    P = np.linalg.solve(K, Q.copy().reshape(r * r)).reshape(r, r)
    P = 0.5 * (P + P.T)
    # propagate to the end of season p (0-based p-1) of the first cycle
    for s in range((p - 1) % T + 1):
        for k in range(p):
            A[0, k] = phi[s, k]
        P = A @ P @ A.T
        P[0, 0] += sigma2[s]
    B = np.empty((p, p))
    for i in range(p):
        for j in range(p):
            B[i, j] = P[p - 1 - i, p - 1 - j]
    for i in range(p):
        for j in range(i + 1):
            acc = B[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            if i == j:
                if not acc > 0:
                    return L, NONCAUSAL
                L[i, i] = math.sqrt(acc)
            else:
                L[i, j] = acc / L[j, j]
    return L, OK


@njit(cache=True)
def _whiten(Y, phi, sigma2, L, T, p):
    """Standardized innovations of every column of Y (N, k)."""
    N, k = Y.shape
    out = np.empty((N, k))
    inv_sd = 1.0 / np.sqrt(sigma2)
    for i in range(p):
        for c in range(k):
            acc = Y[i, c]
            for j in range(i):
                acc -= L[i, j] * out[j, c]
            out[i, c] = acc / L[i, i]
    for t in range(p, N):
        s = t % T
        w = inv_sd[s]
        for c in range(k):
            acc = Y[t, c]
            for j in range(p):
                acc -= phi[s, j] * Y[t - 1 - j, c]
            out[t, c] = acc * w
    return out


@njit(cache=True)
def _normal_solve(Aw, yw):
    """Least squares via column-equilibrated normal equations and Cholesky."""
    k = Aw.shape[1]
    G0 = Aw.T @ Aw
    rhs0 = Aw.T @ yw
    scale = np.empty(k)
    for j in range(k):
        scale[j] = math.sqrt(G0[j, j]) if G0[j, j] > 0 else 1.0
    G = np.empty((k, k))
    rhs = np.empty(k)
    for i in range(k):
        rhs[i] = rhs0[i] / scale[i]
        for j in range(k):
            G[i, j] = G0[i, j] / (scale[i] * scale[j])
    C = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1):
            acc = G[i, j]
            for q in range(j):
                acc -= C[i, q] * C[j, q]
            if i == j:
                if not acc > 0:
                    return np.zeros(k), False
                C[i, i] = math.sqrt(acc)
            else:
                C[i, j] = acc / C[j, j]
    z = np.empty(k)
    for i in range(k):
        acc = rhs[i]
        for q in range(i):
            acc -= C[i, q] * z[q]
        z[i] = acc / C[i, i]
    b = np.empty(k)
    for i in range(k - 1, -1, -1):
        acc = z[i]
        for q in range(i + 1, k):
            acc -= C[q, i] * b[q]
        b[i] = acc / C[i, i]
    return b / scale, True


@njit(cache=True)
def _degenerate(e, x, T):
    floor = 1e-20 * max(np.mean(x * x), 1e-300)
    g = _acvf(e, T, 0)
    for s in range(T):
        if g[s, 0] <= floor:
            return True
    return False


@njit(cache=True)
def co_likelihood(x, A, beta, T, p, tol, max_iter):
    """Run the Cochrane-Orcutt loop from the OLS coefficients ``beta``.

    Returns ``(status, sum_log_v + quad, beta, iterations, converged)``.
    """
    N = x.shape[0]
    X2 = np.empty((N, 1))
    iterations = 1
    converged = False
    while iterations < max_iter:
        e = x - A @ beta
        if _degenerate(e, x, T):
            return DEGENERATE, np.inf, beta, iterations, converged
        phi, sigma2, st = _yule_walker(_acvf(e, T, p), T, p)
        if st != OK:
            return st, np.inf, beta, iterations, converged
        L, st = _edge_cholesky(phi, sigma2, T, p)
        if st != OK:
            return st, np.inf, beta, iterations, converged
        Aw = _whiten(A, phi, sigma2, L, T, p)
        X2[:, 0] = x
        yw = np.ascontiguousarray(_whiten(X2, phi, sigma2, L, T, p)[:, 0])
        new, ok = _normal_solve(Aw, yw)
        if not ok:
            return RANK, np.inf, beta, iterations, converged
        iterations += 1
        big = 0.0
        diff = 0.0
        for j in range(new.shape[0]):
            big = max(big, abs(new[j]))
            diff = max(diff, abs(new[j] - beta[j]))
        beta = new
        if diff / max(big, 1e-300) < tol:
            converged = True
            break
    e = x - A @ beta
    if _degenerate(e, x, T):
        return DEGENERATE, np.inf, beta, iterations, converged
    phi, sigma2, st = _yule_walker(_acvf(e, T, p), T, p)
    if st != OK:
        return st, np.inf, beta, iterations, converged
    L, st = _edge_cholesky(phi, sigma2, T, p)
    if st != OK:
        return st, np.inf, beta, iterations, converged
    X2[:, 0] = e
    u = _whiten(X2, phi, sigma2, L, T, p)[:, 0]
    total = 0.0
    for t in range(N):
        if t < p:
            total += 2.0 * math.log(L[t, t])
        else:
            total += math.log(sigma2[t % T])
        total += u[t] * u[t]
    return OK, total, beta, iterations, converged
