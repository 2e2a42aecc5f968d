"""Independent reference computations used to freeze and check expected values.

Nothing here imports the code paths under test beyond plain data types.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def variance_recursion(phi1, sigma2, cycles=1000):
    """Stationary Var(e_nu) of a PAR(1) by iterating Var_nu = phi^2 Var_{nu-1} + s2."""
    T = len(sigma2)
    var = np.zeros(T)
    prev = 0.0
    for _ in range(cycles):
        for s in range(T):
            prev = phi1[s] ** 2 * prev + sigma2[s]
            var[s] = prev
    return var


def par_covariance(phi, sigma2, N, burn_cycles=400):
    """Dense N x N covariance of a PAR path, from its truncated MA expansion.

    ``phi`` is (T, p). The path starts in season 1; ``burn_cycles`` cycles of
    pre-sample noise make the truncation error negligible for causal models.
    """
    phi = np.asarray(phi, dtype=float).reshape(len(sigma2), -1)
    T, p = phi.shape
    K = burn_cycles * T
    total = K + N
    # e = B^{-1} Z over the extended window, with e_t = 0 before it
    B = np.eye(total)
    for t in range(total):
        s = (t - K) % T
        for k in range(1, p + 1):
            if t - k >= 0:
                B[t, t - k] = -phi[s, k - 1]
    sd = np.array([math.sqrt(sigma2[(t - K) % T]) for t in range(total)])
    M = np.linalg.solve(B, np.diag(sd))
    M = M[K:]
    return M @ M.T


def dense_gls(D, x, Sigma):
    Si = np.linalg.inv(Sigma)
    return np.linalg.solve(D.T @ Si @ D, D.T @ Si @ x)


def dense_neg2_loglik(resid, Sigma):
    """log det Sigma + r' Sigma^{-1} r (Gaussian, constants dropped)."""
    sign, logdet = np.linalg.slogdet(Sigma)
    assert sign > 0
    return logdet + resid @ np.linalg.solve(Sigma, resid)


def mdl_objective_script(N, T, m, p, taus, x, xhat, v, variant="standard"):
    """Direct transcription of the objective in nats, term by term."""
    d = N // T
    tau = [1] + list(taus) + [N + 1]
    total = 0.0
    if variant == "standard":
        for j in range(2, m + 2):
            total += 0.5 * math.log(tau[j] - tau[j - 1])
    elif variant == "single-mu":
        for j in range(1, m + 2):
            total += 0.5 * math.log(tau[j] - tau[j - 1])
    elif variant == "per-segment-trend":
        for j in range(1, m + 2):
            total += math.log(tau[j] - tau[j - 1])
        total -= math.log(tau[1] - 1) / 2
    total += p * T * math.log(2 * d) / 2
    for j in range(2, m + 1):
        total += math.log(tau[j])
    if m > 0:
        total += math.log(m)
    if p > 0:
        total += math.log(p)
    for t in range(N):
        total += 0.5 * math.log(v[t]) + 0.5 * (x[t] - xhat[t]) ** 2 / v[t]
    return total


def codelength_pieces_script(N, T, m, p, taus):
    """Bits for the mean, PAR, changepoint and order pieces."""
    d = N // T
    tau = [1] + list(taus) + [N + 1]
    mean = math.log(N, 2) / 2 + T * math.log(d, 2) / 2
    for j in range(2, m + 2):
        mean += math.log(tau[j] - tau[j - 1], 2) / 2
    par = T * math.log(d, 2) / 2 + p * T * math.log(2 * d, 2) / 2
    cps = 0.0
    if m >= 1:
        cps = sum(math.log(tau[j], 2) for j in range(2, m + 1)) + math.log(N, 2)
    orders = (math.log(m, 2) if m else 0.0) + (math.log(p, 2) if p else 0.0)
    return mean, par, cps, orders


def admissible_taus(N, T, min_cycles, m_max):
    """Every admissible changepoint tuple with at most m_max changepoints."""
    gap = min_cycles * T
    lo, hi = 1 + gap, N - gap
    out = [()]
    for m in range(1, m_max + 1):
        for combo in itertools.combinations(range(lo, hi + 1), m):
            if all(b - a >= gap for a, b in zip(combo, combo[1:])):
                out.append(combo)
    return out


def exhaustive_argmin(X, score, min_cycles, p_max, m_max):
    """Global minimizer of ``score(p, taus)`` by enumeration."""
    best = None
    for taus in admissible_taus(X.N, X.period, min_cycles, m_max):
        for p in range(p_max + 1):
            val = score(p, taus)
            if best is None or val < best[0]:
                best = (val, p, taus)
    return best
