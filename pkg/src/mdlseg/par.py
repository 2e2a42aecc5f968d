"""Periodic autoregressions: sample moments, seasonal Yule-Walker, innovations.

Season wrap convention: for an observation in season ``nu`` the coefficient
``phi_k(nu)`` multiplies the error ``k`` steps back, whose season is
``((nu - k - 1) mod T) + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import (
    MeanParams,
    NonCausalPAR,
    NonPositiveVariance,
    NotFullCycles,
    PARModel,
    PeriodicSeries,
    Segmentation,
    YuleWalkerSingular,
)

PIVOT_TOL = 1e-12
# The periodic variance recursion must settle to this relative change within
# MAX_CYCLES cycles for the model to count as causal.
RECURSION_TOL = 1e-12
MAX_CYCLES = 1000


@dataclass(frozen=True)
class SeasonalACVF:
    """``gamma[nu - 1, h]`` is the lag-h sample autocovariance at season nu."""

    gamma: np.ndarray

    def __call__(self, season: int, h: int) -> float:
        return float(self.gamma[(season - 1) % self.gamma.shape[0], h])


def seasonal_acvf(resid, T: int, h_max: int) -> SeasonalACVF:
    """Sample autocovariances by season, zero-padding errors before t = 1.

    No mean is removed: the residuals are treated as a zero-mean process.
    """
    e = np.asarray(resid, dtype=float)
    N = e.size
    if N % T:
        raise NotFullCycles(f"N={N} not divisible by T={T}")
    if not 0 <= h_max < N:
        raise ValueError(f"need 0 <= h_max < N, got h_max={h_max}, N={N}")
    d = N // T
    padded = np.concatenate([np.zeros(h_max), e])
    gamma = np.empty((T, h_max + 1))
    for h in range(h_max + 1):
        lagged = padded[h_max - h:h_max - h + N]
        gamma[:, h] = (e * lagged).reshape(d, T).sum(axis=0) / d
    return SeasonalACVF(gamma)


def _moment_system(gamma: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-season Yule-Walker matrices G (T, p, p) and right-hand sides (T, p).

    G[s, j-1, k-1] = Cov(e_{t-k}, e_{t-j}) for t in season s (0-based).
    """
    T = gamma.shape[0]
    G = np.empty((T, p, p))
    s = np.arange(T)
    for j in range(1, p + 1):
        for k in range(1, p + 1):
            if k <= j:
                G[:, j - 1, k - 1] = gamma[(s - k) % T, j - k]
            else:
                G[:, j - 1, k - 1] = gamma[(s - j) % T, k - j]
    return G, gamma[:, 1:p + 1]


def yule_walker(resid, T: int, p: int) -> PARModel:
    """Seasonal Yule-Walker estimates of a PAR(p) from zero-mean residuals."""
    e = np.asarray(resid, dtype=float)
    if p < 0:
        raise ValueError("p must be nonnegative")
    if e.size // T <= p:
        raise ValueError(f"need more than p={p} cycles, have {e.size // T}")
    gamma = seasonal_acvf(e, T, p).gamma
    if p == 0:
        sigma2 = gamma[:, 0].copy()
        phi = np.zeros((T, 0))
    else:
        G, r = _moment_system(gamma, p)
        sv = np.linalg.svd(G, compute_uv=False)
        if np.any(sv[:, -1] <= PIVOT_TOL * sv[:, 0]) or not np.all(np.isfinite(sv)):
            bad = int(np.argmax(sv[:, -1] <= PIVOT_TOL * sv[:, 0])) + 1
            raise YuleWalkerSingular(f"seasonal moment matrix singular at season {bad}")
        phi = np.linalg.solve(G, r[..., None])[..., 0]
        sigma2 = gamma[:, 0] - np.sum(phi * r, axis=1)
    if np.any(sigma2 <= 0):
        bad = int(np.argmax(sigma2 <= 0)) + 1
        raise NonPositiveVariance(f"sigma2({bad}) = {sigma2[bad - 1]:.3g} <= 0")
    return PARModel(phi, sigma2)


def _companions(par: PARModel) -> np.ndarray:
    T, p = par.period, par.order
    r = max(p, 1)
    A = np.zeros((T, r, r))
    if p:
        A[:, 0, :p] = par.phi
    if r > 1:
        A[:, 1:, :-1] = np.eye(r - 1)
    return A


def state_covariances(par: PARModel) -> np.ndarray:
    """Stationary covariance of (e_t, ..., e_{t-r+1}) for t in each season.

    Returns an array (T, r, r) with r = max(p, 1). Raises NonCausalPAR when
    the periodic variance recursion would not settle within MAX_CYCLES
    cycles; that happens exactly when the spectral radius rho of the one-cycle
    transition satisfies rho**(2 * MAX_CYCLES) > RECURSION_TOL.
    """
    T = par.period
    if par.order <= 1:
        return _scalar_state_covariances(par)
    A = _companions(par)
    r = A.shape[1]
    Phi = np.eye(r)
    Q = np.zeros((r, r))
    for s in range(T):
        Phi = A[s] @ Phi
        Q = A[s] @ Q @ A[s].T
        Q[0, 0] += par.sigma2[s]
    _check_radius(float(np.max(np.abs(np.linalg.eigvals(Phi)))))
    # vec(P) = (I - Phi kron Phi)^{-1} vec(Q); r <= p_max keeps this tiny.
    K = np.eye(r * r) - np.kron(Phi, Phi)
    P = np.linalg.solve(K, Q.reshape(-1)).reshape(r, r)
    P = 0.5 * (P + P.T)
    out = np.empty((T, r, r))
    out[T - 1] = P
    for s in range(T):
        P = A[s] @ P @ A[s].T
        P[0, 0] += par.sigma2[s]
        out[s] = P
    return out


def _check_radius(rho: float):
    if not np.isfinite(rho) or rho >= 1 or (
            rho > 0 and 2 * MAX_CYCLES * np.log(rho) > np.log(RECURSION_TOL)):
        raise NonCausalPAR(f"one-cycle transition has spectral radius {rho:.6f}")


def _scalar_state_covariances(par: PARModel) -> np.ndarray:
    # p <= 1: Var_s = phi(s)**2 Var_{s-1} + sigma2(s), solved over one cycle.
    T = par.period
    phi = par.phi[:, 0].tolist() if par.order else [0.0] * T
    sigma2 = par.sigma2.tolist()
    gain, acc = 1.0, 0.0
    for s in range(T):
        gain *= phi[s]
        acc = phi[s] * phi[s] * acc + sigma2[s]
    _check_radius(abs(gain))
    var = acc / (1.0 - gain * gain)
    out = np.empty(T)
    for s in range(T):
        var = phi[s] * phi[s] * var + sigma2[s]
        out[s] = var
    return out[:, None, None]


def stationary_variances(par: PARModel) -> np.ndarray:
    """Var(e_{nT+nu}) for nu = 1..T."""
    return state_covariances(par)[:, 0, 0].copy()


def initial_block(par: PARModel) -> np.ndarray:
    """Covariance matrix of (e_1, ..., e_p) implied by the model."""
    p = par.order
    if p == 0:
        return np.zeros((0, 0))
    P = state_covariances(par)[(p - 1) % par.period][:p, :p]
    return P[::-1, ::-1]


class Whitener:
    """Maps errors e to standardized one-step innovations (e_t - e^_t)/sqrt(v_t).

    Rows past p use the PAR recursion directly; the first p rows use the exact
    Cholesky factor of the model's covariance for (e_1, ..., e_p).
    """

    def __init__(self, par: PARModel, N: int):
        self.par = par
        self.N = N
        T, p = par.period, par.order
        if N <= p:
            raise ValueError(f"series of length {N} too short for p={p}")
        season = np.arange(N) % T
        self.phi_t = par.phi[season]
        sigma2_t = par.sigma2[season]
        self.v = sigma2_t.copy()
        if p:
            G = initial_block(par)
            try:
                self.chol = np.linalg.cholesky(G)
            except np.linalg.LinAlgError as exc:
                raise NonCausalPAR("initial covariance block not positive definite") from exc
            diag = np.diag(self.chol)
            if np.any(diag <= 0):
                raise NonCausalPAR("non-positive initial innovation variance")
            self.v[:p] = diag ** 2
        else:
            self.chol = np.zeros((0, 0))
        self.scale = 1.0 / np.sqrt(self.v)

    def innovations(self, e: np.ndarray) -> np.ndarray:
        """One-step prediction errors e_t - e^_t, for a vector or column stack."""
        e = np.asarray(e, dtype=float)
        p = self.par.order
        if p == 0:
            return e.copy()
        u = e.copy()
        phi = self.phi_t if e.ndim == 1 else self.phi_t[:, :, None]
        for k in range(1, p + 1):
            u[p:] -= phi[p:, k - 1] * e[p - k:self.N - k]
        # Edge rows: u = L^{-1} e with Cholesky C = L diag(C).
        z = linalg.solve_triangular(self.chol, e[:p], lower=True)
        diag = np.diag(self.chol)
        u[:p] = z * (diag if e.ndim == 1 else diag[:, None])
        return u

    def whiten(self, e: np.ndarray) -> np.ndarray:
        u = self.innovations(e)
        return u * (self.scale if u.ndim == 1 else self.scale[:, None])


def one_step_predictions(X: PeriodicSeries, mean: MeanParams, seg: Segmentation,
                         par: PARModel) -> tuple[np.ndarray, np.ndarray]:
    """Best linear one-step predictors of X and their mean squared errors."""
    x = X.values
    resid = x - mean.mean_path(X.N, seg)
    w = Whitener(par, X.N)
    u = w.innovations(resid)
    v = w.v
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise NonCausalPAR("non-positive prediction variance")
    return x - u, v.copy()


def simulate_par(par: PARModel, N: int, rng: np.random.Generator,
                 burn_cycles: int = 100) -> np.ndarray:
    """Gaussian PAR path of length N starting in season 1, after a burn-in."""
    T, p = par.period, par.order
    total = N + burn_cycles * T
    sd = np.sqrt(par.sigma2)
    z = rng.standard_normal(total) * np.tile(sd, total // T + 1)[:total]
    if p == 0:
        return z[burn_cycles * T:]
    e = np.zeros(total + p)
    phi = par.phi
    for t in range(total):
        s = t % T
        acc = z[t]
        for k in range(p):
            acc += phi[s, k] * e[p + t - 1 - k]
        e[p + t] = acc
    return e[p + burn_cycles * T:]
