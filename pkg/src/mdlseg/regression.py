"""Mean-structure regression with PAR errors.

The design matrix has columns ``[S | C | R]``: seasonal indicators, the time
index ``t`` and one indicator per regime after the first, so that the
coefficient vector is ``(mu_1..mu_T, alpha, Delta_2..Delta_{m+1})``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import mdl
from .core import (
    FittedModel,
    MeanParams,
    PARModel,
    PeriodicSeries,
    RankDeficient,
    Segmentation,
)
from .par import PIVOT_TOL, Whitener, seasonal_acvf, yule_walker

CO_TOL = 1e-8
CO_MAX_ITER = 20
# Per-season residual variance below this fraction of mean(X**2) is degenerate.
DEGENERATE_REL = 1e-20


@dataclass(frozen=True)
class DesignMatrix:
    matrix: np.ndarray
    T: int
    seg: Segmentation
    trend: bool = True
    single_mu: bool = False

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def S(self) -> np.ndarray:
        return self.matrix[:, :self._k_mu]

    @property
    def C(self) -> np.ndarray:
        return self.matrix[:, self._k_mu] if self.trend else np.zeros(self.shape[0])

    @property
    def R(self) -> np.ndarray:
        return self.matrix[:, self._k_mu + int(self.trend):]

    @property
    def _k_mu(self) -> int:
        return 1 if self.single_mu else self.T

    def unpack(self, beta) -> MeanParams:
        return MeanParams.from_beta(beta, self.T, self.trend, self.single_mu)


def build_design_matrix(N: int, T: int, seg: Segmentation, *, trend: bool = True,
                        single_mu: bool = False) -> DesignMatrix:
    """Assemble ``[S | C | R]``; ``single_mu`` collapses S to a column of ones."""
    seg.check(N, T, min_cycles=0)
    if N % T:
        raise ValueError(f"N={N} not a multiple of T={T}")
    t = np.arange(1, N + 1)
    cols = []
    if single_mu:
        cols.append(np.ones((N, 1)))
    else:
        S = np.zeros((N, T))
        S[np.arange(N), (t - 1) % T] = 1.0
        cols.append(S)
    if trend:
        cols.append(t[:, None].astype(float))
    bounds = seg.boundaries(N)
    R = np.zeros((N, seg.m))
    for j in range(seg.m):
        R[bounds[j + 1] - 1:bounds[j + 2] - 1, j] = 1.0
    cols.append(R)
    return DesignMatrix(np.hstack(cols), T, seg, trend, single_mu)


@dataclass
class LstsqResult:
    beta: np.ndarray
    # (A'A)^{-1}; the GLS coefficient covariance when A is whitened.
    xtx_inv: np.ndarray | None = field(repr=False)
    rss: float = 0.0


def lstsq(A: np.ndarray, y: np.ndarray, want_cov: bool = False) -> LstsqResult:
    """Least squares by column-pivoted QR, refusing rank-deficient designs."""
    Q, R, perm = linalg.qr(A, mode="economic", pivoting=True, check_finite=False)
    diag = np.abs(np.diag(R))
    if diag.size and (diag[-1] <= PIVOT_TOL * diag[0] or not np.isfinite(diag).all()):
        raise RankDeficient(
            f"design of shape {A.shape} is rank deficient "
            f"(pivot ratio {diag[-1] / diag[0]:.2e})"
        )
    qty = Q.T @ y
    z = linalg.solve_triangular(R, qty, check_finite=False)
    beta = np.empty_like(z)
    beta[perm] = z
    cov = None
    if want_cov:
        Rinv = linalg.solve_triangular(R, np.eye(R.shape[0]), check_finite=False)
        cov = np.empty_like(Rinv)
        cov[np.ix_(perm, perm)] = Rinv @ Rinv.T
    resid = y - A @ beta
    return LstsqResult(beta, cov, float(resid @ resid))


def ols_fit(D: DesignMatrix, X: PeriodicSeries) -> MeanParams:
    return D.unpack(lstsq(D.matrix, X.values).beta)


def gls_fit(D: DesignMatrix, X: PeriodicSeries, par: PARModel) -> MeanParams:
    return D.unpack(_gls(D.matrix, X.values, Whitener(par, X.N)).beta)


def _gls(A: np.ndarray, y: np.ndarray, w: Whitener) -> LstsqResult:
    return lstsq(w.whiten(A), w.whiten(y))


def _normal_solve(A: np.ndarray, y: np.ndarray) -> LstsqResult:
    """Least squares through column-equilibrated normal equations.

    Only used inside the Cochrane-Orcutt loop, after the unwhitened design has
    passed the pivoted-QR rank check (whitening is nonsingular, so the rank
    carries over).
    """
    scale = np.sqrt(np.einsum("ij,ij->j", A, A))
    scale[scale == 0] = 1.0
    As = A / scale
    G = As.T @ As
    try:
        L = linalg.cho_factor(G, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise RankDeficient("whitened design lost rank") from exc
    beta = linalg.cho_solve(L, As.T @ y, check_finite=False) / scale
    resid = y - A @ beta
    return LstsqResult(beta, None, float(resid @ resid))


def _is_degenerate(resid: np.ndarray, x: np.ndarray, T: int) -> bool:
    floor = DEGENERATE_REL * max(float(np.mean(x * x)), 1e-300)
    return bool(np.any(seasonal_acvf(resid, T, 0).gamma[:, 0] <= floor))


def _degenerate_fit(D, X, seg, beta, iterations, variant) -> FittedModel:
    x = X.values
    mean = D.unpack(beta)
    fitted = D.matrix @ beta
    return FittedModel(
        segmentation=seg, mean=mean, par=None, residuals=x - fitted,
        xhat=fitted, v=np.zeros(X.N), mdl=float("inf"), iterations=iterations,
        converged=True, degenerate=True, trend=D.trend, single_mu=D.single_mu,
        breakdown=None,
    )


def cochrane_orcutt(X: PeriodicSeries, seg: Segmentation, *, trend: bool = True,
                    single_mu: bool = False, variant: "mdl.MdlVariant | str" = "standard",
                    tol: float = CO_TOL, max_iter: int = CO_MAX_ITER,
                    history: list | None = None) -> FittedModel:
    """Alternate mean fits and seasonal Yule-Walker PAR fits until stable.

    The first mean fit is OLS, later ones GLS under the current PAR estimate.
    Iteration stops when the max-norm relative change in the coefficients drops
    below ``tol`` or after ``max_iter`` mean fits; in the latter case the last
    iterate is returned with ``converged=False``.

    If ``history`` is a list, one ``(beta, par, whitened_rss)`` tuple is
    appended per PAR refit, where ``whitened_rss`` is the GLS criterion of
    the mean fit that used that PAR.
    """
    x = X.values
    T = X.period
    D = build_design_matrix(X.N, T, seg, trend=trend, single_mu=single_mu)
    A = D.matrix
    beta = lstsq(A, x).beta
    iterations = 1
    converged = False
    while iterations < max_iter:
        resid = x - A @ beta
        if _is_degenerate(resid, x, T):
            return _degenerate_fit(D, X, seg, beta, iterations, variant)
        par = yule_walker(resid, T, seg.p)
        w = Whitener(par, X.N)
        res = _normal_solve(w.whiten(A), w.whiten(x))
        iterations += 1
        if history is not None:
            history.append((res.beta, par, res.rss))
        change = np.max(np.abs(res.beta - beta)) / max(np.max(np.abs(res.beta)), 1e-300)
        beta = res.beta
        if change < tol:
            converged = True
            break

    resid = x - A @ beta
    if _is_degenerate(resid, x, T):
        return _degenerate_fit(D, X, seg, beta, iterations, variant)
    par = yule_walker(resid, T, seg.p)
    w = Whitener(par, X.N)
    u = w.innovations(resid)
    xhat = x - u
    v = w.v.copy()
    br = mdl.breakdown_from_parts(X.N, T, seg, x, xhat, v, variant)
    return FittedModel(
        segmentation=seg, mean=D.unpack(beta), par=par, residuals=resid,
        xhat=xhat, v=v, mdl=br.objective_nats, iterations=iterations,
        converged=converged, degenerate=False, trend=trend, single_mu=single_mu,
        breakdown=br,
    )


def coefficient_covariance(X: PeriodicSeries, fit: FittedModel) -> np.ndarray:
    """GLS covariance ``(D' Sigma^{-1} D)^{-1}`` at the fitted PAR model.

    Sigma is the error covariance implied by ``fit.par``; with the exact
    whitening ``W`` (``W' W = Sigma^{-1}``) this is ``((W D)' (W D))^{-1}``.
    """
    if fit.par is None:
        raise ValueError("degenerate fit has no error model")
    D = build_design_matrix(X.N, X.period, fit.segmentation, trend=fit.trend,
                            single_mu=fit.single_mu)
    w = Whitener(fit.par, X.N)
    return lstsq(w.whiten(D.matrix), w.whiten(X.values), want_cov=True).xtx_inv


def segmentation_score(X: PeriodicSeries, seg: Segmentation, *, trend: bool = True,
                       single_mu: bool = False, variant: "mdl.MdlVariant | str" = "standard",
                       tol: float = CO_TOL, max_iter: int = CO_MAX_ITER) -> float:
    """``cochrane_orcutt(...).mdl`` computed by the compiled kernel.

    Returns +inf wherever the reference fit would be degenerate or fail.
    """
    from . import _kernels

    x = np.ascontiguousarray(X.values)
    D = build_design_matrix(X.N, X.period, seg, trend=trend, single_mu=single_mu)
    A = np.ascontiguousarray(D.matrix)
    beta = lstsq(A, x).beta
    if X.cycles <= seg.p:
        raise ValueError(f"need more than p={seg.p} cycles, have {X.cycles}")
    try:
        status, lik, *_ = _kernels.co_likelihood(x, A, beta, X.period, seg.p, tol, max_iter)
    except np.linalg.LinAlgError:
        return float("inf")
    if status != _kernels.OK:
        return float("inf")
    return mdl.penalty_nats(X.N, X.period, seg, variant) + 0.5 * lik
