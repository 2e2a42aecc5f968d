"""Domain types shared across the package.

All time indices exposed by these types are 1-based: observation ``t`` lives in
season ``((t - 1) % T) + 1`` of cycle ``(t - 1) // T`` (the first cycle is 0).
Arrays are stored 0-based internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class MdlsegError(Exception):
    """Base class for every error raised by this package."""


class NotFullCycles(MdlsegError):
    pass


class NonFinite(MdlsegError):
    pass


class EmptySeries(MdlsegError):
    pass


class InadmissibleSegmentation(MdlsegError):
    pass


class RankDeficient(MdlsegError):
    pass


class NonCausalPAR(MdlsegError):
    pass


class YuleWalkerSingular(MdlsegError):
    pass


class NonPositiveVariance(MdlsegError):
    pass


class DegenerateVariance(MdlsegError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PeriodicSeries:
    """``N = d * T`` observations of a series with known period ``T``."""

    values: np.ndarray
    period: int

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))

    @property
    def N(self) -> int:
        return int(self.values.shape[0])

    @property
    def cycles(self) -> int:
        return self.N // self.period

    d = cycles

    def season(self, t):
        """Season in 1..T of the 1-based time index ``t`` (scalar or array)."""
        return (np.asarray(t) - 1) % self.period + 1

    def cycle(self, t):
        return (np.asarray(t) - 1) // self.period

    def season_index(self) -> np.ndarray:
        """0-based season of every observation, as an int array of length N."""
        return np.arange(self.N) % self.period


def validate_series(values: Sequence[float], T: int) -> PeriodicSeries:
    if int(T) != T or T < 1:
        raise ValueError(f"period must be a positive integer, got {T!r}")
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise EmptySeries("series has no observations")
    if x.size % T:
        raise NotFullCycles(
            f"N={x.size} is not a whole number of cycles of period T={T} "
            f"(remainder {x.size % T})"
        )
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x))[0]) + 1
        raise NonFinite(f"non-finite value at t={bad}")
    return PeriodicSeries(x, int(T))


@dataclass(frozen=True)
class Segmentation:
    """Model orders and changepoint times; also the GA chromosome.

    ``taus`` holds the 1-based first index of each new regime.
    """

    m: int
    p: int
    taus: tuple[int, ...] = ()

    def __post_init__(self):
        taus = tuple(int(t) for t in self.taus)
        object.__setattr__(self, "taus", taus)
        if self.m != len(taus):
            raise InadmissibleSegmentation(
                f"m={self.m} but {len(taus)} changepoint times given"
            )
        if self.p < 0:
            raise InadmissibleSegmentation(f"negative PAR order p={self.p}")
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise InadmissibleSegmentation(f"taus not strictly increasing: {taus}")

    @classmethod
    def of(cls, p: int, taus: Sequence[int] = ()) -> "Segmentation":
        taus = tuple(int(t) for t in taus)
        return cls(len(taus), int(p), taus)

    @property
    def key(self) -> tuple[int, tuple[int, ...]]:
        """Identity used for duplicate checks and fitness caching."""
        return (self.p, self.taus)

    def boundaries(self, N: int) -> list[int]:
        """``[tau_0=1, tau_1, ..., tau_m, tau_{m+1}=N+1]``."""
        return [1, *self.taus, N + 1]

    def check(self, N: int, T: int, min_cycles: int = 1, p_max: int | None = None):
        """Raise InadmissibleSegmentation unless admissible for a length-N series."""
        gap = min_cycles * T
        taus = self.taus
        if p_max is not None and self.p > p_max:
            raise InadmissibleSegmentation(f"p={self.p} exceeds p_max={p_max}")
        if not taus:
            return
        if taus[0] <= 1 or taus[-1] > N:
            raise InadmissibleSegmentation(f"changepoint outside (1, N]: {taus}")
        if taus[0] < 1 + gap or taus[-1] > N - gap:
            raise InadmissibleSegmentation(
                f"changepoints must lie in [{1 + gap}, {N - gap}], got {taus}"
            )
        for a, b in zip(taus, taus[1:]):
            if b - a < gap:
                raise InadmissibleSegmentation(
                    f"regime [{a}, {b}) shorter than {gap} observations"
                )

    def is_admissible(self, N: int, T: int, min_cycles: int = 1,
                      p_max: int | None = None) -> bool:
        try:
            self.check(N, T, min_cycles, p_max)
        except InadmissibleSegmentation:
            return False
        return True

    def __str__(self):
        taus = ",".join(map(str, self.taus))
        return f"m={self.m} p={self.p} taus={taus}"


@dataclass(frozen=True)
class MeanParams:
    """Seasonal means, linear trend and shifts ``Delta_2..Delta_{m+1}``."""

    mu: np.ndarray
    alpha: float
    deltas: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "mu", _frozen(np.atleast_1d(self.mu)))
        object.__setattr__(self, "deltas", _frozen(np.atleast_1d(self.deltas)))
        object.__setattr__(self, "alpha", float(self.alpha))

    @classmethod
    def from_beta(cls, beta: np.ndarray, T: int, trend: bool = True,
                  single_mu: bool = False) -> "MeanParams":
        """Unpack a coefficient vector ordered like the design matrix columns."""
        beta = np.asarray(beta, dtype=float)
        k = 1 if single_mu else T
        mu = np.full(T, beta[0]) if single_mu else beta[:T]
        alpha = beta[k] if trend else 0.0
        deltas = beta[k + int(trend):]
        return cls(mu, alpha, deltas)

    def shift_path(self, N: int, seg: Segmentation) -> np.ndarray:
        """``delta_t`` for t = 1..N."""
        if len(self.deltas) != seg.m:
            raise ValueError(f"{len(self.deltas)} deltas for m={seg.m}")
        out = np.zeros(N)
        bounds = seg.boundaries(N)
        for j, delta in enumerate(self.deltas, start=1):
            out[bounds[j] - 1:bounds[j + 1] - 1] = delta
        return out

    def mean_path(self, N: int, seg: Segmentation) -> np.ndarray:
        """``E[X_t] = mu_nu + alpha * t + delta_t`` for t = 1..N."""
        T = len(self.mu)
        t = np.arange(1, N + 1)
        return self.mu[(t - 1) % T] + self.alpha * t + self.shift_path(N, seg)


@dataclass(frozen=True)
class PARModel:
    """Periodic AR(p): ``phi[nu, k-1]`` is phi_k(nu+1); ``sigma2[nu]`` the noise variance."""

    phi: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        sigma2 = _frozen(np.atleast_1d(self.sigma2))
        phi = np.asarray(self.phi, dtype=float)
        if phi.size == 0:
            phi = np.zeros((sigma2.size, 0))
        phi = _frozen(phi.reshape(sigma2.size, -1))
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "phi", phi)
        if np.any(~np.isfinite(sigma2)) or np.any(sigma2 <= 0):
            raise NonPositiveVariance(f"sigma2 must be positive, got {sigma2}")

    @property
    def period(self) -> int:
        return self.sigma2.size

    @property
    def order(self) -> int:
        return self.phi.shape[1]

    @classmethod
    def white_noise(cls, sigma2) -> "PARModel":
        sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
        return cls(np.zeros((sigma2.size, 0)), sigma2)


@dataclass(frozen=True)
class FittedModel:
    """A segmentation together with its fitted mean, PAR errors and score."""

    segmentation: Segmentation
    mean: MeanParams
    par: PARModel | None
    residuals: np.ndarray
    xhat: np.ndarray
    v: np.ndarray
    mdl: float
    iterations: int = 0
    converged: bool = True
    degenerate: bool = False
    trend: bool = True
    single_mu: bool = False
    breakdown: object = None

    @property
    def m(self) -> int:
        return self.segmentation.m

    @property
    def p(self) -> int:
        return self.segmentation.p

    @property
    def taus(self) -> tuple[int, ...]:
        return self.segmentation.taus
