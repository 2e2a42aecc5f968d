"""Residual diagnostics: sample autocorrelations and the periodogram."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MdlsegError


class ZeroVariance(MdlsegError):
    pass


@dataclass(frozen=True)
class AcfReport:
    lags: np.ndarray
    acf: np.ndarray
    bound: float

    @property
    def exceedances(self) -> int:
        return int(np.sum(np.abs(self.acf) > self.bound))

    def to_csv(self) -> str:
        rows = ["lag,acf,bound"]
        rows += [f"{h},{r!r},{self.bound!r}" for h, r in zip(self.lags, self.acf)]
        return "\n".join(rows) + "\n"


def sample_acf(resid, h_max: int) -> AcfReport:
    """Biased (divide by N) sample autocorrelations at lags 1..h_max."""
    r = np.asarray(resid, dtype=float)
    N = r.size
    if not 1 <= h_max < N:
        raise ValueError(f"need 1 <= h_max < N, got h_max={h_max}, N={N}")
    c = r - r.mean()
    c0 = float(c @ c) / N
    if c0 <= 0.0 or c0 <= 1e-28 * float(np.mean(r * r) + 1e-300):
        raise ZeroVariance("residuals have zero sample variance")
    acf = np.array([c[:N - h] @ c[h:] for h in range(1, h_max + 1)]) / N / c0
    return AcfReport(np.arange(1, h_max + 1), acf, 1.96 / np.sqrt(N))


@dataclass(frozen=True)
class Periodogram:
    freqs: np.ndarray
    ordinates: np.ndarray
    N: int

    def variance(self) -> float:
        """Sample variance recovered from the ordinates (Parseval)."""
        w = np.full(self.ordinates.size, 2.0)
        if self.N % 2 == 0:
            w[-1] = 1.0
        return float(w @ self.ordinates) / self.N

    def to_csv(self) -> str:
        rows = ["freq,ordinate"]
        rows += [f"{f!r},{i!r}" for f, i in zip(self.freqs, self.ordinates)]
        return "\n".join(rows) + "\n"


def periodogram(resid) -> Periodogram:
    """``I(w_k) = N^{-1} |sum_t (r_t - rbar) exp(-i t w_k)|^2`` at w_k = 2 pi k / N."""
    r = np.asarray(resid, dtype=float)
    N = r.size
    if N < 2:
        raise ValueError("periodogram needs at least two values")
    F = np.fft.rfft(r - r.mean())
    k = np.arange(1, N // 2 + 1)
    return Periodogram(2 * np.pi * k / N, np.abs(F[k]) ** 2 / N, N)


def periodogram_direct(resid) -> np.ndarray:
    """Reference evaluation of the periodogram by explicit summation."""
    r = np.asarray(resid, dtype=float)
    N = r.size
    c = r - r.mean()
    t = np.arange(1, N + 1)
    k = np.arange(1, N // 2 + 1)
    w = 2 * np.pi * k / N
    E = np.exp(-1j * np.outer(w, t))
    return np.abs(E @ c) ** 2 / N
