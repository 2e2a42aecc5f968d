"""Minimum description length codelengths and the segmentation objective.

Codelength pieces are in bits. The objective that is minimized is in nats and
omits every term that depends only on (N, T, d); see :func:`dropped_constant_bits`.
Terms of the form log(0) (no changepoints, white-noise errors) contribute 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import DegenerateVariance, Segmentation

LOG2E = math.log2(math.e)


class MdlVariant(enum.Enum):
    STANDARD = "standard"
    PER_SEGMENT_TREND = "per-segment-trend"
    SINGLE_MU = "single-mu"

    @classmethod
    def parse(cls, value: "MdlVariant | str") -> "MdlVariant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown MDL variant {value!r}")


def _log2_or_zero(x: float) -> float:
    return math.log2(x) if x > 0 else 0.0


def _ln_or_zero(x: float) -> float:
    return math.log(x) if x > 0 else 0.0


def _segment_lengths(seg: Segmentation, N: int) -> list[int]:
    """``tau_j - tau_{j-1}`` for j = 1..m+1 with tau_0 = 1, tau_{m+1} = N+1."""
    b = seg.boundaries(N)
    return [b[j] - b[j - 1] for j in range(1, len(b))]


def mean_param_bits(N: int, T: int, d: int, seg: Segmentation) -> float:
    lengths = _segment_lengths(seg, N)[1:]
    return (math.log2(N) / 2 + T * math.log2(d) / 2
            + 0.5 * sum(math.log2(L) for L in lengths))


def par_param_bits(T: int, d: int, p: int) -> float:
    return T * math.log2(d) / 2 + p * T * math.log2(2 * d) / 2


def changepoint_bits(seg: Segmentation, N: int) -> float:
    if seg.m == 0:
        return 0.0
    return sum(math.log2(t) for t in seg.taus[1:]) + math.log2(N)


def order_bits(m: int, p: int) -> float:
    return _log2_or_zero(m) + _log2_or_zero(p)


def _likelihood_sums(x, xhat, v) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return 0.0, 0.0
    if not np.all(v > 0) or not np.all(np.isfinite(v)):
        raise DegenerateVariance("prediction variances must be positive and finite")
    r = x - np.asarray(xhat, dtype=float)
    return float(np.sum(np.log(v))), float(np.sum(r * r / v))


def residual_codelength(x, xhat, v) -> float:
    """Negative log2 Gaussian likelihood in innovations form, in bits."""
    n = np.asarray(x).size
    sum_log_v, quad = _likelihood_sums(x, xhat, v)
    return n / 2 * math.log2(2 * math.pi) + 0.5 * LOG2E * sum_log_v + 0.5 * LOG2E * quad


def penalty_nats(N: int, T: int, seg: Segmentation,
                 variant: "MdlVariant | str" = MdlVariant.STANDARD) -> float:
    """Model part of the objective (everything except the likelihood terms)."""
    variant = MdlVariant.parse(variant)
    d = N // T
    m, p = seg.m, seg.p
    lengths = _segment_lengths(seg, N)
    if variant is MdlVariant.STANDARD:
        first = 0.5 * sum(math.log(L) for L in lengths[1:])
    elif variant is MdlVariant.SINGLE_MU:
        first = 0.5 * sum(math.log(L) for L in lengths)
    else:
        first = sum(math.log(L) for L in lengths) - math.log(seg.boundaries(N)[1] - 1) / 2
    return (first + p * T * math.log(2 * d) / 2
            + sum(math.log(t) for t in seg.taus[1:])
            + _ln_or_zero(m) + _ln_or_zero(p))


def objective(N: int, T: int, seg: Segmentation, x, xhat, v,
              variant: "MdlVariant | str" = MdlVariant.STANDARD) -> float:
    """The MDL objective in nats; +inf for degenerate prediction variances."""
    try:
        sum_log_v, quad = _likelihood_sums(x, xhat, v)
    except DegenerateVariance:
        return math.inf
    return penalty_nats(N, T, seg, variant) + 0.5 * sum_log_v + 0.5 * quad


def dropped_constant_bits(N: int, T: int, m: int) -> float:
    """Bits separating ``log2(e) * objective`` from the full two-part codelength.

    The log2(N) attached to the changepoint piece is only present when m >= 1.
    """
    d = N // T
    const = 1.5 * math.log2(N) + T * math.log2(d) + N / 2 * math.log2(2 * math.pi)
    return const - (math.log2(N) if m == 0 else 0.0)


@dataclass(frozen=True)
class MdlBreakdown:
    mean_bits: float
    par_bits: float
    tau_bits: float
    order_bits: float
    model_bits: float
    residual_bits: float
    objective_nats: float
    variant: MdlVariant = MdlVariant.STANDARD
    # objective(variant) - objective(standard), in nats
    variant_adjustment_nats: float = 0.0

    @property
    def total_bits(self) -> float:
        return self.model_bits + self.residual_bits

    def as_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "mean_bits": self.mean_bits,
            "par_bits": self.par_bits,
            "tau_bits": self.tau_bits,
            "order_bits": self.order_bits,
            "model_bits": self.model_bits,
            "residual_bits": self.residual_bits,
            "total_bits": self.total_bits,
            "objective_nats": self.objective_nats,
            "variant_adjustment_nats": self.variant_adjustment_nats,
        }


def breakdown_from_parts(N: int, T: int, seg: Segmentation, x, xhat, v,
                         variant: "MdlVariant | str" = MdlVariant.STANDARD) -> MdlBreakdown:
    """Codelength pieces for a scored model.

    For the non-standard variants the mean piece absorbs the variant's change
    to the objective, so model_bits + residual_bits stays the full codelength.
    """
    variant = MdlVariant.parse(variant)
    d = N // T
    adj = penalty_nats(N, T, seg, variant) - penalty_nats(N, T, seg, MdlVariant.STANDARD)
    mean_b = mean_param_bits(N, T, d, seg) + LOG2E * adj
    par_b = par_param_bits(T, d, seg.p)
    tau_b = changepoint_bits(seg, N)
    ord_b = order_bits(seg.m, seg.p)
    try:
        resid_b = residual_codelength(x, xhat, v)
    except DegenerateVariance:
        resid_b = math.inf
    obj = objective(N, T, seg, x, xhat, v, variant)
    return MdlBreakdown(mean_b, par_b, tau_b, ord_b, mean_b + par_b + tau_b + ord_b,
                        resid_b, obj, variant, adj)


def mdl_score(fit, variant: "MdlVariant | str" = MdlVariant.STANDARD) -> float:
    """Objective of a fitted model in nats (+inf when degenerate)."""
    if fit.degenerate:
        return math.inf
    N = fit.residuals.size
    T = fit.mean.mu.size
    x = fit.mean.mean_path(N, fit.segmentation) + fit.residuals
    return objective(N, T, fit.segmentation, x, fit.xhat, fit.v, variant)


def breakdown(fit, variant: "MdlVariant | str" = MdlVariant.STANDARD) -> MdlBreakdown:
    N = fit.residuals.size
    T = fit.mean.mu.size
    x = fit.mean.mean_path(N, fit.segmentation) + fit.residuals
    v = fit.v if not fit.degenerate else np.zeros(N)
    return breakdown_from_parts(N, T, fit.segmentation, x, fit.xhat, v, variant)
