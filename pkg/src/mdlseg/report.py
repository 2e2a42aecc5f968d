"""Segmentation reports: human-readable text and a flat key=value result file."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mdl
from .core import FittedModel, PeriodicSeries
from .regression import coefficient_covariance
from .stations import calendar_label


@dataclass(frozen=True)
class ShiftEstimate:
    j: int
    tau: int
    year: int
    season: int
    delta: float
    se: float


@dataclass(frozen=True)
class SegmentationReport:
    fit: FittedModel
    N: int
    T: int
    start_year: int
    variant: mdl.MdlVariant
    breakdown: mdl.MdlBreakdown
    shifts: list[ShiftEstimate]
    alpha_se: float
    mu_se: np.ndarray


def build_report(X: PeriodicSeries, fit: FittedModel, start_year: int = 1,
                 variant="standard") -> SegmentationReport:
    variant = mdl.MdlVariant.parse(variant)
    T = X.period
    k_mu = 1 if fit.single_mu else T
    if fit.degenerate:
        se = np.full(k_mu + int(fit.trend) + fit.m, np.nan)
    else:
        se = np.sqrt(np.diag(coefficient_covariance(X, fit)))
    alpha_se = float(se[k_mu]) if fit.trend else float("nan")
    delta_se = se[k_mu + int(fit.trend):]
    mu_se = np.full(T, se[0]) if fit.single_mu else se[:T]
    shifts = []
    for j, (tau, delta, s) in enumerate(zip(fit.taus, fit.mean.deltas, delta_se), start=2):
        year, season = calendar_label(tau, T, start_year)
        shifts.append(ShiftEstimate(j, tau, year, season, float(delta), float(s)))
    return SegmentationReport(fit, X.N, T, start_year, variant, mdl.breakdown(fit, variant),
                              shifts, alpha_se, mu_se)


def _label(year: int, season: int, T: int) -> str:
    width = len(str(T))
    return f"{year}-{season:0{width}d}"


def format_text(rep: SegmentationReport) -> str:
    fit, T = rep.fit, rep.T
    out = [f"MDL segmentation ({rep.variant.value}), N={rep.N}, period T={T}"]
    if fit.degenerate:
        out.append("fit is degenerate (zero residual variance); score is +inf")
    if fit.m == 0:
        out.append("no changepoints")
    else:
        out.append(f"{fit.m} changepoint(s):")
        for s in rep.shifts:
            out.append(f"  tau={s.tau:<6d} ({_label(s.year, s.season, T)})  "
                       f"Delta_{s.j} = {s.delta:+.4f} +/- {s.se:.4f}")
    out.append(f"PAR order p = {fit.p}")
    if fit.trend:
        out.append(f"trend alpha = {fit.mean.alpha:.6g} +/- {rep.alpha_se:.2g}")
    out.append("season      mu    sigma2" + "".join(f"    phi{k}" for k in range(1, fit.p + 1)))
    for nu in range(T):
        row = f"{nu + 1:>6d} {fit.mean.mu[nu]:8.3f}"
        if fit.par is not None:
            row += f" {fit.par.sigma2[nu]:9.4f}"
            row += "".join(f" {fit.par.phi[nu, k]:8.4f}" for k in range(fit.p))
        out.append(row)
    b = rep.breakdown
    out.append("codelength (bits): "
               f"mean {b.mean_bits:.3f}, PAR {b.par_bits:.3f}, changepoints {b.tau_bits:.3f}, "
               f"orders {b.order_bits:.3f}, model {b.model_bits:.3f}, residuals {b.residual_bits:.3f}")
    out.append(f"MDL objective = {b.objective_nats:.6f} nats")
    if rep.variant is not mdl.MdlVariant.STANDARD:
        out.append(f"variant adjustment vs standard = {b.variant_adjustment_nats:+.6f} nats")
    if not fit.converged:
        out.append("warning: Cochrane-Orcutt iteration hit its cap before converging")
    return "\n".join(out) + "\n"


def format_result(rep: SegmentationReport) -> str:
    fit, T = rep.fit, rep.T
    labels = [_label(s.year, s.season, T) for s in rep.shifts]
    kv = {
        "variant": rep.variant.value,
        "N": rep.N,
        "period": T,
        "start_year": rep.start_year,
        "m": fit.m,
        "p": fit.p,
        "taus": ",".join(map(str, fit.taus)),
        "tau_labels": ",".join(labels),
        "alpha": repr(fit.mean.alpha),
        "alpha_se": repr(rep.alpha_se),
        "mdl_nats": repr(rep.breakdown.objective_nats),
        "converged": str(fit.converged).lower(),
        "degenerate": str(fit.degenerate).lower(),
        "iterations": fit.iterations,
    }
    for k, v in rep.breakdown.as_dict().items():
        if k != "variant":
            kv[k] = repr(v)
    lines = ["# mdlseg segmentation result"] + [f"{k}={v}" for k, v in kv.items()]
    lines += ["", "[deltas]", "j,tau,year,season,delta,se"]
    lines += [f"{s.j},{s.tau},{s.year},{s.season},{s.delta!r},{s.se!r}" for s in rep.shifts]
    lines += ["", "[mu]", "season,mu,se"]
    lines += [f"{nu + 1},{fit.mean.mu[nu]!r},{rep.mu_se[nu]!r}" for nu in range(T)]
    if fit.par is not None:
        lines += ["", "[par]", "season,sigma2" + "".join(f",phi{k}" for k in range(1, fit.p + 1))]
        for nu in range(T):
            row = f"{nu + 1},{fit.par.sigma2[nu]!r}"
            row += "".join(f",{fit.par.phi[nu, k]!r}" for k in range(fit.p))
            lines.append(row)
    return "\n".join(lines) + "\n"


def parse_result(text: str) -> dict:
    """Read a result file into ``{key: str}`` plus ``{block: [row dicts]}``."""
    out: dict = {}
    block = None
    header = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            block = line[1:-1]
            out[block] = []
            header = None
            continue
        if block is None:
            k, v = line.split("=", 1)
            out[k] = v
        elif header is None:
            header = line.split(",")
        else:
            out[block].append(dict(zip(header, line.split(","))))
    return out
