"""Synthetic series with known changepoints and replicated segmentation studies."""

from __future__ import annotations

import json
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import MeanParams, PARModel, PeriodicSeries, Segmentation, validate_series
from .ga import GaConfig, run_ga
from .par import simulate_par, stationary_variances

# Monthly parameters of the simulation design (degrees Celsius).
TABLE1_MU = np.array([-0.61, 0.99, 2.35, 4.91, 8.74, 12.15, 15.51, 15.47, 12.79,
                      7.82, 2.32, -0.25])
TABLE1_PHI1 = np.array([0.272, 0.284, 0.478, 0.286, 0.335, 0.279, 0.245, 0.137,
                        -0.127, 0.082, 0.196, 0.214])
TABLE1_SIGMA2 = np.array([2.713, 2.748, 1.871, 1.717, 2.474, 2.403, 2.569, 1.910,
                          2.826, 2.488, 2.394, 2.256])
TABLE2_TAUS = (240, 480, 600, 840, 900, 1020)
TABLE3_TAUS = (20, 40, 50, 70, 75, 85)


def table1_par() -> PARModel:
    return PARModel(TABLE1_PHI1[:, None], TABLE1_SIGMA2)


@dataclass(frozen=True)
class KappaRandomWalk:
    """Common shift size ``kappa`` process standard deviations, random sign."""

    kappa: float


@dataclass(frozen=True)
class FixedDeltas:
    """Regime levels ``Delta_2..Delta_{m+1}`` relative to the first regime."""

    deltas: tuple[float, ...]


@dataclass(frozen=True)
class StudySpec:
    replicates: int
    T: int
    d: int
    taus_true: tuple[int, ...]
    par_true: PARModel
    mu_true: np.ndarray
    alpha_true: float = 0.0
    shift_mode: KappaRandomWalk | FixedDeltas = KappaRandomWalk(1.0)
    iid_mode: bool = False
    ga_cfg: GaConfig = field(default_factory=GaConfig)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "taus_true", tuple(int(t) for t in self.taus_true))
        object.__setattr__(self, "mu_true", np.asarray(self.mu_true, dtype=float))
        if self.mu_true.size != self.T or self.par_true.period != self.T:
            raise ValueError("mu_true and par_true must have one entry per season")
        Segmentation.of(0, self.taus_true).check(self.N, self.T, self.ga_cfg.min_cycles)
        if isinstance(self.shift_mode, FixedDeltas) and \
                len(self.shift_mode.deltas) != len(self.taus_true):
            raise ValueError("need one fixed delta per changepoint")
        if self.iid_mode and self.par_true.order:
            raise ValueError("iid_mode requires white-noise errors")

    @property
    def N(self) -> int:
        return self.T * self.d

    @property
    def search_config(self) -> GaConfig:
        """GA settings actually used; iid mode fits white noise about one mean."""
        if self.iid_mode:
            return self.ga_cfg.with_(p_max=0, trend=False, single_mu=True,
                                     variant="single-mu")
        return self.ga_cfg

    def with_(self, **changes) -> "StudySpec":
        return replace(self, **changes)


def table2_spec(kappa: float, replicates: int = 1000, seed: int = 0,
                ga_cfg: GaConfig | None = None) -> StudySpec:
    return StudySpec(replicates, 12, 100, TABLE2_TAUS, table1_par(), TABLE1_MU, 0.0,
                     KappaRandomWalk(kappa), False, ga_cfg or GaConfig(), seed)


def table3_spec(a: float, replicates: int = 1000, seed: int = 0,
                ga_cfg: GaConfig | None = None) -> StudySpec:
    return StudySpec(replicates, 1, 100, TABLE3_TAUS, PARModel.white_noise([1.0]),
                     np.zeros(1), 0.0, KappaRandomWalk(a), True, ga_cfg or GaConfig(), seed)


def shift_size(spec: StudySpec) -> float:
    """Shift magnitude for ``kappa``: kappa times the root mean seasonal variance."""
    var = stationary_variances(spec.par_true)
    return spec.shift_mode.kappa * math.sqrt(float(np.mean(var)))


def shift_levels(spec: StudySpec, rng: np.random.Generator) -> np.ndarray:
    if isinstance(spec.shift_mode, FixedDeltas):
        return np.asarray(spec.shift_mode.deltas, dtype=float)
    size = shift_size(spec)
    signs = np.where(rng.random(len(spec.taus_true)) < 0.5, -1.0, 1.0)
    return np.cumsum(signs * size)


def simulate_series(spec: StudySpec, rng: np.random.Generator,
                    return_truth: bool = False):
    """One synthetic series; optionally also the true MeanParams used."""
    levels = shift_levels(spec, rng)
    noise = simulate_par(spec.par_true, spec.N, rng, burn_cycles=100)
    truth = MeanParams(spec.mu_true, spec.alpha_true, levels)
    seg = Segmentation.of(spec.par_true.order, spec.taus_true)
    x = truth.mean_path(spec.N, seg) + noise
    X = validate_series(x, spec.T)
    return (X, truth) if return_truth else X


@dataclass(frozen=True)
class ReplicateResult:
    index: int
    m: int
    p: int
    taus: tuple[int, ...]
    mdl: float
    failed: bool = False


@dataclass
class StudyResult:
    N: int
    replicates: list[ReplicateResult]

    @property
    def ok(self) -> list[ReplicateResult]:
        return [r for r in self.replicates if not r.failed]

    @property
    def failures(self) -> int:
        return sum(r.failed for r in self.replicates)

    @property
    def m_hist(self) -> dict:
        counts = Counter(r.m for r in self.ok)
        if self.failures:
            counts["failed"] = self.failures
        return dict(sorted(counts.items(), key=lambda kv: (isinstance(kv[0], str), kv[0])))

    @property
    def p_hist(self) -> dict:
        return dict(sorted(Counter(r.p for r in self.ok).items()))

    @property
    def tau_hist(self) -> np.ndarray:
        """``tau_hist[t]`` counts replicates flagging time t (index 0 unused)."""
        h = np.zeros(self.N + 1, dtype=int)
        for r in self.ok:
            for t in r.taus:
                h[t] += 1
        return h

    def m_fraction(self, m: int) -> float:
        return sum(r.m == m for r in self.ok) / len(self.replicates)

    def p_fraction(self, p: int) -> float:
        return sum(r.p == p for r in self.ok) / len(self.replicates)

    @property
    def summary(self) -> dict:
        ms = np.array([r.m for r in self.ok], dtype=float)
        sd = float(ms.std(ddof=1)) if ms.size > 1 else 0.0
        return {"mean_m": float(ms.mean()) if ms.size else float("nan"), "sd_m": sd}

    def to_text(self) -> str:
        lines = ["m,count"]
        lines += [f"{k},{v}" for k, v in self.m_hist.items()]
        lines += ["", "p,count"]
        lines += [f"{k},{v}" for k, v in self.p_hist.items()]
        lines += ["", "t,count"]
        h = self.tau_hist
        lines += [f"{t},{h[t]}" for t in np.flatnonzero(h)]
        lines += ["", json.dumps(self.summary)]
        return "\n".join(lines) + "\n"

    def replicates_csv(self) -> str:
        lines = ["replicate,m,p,taus,mdl,failed"]
        for r in self.replicates:
            taus = " ".join(map(str, r.taus))
            lines.append(f"{r.index},{r.m},{r.p},{taus},{r.mdl!r},{int(r.failed)}")
        return "\n".join(lines) + "\n"


def parse_study_text(text: str) -> dict:
    """Read back the blocks written by :meth:`StudyResult.to_text`."""
    out = {"m": {}, "p": {}, "t": {}, "summary": None}
    block = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("{"):
            out["summary"] = json.loads(line)
        elif line.endswith(",count"):
            block = line.split(",")[0]
        else:
            k, v = line.split(",")
            out[block][int(k) if k.lstrip("-").isdigit() else k] = int(v)
    return out


def _replicate_seeds(seed: int, n: int):
    return np.random.SeedSequence(seed).spawn(n)


def run_replicate(spec: StudySpec, index: int) -> ReplicateResult:
    child = _replicate_seeds(spec.seed, spec.replicates)[index]
    sim_seq, ga_seq = child.spawn(2)
    rng = np.random.default_rng(sim_seq)
    X = simulate_series(spec, rng)
    cfg = spec.search_config.with_(seed=int(ga_seq.generate_state(1)[0]))
    try:
        fit = run_ga(X, cfg)
    except Exception:  # noqa: BLE001 - a failed replicate is tallied, not fatal
        return ReplicateResult(index, -1, -1, (), math.inf, failed=True)
    return ReplicateResult(index, fit.m, fit.p, fit.taus, fit.mdl)


def _run_one(args):
    return run_replicate(*args)


def run_study(spec: StudySpec, workers: int = 1, progress=None,
              indices: Sequence[int] | None = None) -> StudyResult:
    """Simulate and segment every replicate; results do not depend on ``workers``."""
    indices = range(spec.replicates) if indices is None else indices
    jobs = [(spec, i) for i in indices]
    results = []
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            for r in ex.map(_run_one, jobs):
                results.append(r)
                if progress:
                    progress(r)
    else:
        for job in jobs:
            r = _run_one(job)
            results.append(r)
            if progress:
                progress(r)
    results.sort(key=lambda r: r.index)
    return StudyResult(spec.N, results)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace(";", ",").split(",") if v.strip()]


_GA_KEYS = {
    "islands": ("n_islands", int), "pop": ("n_p", int), "mstar": ("max_migrations", int),
    "mc": ("converge_migrations", int), "mi": ("migration_interval", int),
    "mn": ("n_migrants", int), "mlmin": ("min_cycles", int), "pmax": ("p_max", int),
    "mmax": ("m_max", int), "pm": ("p_m", float), "pb": ("p_b", float), "pc": ("p_c", float),
    "variant": ("variant", str),
}


def parse_spec_text(text: str) -> StudySpec:
    """Build a StudySpec from ``key=value`` lines (``#`` starts a comment).

    ``preset=table2`` or ``preset=table3`` fills in the published designs; any
    other key overrides the preset.
    """
    kv = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        kv[k.strip().lower()] = v.strip()

    preset = kv.pop("preset", "").lower()
    ga_changes = {}
    for key, (attr, conv) in _GA_KEYS.items():
        if key in kv:
            ga_changes[attr] = conv(kv.pop(key))
    profile = kv.pop("profile", "paper").lower()
    ga_cfg = GaConfig().with_(**ga_changes)
    if profile == "fast":
        ga_cfg = ga_cfg.with_(n_islands=ga_changes.get("n_islands", 8),
                              max_migrations=ga_changes.get("max_migrations", 15))

    if preset in ("table2", "table1"):
        base = table2_spec(1.0, ga_cfg=ga_cfg)
    elif preset == "table3":
        base = table3_spec(1.0, ga_cfg=ga_cfg)
    elif preset:
        raise ValueError(f"unknown preset {preset!r}")
    else:
        base = None

    T = int(kv.pop("period", kv.pop("t", base.T if base else 0)))
    d = int(kv.pop("cycles", kv.pop("d", base.d if base else 0)))
    if T < 1 or d < 1:
        raise ValueError("period and cycles are required without a preset")
    taus = tuple(_ints(kv.pop("taus"))) if "taus" in kv else (base.taus_true if base else ())
    mu = np.array(_floats(kv.pop("mu"))) if "mu" in kv else (base.mu_true if base else np.zeros(T))
    if mu.size == 1 and T > 1:
        mu = np.full(T, mu[0])
    sigma2 = (np.array(_floats(kv.pop("sigma2"))) if "sigma2" in kv
              else (base.par_true.sigma2 if base else np.ones(T)))
    if sigma2.size == 1 and T > 1:
        sigma2 = np.full(T, sigma2[0])
    phis = []
    if "phi" in kv:
        phis.append(_floats(kv.pop("phi")))
    k = 1
    while f"phi{k}" in kv:
        phis.append(_floats(kv.pop(f"phi{k}")))
        k += 1
    if phis:
        phi = np.column_stack([np.broadcast_to(np.array(p), (T,)) for p in phis])
    else:
        phi = base.par_true.phi if base else np.zeros((T, 0))
    iid = kv.pop("iid", str(base.iid_mode) if base else "false").lower() in ("1", "true", "yes")
    if iid:
        phi = np.zeros((T, 0))
    if "kappa" in kv or "a" in kv:
        shift = KappaRandomWalk(float(kv.pop("kappa", kv.pop("a", "0"))))
    elif "deltas" in kv:
        shift = FixedDeltas(tuple(_floats(kv.pop("deltas"))))
    else:
        shift = base.shift_mode if base else KappaRandomWalk(0.0)
    spec = StudySpec(
        replicates=int(kv.pop("replicates", base.replicates if base else 1)),
        T=T, d=d, taus_true=taus, par_true=PARModel(phi, sigma2), mu_true=mu,
        alpha_true=float(kv.pop("alpha", base.alpha_true if base else 0.0)),
        shift_mode=shift, iid_mode=iid, ga_cfg=ga_cfg,
        seed=int(kv.pop("seed", base.seed if base else 0)),
    )
    if kv:
        raise ValueError(f"unknown spec keys: {', '.join(sorted(kv))}")
    return spec
