"""Island-model genetic algorithm over segmentations ``(m, p, tau_1..tau_m)``.

Each island holds ``n_p`` distinct chromosomes. A generation is one
steady-state step per island: breed children (rank selection, uniform
crossover, mutation) until one is new to the island, then overwrite the
island's least fit member with it. Every ``migration_interval`` generations
each island's worst member is overwritten by the best member of a randomly
chosen other island.
"""

from __future__ import annotations

import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .core import (
    FittedModel,
    InadmissibleSegmentation,
    MdlsegError,
    PeriodicSeries,
    Segmentation,
)
from .mdl import MdlVariant
from .regression import cochrane_orcutt, segmentation_score


@dataclass(frozen=True)
class GaConfig:
    n_p: int = 30
    # None: calibrated so that about 0.06 * d changepoints are drawn per scan
    p_b: float | None = None
    # None: 1 - min_cycles / d
    p_c: float | None = None
    p_m: float = 0.05
    n_islands: int = 40
    migration_interval: int = 5
    n_migrants: int = 1
    converge_migrations: int = 10
    max_migrations: int = 25
    min_cycles: int = 1
    p_max: int = 3
    m_max: int | None = None
    max_duplicates: int = 100
    # steady-state replacements per island that make up one generation
    steps_per_generation: int = 1
    accept_if_better: bool = False
    seed: int = 0
    workers: int = 1
    # model being fitted
    trend: bool = True
    single_mu: bool = False
    variant: str = "standard"

    def __post_init__(self):
        for name in ("p_b", "p_c", "p_m"):
            val = getattr(self, name)
            if val is not None and not 0.0 <= val <= 1.0:
                raise ValueError(f"{name}={val} outside [0, 1]")
        for name in ("n_p", "n_islands", "migration_interval", "n_migrants",
                     "converge_migrations", "max_migrations", "min_cycles",
                     "max_duplicates", "workers", "steps_per_generation"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.p_max < 0:
            raise ValueError("p_max must be >= 0")
        if self.m_max is not None and self.m_max < 0:
            raise ValueError("m_max must be >= 0")
        if self.n_migrants > self.n_p:
            raise ValueError("n_migrants cannot exceed n_p")
        MdlVariant.parse(self.variant)

    def with_(self, **changes) -> "GaConfig":
        return replace(self, **changes)

    def crossover_prob(self, d: int) -> float:
        return self.p_c if self.p_c is not None else max(0.0, 1.0 - self.min_cycles / d)

    def birth_prob(self, N: int, T: int) -> float:
        """Per-slot changepoint probability used by the initial scan.

        With ``L`` candidate slots and each accepted changepoint consuming a
        further ``m_l*T - 1`` slots, a per-slot rate ``q`` yields roughly
        ``L q / (1 + (m_l T - 1) q)`` changepoints; the default solves this
        for an expected ``0.06 * d``.
        """
        if self.p_b is not None:
            return self.p_b
        gap = self.min_cycles * T
        slots = N - 2 * gap + 1
        if slots <= 0:
            return 0.0
        target = 0.06 * (N // T)
        denom = slots - target * (gap - 1)
        return 1.0 if denom <= target else target / denom


def fast_profile(cfg: GaConfig | None = None) -> GaConfig:
    """Reduced archipelago for desk-scale studies (not the published settings)."""
    return (cfg or GaConfig()).with_(n_islands=8, max_migrations=15)


@dataclass(frozen=True)
class Chromosome:
    seg: Segmentation
    fitness: float

    @property
    def key(self):
        return self.seg.key


class Objective:
    """Memoized fitness: Cochrane-Orcutt fit then MDL score, +inf on failure."""

    def __init__(self, X: PeriodicSeries, cfg: GaConfig, compiled: bool = True):
        self.X = X
        self.cfg = cfg
        self.compiled = compiled
        self.cache: dict = {}
        self.evaluations = 0
        self._lock = threading.Lock()

    def fit(self, seg: Segmentation) -> FittedModel:
        return cochrane_orcutt(self.X, seg, trend=self.cfg.trend,
                               single_mu=self.cfg.single_mu, variant=self.cfg.variant)

    def __call__(self, seg: Segmentation) -> float:
        key = seg.key
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        # Never score an inadmissible chromosome.
        seg.check(self.X.N, self.X.period, self.cfg.min_cycles, self.cfg.p_max)
        if self.cfg.m_max is not None and seg.m > self.cfg.m_max:
            raise InadmissibleSegmentation(f"m={seg.m} exceeds m_max={self.cfg.m_max}")
        try:
            if self.compiled:
                value = segmentation_score(self.X, seg, trend=self.cfg.trend,
                                           single_mu=self.cfg.single_mu,
                                           variant=self.cfg.variant)
            else:
                value = self.fit(seg).mdl
        except MdlsegError:
            value = math.inf
        except (np.linalg.LinAlgError, FloatingPointError, ValueError):
            value = math.inf
        if math.isnan(value):
            value = math.inf
        with self._lock:
            self.cache[key] = value
            self.evaluations += 1
        return value


def _scan(rng: np.random.Generator, N: int, T: int, cfg: GaConfig, p_b: float) -> tuple[int, ...]:
    """Sequential coin scan for changepoint times.

    Starting at ``1 + m_l*T``, a head makes the current time a changepoint and
    jumps ``m_l*T`` ahead, a tail moves one step; the scan ends past
    ``N - m_l*T``. Runs of tails are drawn as geometric variates.
    """
    gap = cfg.min_cycles * T
    last = N - gap
    t = 1 + gap
    taus = []
    if p_b <= 0.0:
        return ()
    m_max = cfg.m_max if cfg.m_max is not None else N
    while t <= last and len(taus) < m_max:
        t += int(rng.geometric(p_b)) - 1
        if t > last:
            break
        taus.append(t)
        t += gap
    return tuple(taus)


def random_chromosome(rng, N: int, T: int, cfg: GaConfig, p_b: float) -> Segmentation:
    p = int(rng.integers(0, cfg.p_max + 1))
    return Segmentation.of(p, _scan(rng, N, T, cfg, p_b))


def init_population(X: PeriodicSeries, cfg: GaConfig, rngs, objective: Objective | None = None):
    """One list of ``n_p`` distinct chromosomes per island.

    ``rngs`` supplies one generator per island.
    """
    objective = objective or Objective(X, cfg)
    N, T = X.N, X.period
    p_b = cfg.birth_prob(N, T)
    islands = []
    for rng in rngs:
        members: list[Chromosome] = []
        seen = set()
        attempts = 0
        while len(members) < cfg.n_p:
            seg = random_chromosome(rng, N, T, cfg, p_b)
            attempts += 1
            # tiny search spaces cannot fill an island with distinct members
            if seg.key in seen and attempts < 1000 * cfg.n_p:
                continue
            seen.add(seg.key)
            members.append(Chromosome(seg, objective(seg)))
        islands.append(members)
    return islands


def rank_weights(fitness) -> np.ndarray:
    """Selection weights ``rank + 1``; the least fit has rank 0, ties share ranks."""
    f = -np.asarray(fitness, dtype=float)
    order = np.argsort(f, kind="stable")
    s = f[order]
    # average 1-based rank over each run of equal values
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    ends = np.r_[starts[1:], s.size]
    ranks = np.empty(s.size)
    ranks[order] = np.repeat((starts + ends + 1) / 2.0, ends - starts)
    return ranks


def _draw(w, rng) -> int:
    # same stream and result as rng.choice(len(w), p=w / w.sum())
    cdf = np.cumsum(w / w.sum())
    cdf /= cdf[-1]
    return int(cdf.searchsorted(rng.random(), side="right"))


def rank_select(island, rng) -> tuple[Chromosome, Chromosome]:
    n = len(island)
    w = rank_weights([c.fitness for c in island])
    i = _draw(w, rng)
    if n == 1:
        return island[i], island[i]
    w[i] = 0.0
    j = _draw(w, rng)
    return island[i], island[j]


def crossover(mother: Chromosome, father: Chromosome, cfg: GaConfig, rng, T: int,
              d: int) -> Segmentation:
    """Uniform crossover; with probability ``1 - p_c`` copies the fitter parent.

    Candidates are the sorted union of both parents' times (a time shared by
    both parents is one candidate). Each is kept with probability 1/2; a kept
    time discards the candidates closer than ``m_l*T`` after it.
    """
    if rng.random() >= cfg.crossover_prob(d):
        fitter = mother if mother.fitness <= father.fitness else father
        return fitter.seg
    p = mother.seg.p if rng.random() < 0.5 else father.seg.p
    gap = cfg.min_cycles * T
    m_max = cfg.m_max if cfg.m_max is not None else math.inf
    taus: list[int] = []
    for t in sorted(set(mother.seg.taus) | set(father.seg.taus)):
        if taus and t < taus[-1] + gap:
            continue
        if len(taus) >= m_max:
            break
        if rng.random() < 0.5:
            taus.append(t)
    return Segmentation.of(p, taus)


def mutate(child: Segmentation, cfg: GaConfig, rng, N: int, T: int, p_b: float) -> Segmentation:
    if rng.random() >= cfg.p_m:
        return child
    p = child.p if rng.random() < 0.5 else int(rng.integers(0, cfg.p_max + 1))
    taus = child.taus if rng.random() < 0.5 else _scan(rng, N, T, cfg, p_b)
    return Segmentation.of(p, taus)


def _worst_index(island) -> int:
    f = [c.fitness for c in island]
    worst = max(f)
    return max(i for i, v in enumerate(f) if v == worst)


def _best_index(island) -> int:
    f = [c.fitness for c in island]
    return f.index(min(f))


class GeneticSearch:
    """Stateful island GA; ``run()`` returns the best fitted model."""

    def __init__(self, X: PeriodicSeries, cfg: GaConfig | None = None,
                 progress: Callable[[str], None] | None = None,
                 objective: Objective | None = None):
        self.X = X
        self.cfg = cfg = cfg or GaConfig()
        self.N, self.T, self.d = X.N, X.period, X.cycles
        self.p_b = cfg.birth_prob(self.N, self.T)
        self.objective = objective or Objective(X, cfg)
        root = np.random.SeedSequence(cfg.seed)
        children = root.spawn(cfg.n_islands + 1)
        self.rngs = [np.random.default_rng(s) for s in children[:-1]]
        self.migration_rng = np.random.default_rng(children[-1])
        self.progress = progress
        self.islands: list[list[Chromosome]] = []
        self.stalled: list[bool] = []
        self.trace: list[str] = []
        self.best_history: list[float] = []
        self.generations = 0
        self.migrations = 0

    def initialize(self):
        self.islands = init_population(self.X, self.cfg, self.rngs, self.objective)
        self.stalled = [False] * len(self.islands)
        self.best_history = [self.best().fitness]

    def step(self, i: int) -> bool:
        """One steady-state replacement on island ``i``; False if it is stalled."""
        if self.stalled[i]:
            return False
        island = self.islands[i]
        rng = self.rngs[i]
        present = {c.key for c in island}
        cfg = self.cfg
        for _ in range(cfg.max_duplicates):
            mother, father = rank_select(island, rng)
            child = crossover(mother, father, cfg, rng, self.T, self.d)
            child = mutate(child, cfg, rng, self.N, self.T, self.p_b)
            if child.key not in present:
                break
        else:
            self.stalled[i] = True
            return False
        fitness = self.objective(child)
        w = _worst_index(island)
        if cfg.accept_if_better and fitness >= island[w].fitness:
            return True
        island[w] = Chromosome(child, fitness)
        return True

    def _evolve_island(self, i: int, generations: int):
        for _ in range(generations * self.cfg.steps_per_generation):
            self.step(i)

    def evolve(self, generations: int):
        n = len(self.islands)
        if self.cfg.workers > 1 and n > 1:
            with ThreadPoolExecutor(self.cfg.workers) as ex:
                list(ex.map(lambda i: self._evolve_island(i, generations), range(n)))
        else:
            for i in range(n):
                self._evolve_island(i, generations)
        self.generations += generations

    def migrate(self):
        """Overwrite each island's worst members with another island's best."""
        n = len(self.islands)
        if n < 2:
            return
        k = self.cfg.n_migrants
        donors_best = []
        for island in self.islands:
            order = sorted(range(len(island)), key=lambda j: (island[j].fitness, j))
            donors_best.append([island[j] for j in order[:k]])
        for j in range(n):
            i = int(self.migration_rng.integers(0, n - 1))
            if i >= j:
                i += 1
            island = self.islands[j]
            order = sorted(range(len(island)), key=lambda q: (-island[q].fitness, -q))
            for slot, migrant in zip(order[:k], donors_best[i]):
                island[slot] = migrant
            # a migrant may revive an island that had stopped finding new children
            self.stalled[j] = False
        self.migrations += 1

    def best(self) -> Chromosome:
        best = None
        for island in self.islands:
            c = island[_best_index(island)]
            if best is None or c.fitness < best.fitness:
                best = c
        return best

    def run(self) -> FittedModel:
        cfg = self.cfg
        if not self.islands:
            self.initialize()
        streak = 0
        prev_key = None
        for _ in range(cfg.max_migrations):
            self.evolve(cfg.migration_interval)
            self.migrate()
            best = self.best()
            self.best_history.append(best.fitness)
            line = (f"migration={self.migrations} best_mdl={best.fitness:.10g} "
                    f"m={best.seg.m} p={best.seg.p} taus={','.join(map(str, best.seg.taus))}")
            self.trace.append(line)
            if self.progress is not None:
                self.progress(line)
            streak = streak + 1 if best.key == prev_key else 0
            prev_key = best.key
            if streak >= cfg.converge_migrations:
                break
        fit = self.objective.fit(self.best().seg)
        return fit


def default_workers() -> int:
    env = os.environ.get("MDLSEG_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_ga(X: PeriodicSeries, cfg: GaConfig | None = None,
           progress: Callable[[str], None] | None = None) -> FittedModel:
    """Search segmentations of ``X`` and return the best fitted model."""
    return GeneticSearch(X, cfg, progress).run()
