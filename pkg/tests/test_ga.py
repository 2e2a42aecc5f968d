import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdlseg.core import PARModel, Segmentation, validate_series
from mdlseg.ga import (
    Chromosome,
    GaConfig,
    GeneticSearch,
    Objective,
    _scan,
    crossover,
    fast_profile,
    init_population,
    mutate,
    rank_select,
    rank_weights,
    run_ga,
)
from mdlseg.regression import cochrane_orcutt, segmentation_score
from mdlseg.simulate import FixedDeltas, KappaRandomWalk, StudySpec, simulate_series

from oracles import exhaustive_argmin


class Scripted:
    """Stands in for a Generator; ``random()`` replays a fixed list."""

    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


class TableObjective:
    """Fitness looked up from a function of the key; records every call."""

    def __init__(self, fn):
        self.fn = fn
        self.calls = []
        self.evaluations = 0
        self.cache = {}

    def __call__(self, seg):
        self.calls.append(seg)
        self.evaluations += 1
        return self.fn(seg)


def small_series(seed=0, T=4, d=12, shift=3.0, tau=25):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(T * d)
    x[tau - 1:] += shift
    return validate_series(x, T)


def chrom(p, taus, fitness):
    return Chromosome(Segmentation.of(p, taus), fitness)


# -- configuration -------------------------------------------------------------

def test_config_defaults():
    cfg = GaConfig()
    assert (cfg.n_p, cfg.p_m, cfg.n_islands, cfg.migration_interval, cfg.n_migrants,
            cfg.converge_migrations, cfg.max_migrations, cfg.min_cycles, cfg.p_max) == \
        (30, 0.05, 40, 5, 1, 10, 25, 1, 3)
    assert cfg.crossover_prob(100) == pytest.approx(0.99)
    assert fast_profile().n_islands == 8 and fast_profile().max_migrations == 15


@pytest.mark.parametrize("bad", [dict(p_b=1.5), dict(p_m=-0.1), dict(n_p=0), dict(p_max=-1),
                                 dict(n_islands=0), dict(variant="nope")])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        GaConfig(**bad)


# -- initial population --------------------------------------------------------

def test_scan_pb_zero_gives_no_changepoints(rng):
    cfg = GaConfig()
    assert all(_scan(rng, 1200, 12, cfg, 0.0) == () for _ in range(100))


def test_scan_pb_one_is_deterministic(rng):
    taus = _scan(rng, 1200, 12, GaConfig(), 1.0)
    assert taus == tuple(range(13, 1189, 12))
    assert taus[:3] == (13, 25, 37)


def test_default_birth_prob_gives_six_changepoints_per_century(rng):
    cfg = GaConfig()
    p_b = cfg.birth_prob(1200, 12)
    m = [len(_scan(rng, 1200, 12, cfg, p_b)) for _ in range(10_000)]
    assert abs(np.mean(m) - 6.0) <= 1.0


def test_init_population_shape_and_distinctness():
    X = small_series()
    cfg = GaConfig(n_islands=3, n_p=10, p_max=2)
    rngs = [np.random.default_rng(i) for i in range(3)]
    islands = init_population(X, cfg, rngs)
    assert len(islands) == 3
    for island in islands:
        assert len(island) == 10
        assert len({c.key for c in island}) == 10
        for c in island:
            assert c.seg.is_admissible(X.N, X.period, 1, 2)


def test_init_order_uniform(rng):
    cfg = GaConfig()
    p = [int(rng.integers(0, cfg.p_max + 1)) for _ in range(8000)]
    counts = np.bincount(p, minlength=4) / 8000
    assert np.all(np.abs(counts - 0.25) < 0.02)


# -- selection -----------------------------------------------------------------

def test_rank_weights_two_members():
    w = rank_weights([1.0, 2.0])
    assert w[0] / w.sum() == pytest.approx(2 / 3)


def test_rank_weights_worst_of_thirty():
    w = rank_weights(np.arange(30.0))
    assert w[-1] / w.sum() == pytest.approx(1 / 465)
    assert w[0] / w.sum() == pytest.approx(30 / 465)


def test_rank_weights_ties_uniform():
    w = rank_weights([5.0] * 7)
    assert np.allclose(w / w.sum(), 1 / 7)


def test_rank_select_frequency(rng):
    island = [chrom(0, (), 1.0), chrom(1, (), 2.0)]
    first = [rank_select(island, rng)[0] is island[0] for _ in range(6000)]
    assert abs(np.mean(first) - 2 / 3) < 0.02


def test_rank_select_parents_distinct(rng):
    island = [chrom(p, (), float(p)) for p in range(4)]
    for _ in range(200):
        a, b = rank_select(island, rng)
        assert a is not b


# -- crossover -----------------------------------------------------------------

MOTHER = chrom(1, (200, 320, 600), 10.0)
FATHER = chrom(2, (205, 300, 710, 850), 11.0)


def test_crossover_worked_example_keep_first():
    # crossover happens, mother's p, keep 200 (205 skipped without a draw),
    # drop 300, keep 320, keep 600, drop 710, keep 850
    rng = Scripted([0.0, 0.3, 0.1, 0.9, 0.1, 0.1, 0.9, 0.1])
    child = crossover(MOTHER, FATHER, GaConfig(), rng, 12, 100)
    assert child == Segmentation.of(1, (200, 320, 600, 850))
    assert rng.values == []


def test_crossover_worked_example_drop_first():
    # father's p; 200 dropped, so 205 gets its own draw and is kept; 300 is a
    # full cycle later and is drawn as well; the rest are dropped
    rng = Scripted([0.0, 0.7, 0.9, 0.1, 0.1, 0.9, 0.9, 0.9, 0.9])
    child = crossover(MOTHER, FATHER, GaConfig(), rng, 12, 100)
    assert child == Segmentation.of(2, (205, 300))
    assert rng.values == []


def test_crossover_without_mating_copies_fitter_parent():
    rng = Scripted([0.999])
    child = crossover(FATHER, MOTHER, GaConfig(), rng, 12, 100)
    assert child == MOTHER.seg


def test_crossover_identical_parents(rng):
    parent = chrom(1, (100, 500, 900), 1.0)
    kept = np.zeros(3)
    n = 8000
    for _ in range(n):
        child = crossover(parent, parent, GaConfig(p_c=1.0), rng, 12, 100)
        assert set(child.taus) <= set(parent.seg.taus)
        kept += [t in child.taus for t in parent.seg.taus]
    assert np.all(np.abs(kept / n - 0.5) < 0.02)


def test_crossover_empty_parents(rng):
    a, b = chrom(0, (), 1.0), chrom(3, (), 2.0)
    for _ in range(50):
        assert crossover(a, b, GaConfig(p_c=1.0), rng, 12, 100).m == 0


@given(st.lists(st.integers(13, 1188), max_size=8), st.lists(st.integers(13, 1188), max_size=8),
       st.integers(0, 2**32 - 1))
def test_crossover_child_admissible(ta, tb, seed):
    def space(ts):
        out = []
        for t in sorted(set(ts)):
            if not out or t - out[-1] >= 12:
                out.append(t)
        return out
    a, b = chrom(0, space(ta), 1.0), chrom(1, space(tb), 2.0)
    child = crossover(a, b, GaConfig(p_c=1.0), np.random.default_rng(seed), 12, 100)
    assert child.is_admissible(1200, 12, 1, 3)
    assert set(child.taus) <= set(a.seg.taus) | set(b.seg.taus)


# -- mutation ------------------------------------------------------------------

def test_mutate_pm_zero_is_identity(rng):
    seg = Segmentation.of(2, (13, 40))
    cfg = GaConfig(p_m=0.0)
    assert all(mutate(seg, cfg, rng, 48, 4, 0.5) is seg for _ in range(100))


def test_mutate_keep_branches_is_noop():
    seg = Segmentation.of(2, (13, 40))
    # mutation fires, keep p, keep taus
    assert mutate(seg, GaConfig(p_m=1.0), Scripted([0.0, 0.1, 0.1]), 48, 4, 0.5) == seg


def test_mutate_fresh_branch_half_the_time(rng):
    seg = Segmentation.of(1, (13,))
    cfg = GaConfig(p_m=1.0)
    # with p_b = 0 a fresh draw has no changepoints, which marks the branch
    fresh = [mutate(seg, cfg, rng, 48, 4, 0.0).m == 0 for _ in range(10_000)]
    assert abs(np.mean(fresh) - 0.5) <= 0.02


# -- steady-state step and migration -------------------------------------------

def _search_with(fn, **cfg):
    X = small_series()
    obj = TableObjective(fn)
    g = GeneticSearch(X, GaConfig(**cfg), objective=obj)
    return g, obj


def test_step_replaces_worst_even_with_worse_child():
    g, obj = _search_with(lambda seg: 100.0 + seg.p + 0.01 * sum(seg.taus),
                          n_islands=1, n_p=5, p_max=3)
    g.initialize()
    island = g.islands[0]
    before = {c.key for c in island}
    worst = max(island, key=lambda c: c.fitness).key
    obj.fn = lambda seg: 1e6
    assert g.step(0)
    after = {c.key for c in g.islands[0]}
    assert len(g.islands[0]) == 5 and len(after) == 5
    assert worst not in after
    assert len(after - before) == 1
    new = (after - before).pop()
    assert [c.fitness for c in g.islands[0] if c.key == new] == [1e6]


def test_step_child_fitter_than_all_becomes_best():
    g, obj = _search_with(lambda seg: 100.0 + seg.p + 0.01 * sum(seg.taus),
                          n_islands=1, n_p=5)
    g.initialize()
    obj.fn = lambda seg: -1.0
    g.step(0)
    assert g.best().fitness == -1.0


def test_step_stalls_when_no_new_child_exists():
    # p_max=0 and a series too short for any changepoint: one possible chromosome
    X = validate_series(np.random.default_rng(0).standard_normal(8), 4)
    g = GeneticSearch(X, GaConfig(n_islands=1, n_p=1, p_max=0))
    g.initialize()
    assert not g.step(0)
    assert g.stalled[0]


def test_migrate_two_islands_exchange_bests():
    g, _ = _search_with(lambda seg: float(seg.p) + 0.001 * sum(seg.taus),
                        n_islands=2, n_p=6)
    g.initialize()
    best = [min(i, key=lambda c: c.fitness) for i in g.islands]
    g.migrate()
    assert best[1] in g.islands[0] and best[0] in g.islands[1]
    assert all(len(i) == 6 for i in g.islands)


def test_migrate_common_best_is_fitness_noop():
    g, _ = _search_with(lambda seg: float(seg.p) + 0.001 * sum(seg.taus),
                        n_islands=4, n_p=6)
    g.initialize()
    common = chrom(0, (), -5.0)
    for island in g.islands:
        island[0] = common
    g.migrate()
    assert all(min(c.fitness for c in i) == -5.0 for i in g.islands)


def test_migrate_each_island_receives_one_copy():
    g, _ = _search_with(lambda seg: float(seg.p) + 0.001 * sum(seg.taus) + 1e-9 * seg.m,
                        n_islands=40, n_p=5)
    g.initialize()
    before = [list(i) for i in g.islands]
    bests = [min(i, key=lambda c: c.fitness) for i in before]
    g.migrate()
    for j, (old, new) in enumerate(zip(before, g.islands)):
        changed = [k for k in range(5) if new[k] is not old[k]]
        assert len(changed) <= 1
        worst = max(range(5), key=lambda k: (old[k].fitness, k))
        incoming = new[worst]
        assert any(incoming is b for i, b in enumerate(bests) if i != j)


# -- whole-search properties ---------------------------------------------------

def test_trace_format_and_stop_rule():
    X = small_series()
    lines = []
    g = GeneticSearch(X, GaConfig(n_islands=3, n_p=8, p_max=1, max_migrations=25),
                      progress=lines.append)
    fit = g.run()
    assert lines and lines[0].startswith("migration=1 best_mdl=")
    assert g.migrations <= 25
    if g.migrations < 25:
        # stopped on convergence: the last M_c + 1 reported bests agree
        assert len({ln.split(" m=")[1] for ln in lines[-11:]}) == 1
    assert fit.mdl == pytest.approx(g.best().fitness, rel=1e-9)


@settings(max_examples=15)
@given(st.integers(0, 2**31 - 1), st.integers(0, 50))
def test_archipelago_minimum_never_increases_and_all_admissible(seed, series_seed):
    X = small_series(series_seed)
    cfg = GaConfig(n_islands=3, n_p=6, p_max=1, seed=seed)

    class Recording(Objective):
        seen = []

        def __call__(self, seg):
            assert seg.is_admissible(X.N, X.period, cfg.min_cycles, cfg.p_max)
            return super().__call__(seg)

    g = GeneticSearch(X, cfg, objective=Recording(X, cfg))
    g.initialize()
    best = g.best().fitness
    for _ in range(6):
        for _ in range(cfg.migration_interval):
            g.evolve(1)
            now = g.best().fitness
            assert now <= best
            best = now
        g.migrate()
        assert g.best().fitness <= best
        best = g.best().fitness


def test_determinism_across_worker_counts():
    X = small_series(3)
    runs = []
    for workers in (1, 4):
        g = GeneticSearch(X, GaConfig(n_islands=6, n_p=10, p_max=1, seed=11, workers=workers))
        fit = g.run()
        runs.append((fit.segmentation.key, fit.mdl, g.trace, g.objective.evaluations))
    assert runs[0] == runs[1]


def test_fitness_cache_matches_fresh_fits():
    X = small_series(5)
    g = GeneticSearch(X, GaConfig(n_islands=4, n_p=10, p_max=3, seed=2))
    g.run()
    assert len(g.objective.cache) > 50
    for (p, taus), value in g.objective.cache.items():
        fresh = cochrane_orcutt(X, Segmentation.of(p, taus)).mdl
        if math.isinf(fresh):
            assert math.isinf(value)
        else:
            assert value == pytest.approx(fresh, rel=1e-9)


def test_matches_exhaustive_argmin_small_space():
    T, d = 4, 12
    X = small_series(7, T, d)
    cfg = GaConfig(p_max=1, m_max=2)

    def score(p, taus):
        return cochrane_orcutt(X, Segmentation.of(p, taus)).mdl

    best_val, best_p, best_taus = exhaustive_argmin(X, score, 1, 1, 2)
    hits = 0
    for seed in range(10):
        fit = run_ga(X, cfg.with_(seed=seed))
        hits += fit.segmentation.key == (best_p, tuple(best_taus))
    assert hits >= 9


# -- Monte Carlo against known truth -------------------------------------------

def _spec(taus, kappa, replicates=50):
    return StudySpec(replicates, 4, 30, taus, PARModel.white_noise(np.ones(4)), np.zeros(4),
                     0.0, KappaRandomWalk(kappa), False, fast_profile().with_(p_max=1), 0)


def test_one_large_shift_is_found():
    spec = _spec((61,), 3.0)
    good = 0
    for i in range(50):
        X = simulate_series(spec, np.random.default_rng(1000 + i))
        fit = run_ga(X, spec.ga_cfg.with_(seed=i))
        good += fit.m == 1 and abs(fit.taus[0] - 61) <= 4
    assert good >= 45


@pytest.mark.xfail(strict=True, reason="the objective charges no log N for the first "
                   "changepoint, so a spurious one is usually cheaper than none; see "
                   "test_null_model_spurious_changepoint_is_cheaper")
def test_null_model_finds_no_changepoints():
    spec = _spec((), 1.0)
    zero = 0
    for i in range(50):
        X = simulate_series(spec, np.random.default_rng(2000 + i))
        zero += run_ga(X, spec.ga_cfg.with_(seed=i)).m == 0
    assert zero >= 45


def test_null_model_spurious_changepoint_is_cheaper():
    # Exhaustive m <= 1 comparison on the same null series: the objective itself
    # prefers one changepoint in most runs, by less than the log N it leaves out.
    spec = _spec((), 1.0)
    prefer_one, margins = 0, []
    for i in range(50):
        X = simulate_series(spec, np.random.default_rng(2000 + i))
        s0 = min(segmentation_score(X, Segmentation.of(p, ())) for p in (0, 1))
        s1 = min(segmentation_score(X, Segmentation.of(p, (t,)))
                 for p in (0, 1) for t in range(5, X.N - 3))
        prefer_one += s1 < s0
        margins.append(s0 - s1)
    assert prefer_one > 25
    assert np.median(margins) < math.log(spec.N)


def test_fixed_delta_spec_accepted():
    spec = _spec((61,), 3.0).with_(shift_mode=FixedDeltas((2.0,)))
    X, truth = simulate_series(spec, np.random.default_rng(0), return_truth=True)
    assert truth.deltas.tolist() == [2.0]
