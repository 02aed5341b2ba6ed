import json

import numpy as np
import pytest
from scipy import stats

from stimloop.core import Catalog, Item, RngHandle
from stimloop.evolve import (
    EvolveConfig,
    IdentityGenerator,
    NearestNeighborGenerator,
    crossover,
    init_evolve,
    mutate,
    novelty_inject,
    run_evolve,
    run_offline,
)
from stimloop.surrogate import GuidanceConfig


def sphere_catalog(n, dim, seed, prefix="c"):
    g = np.random.default_rng(seed)
    rows = g.normal(size=(n, dim))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    return Catalog([Item(f"{prefix}{i}", rows[i]) for i in range(n)])


def cosine_reward(target):
    t = np.asarray(target, float)
    t = t / np.linalg.norm(t)

    def fn(item):
        e = item.embedding if isinstance(item, Item) else item
        return float(e @ t / np.linalg.norm(e))

    return fn


def seed_with_first_draw(value, bound):
    """Find a seed whose first integers(0, bound) draw equals `value`."""
    for s in range(10000):
        if int(RngHandle(s).gen.integers(0, bound)) == value:
            return s
    raise AssertionError("no seed found")


# ---------------------------------------------------------------- breeding

def test_crossover_midpoint_example():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    b = np.array([5.0, 6.0, 7.0, 8.0])
    s = seed_with_first_draw(2, 5)
    child = crossover(a, b, RngHandle(s))
    assert np.array_equal(child, [1.0, 2.0, 7.0, 8.0])


def test_crossover_boundary_cuts_pass_a_parent_through():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    b = np.array([5.0, 6.0, 7.0, 8.0])
    child0 = crossover(a, b, RngHandle(seed_with_first_draw(0, 5)))
    child4 = crossover(a, b, RngHandle(seed_with_first_draw(4, 5)))
    assert np.array_equal(child0, b)
    assert np.array_equal(child4, a)


def test_crossover_segments_are_verbatim_and_cut_is_uniform():
    g = np.random.default_rng(0)
    a = g.normal(size=6)
    b = g.normal(size=6)
    counts = np.zeros(7, dtype=int)
    rng = RngHandle(123)
    for _ in range(1400):
        child = crossover(a, b, rng)
        matches = [c for c in range(7)
                   if np.array_equal(child, np.concatenate([a[:c], b[c:]]))]
        assert matches, "child is not a single-point splice"
        counts[matches[0]] += 1
    assert counts.min() > 0
    # each cut should land near 1400/7 = 200
    assert np.all(np.abs(counts - 200) < 75)


def test_crossover_length_mismatch():
    with pytest.raises(ValueError, match="length mismatch"):
        crossover(np.ones(3), np.ones(4), RngHandle(0))


def test_mutate_shares_one_draw_across_coordinates():
    e = np.array([2.0, -3.0, 0.5, 8.0])
    rng = RngHandle(7)
    for _ in range(100):
        out = mutate(e, 0.1, rng)
        ratio = out / e
        assert np.allclose(ratio, ratio[0], rtol=1e-12)
        assert abs(ratio[0] - 1.0) <= 0.1
        assert ratio[0] > 0.0  # direction preserved


def test_mutate_zero_scale_is_identity():
    e = np.array([1.0, 2.0])
    assert np.array_equal(mutate(e, 0.0, RngHandle(3)), e)


def test_mutate_scale_bounds():
    with pytest.raises(ValueError):
        mutate(np.ones(2), 1.0, RngHandle(0))
    with pytest.raises(ValueError):
        mutate(np.ones(2), -0.1, RngHandle(0))


# ----------------------------------------------------------------- novelty

def test_novelty_skips_used_items():
    corpus = sphere_catalog(10, 4, seed=1)
    used = {f"c{i}" for i in range(10)}
    assert novelty_inject(corpus, used, 3, RngHandle(0)) == []
    partial = {f"c{i}" for i in range(9)}
    got = novelty_inject(corpus, partial, 3, RngHandle(0))
    assert [it.id for it in got] == ["c9"]


def test_novelty_zero_count_and_validation():
    corpus = sphere_catalog(4, 3, seed=2)
    assert novelty_inject(corpus, set(), 0, RngHandle(0)) == []
    with pytest.raises(ValueError):
        novelty_inject(corpus, set(), -1, RngHandle(0))


def test_novelty_draws_are_uniform():
    corpus = sphere_catalog(10, 4, seed=3)
    rng = RngHandle(42)
    hits = {f"c{i}": 0 for i in range(10)}
    runs = 1000
    for _ in range(runs):
        picked = novelty_inject(corpus, set(), 2, rng)
        ids = [it.id for it in picked]
        assert len(ids) == len(set(ids)) == 2
        for i in ids:
            hits[i] += 1
    for i, c in hits.items():
        assert abs(c / runs - 0.2) <= 0.03, f"item {i} drawn at {c / runs}"


# -------------------------------------------------------------- generators

def test_identity_generator_mints_fresh_ids():
    gen = IdentityGenerator()
    a = gen.generate(np.array([1.0, 0.0]), RngHandle(0))
    b = gen.generate(np.array([0.0, 1.0]), RngHandle(0))
    assert a.id != b.id
    assert np.array_equal(a.embedding, [1.0, 0.0])


def test_nearest_neighbor_generator_snaps_to_corpus():
    corpus = sphere_catalog(20, 6, seed=4)
    gen = NearestNeighborGenerator(corpus)
    probe = corpus[7].embedding * 3.0  # scaling must not change the winner
    out = gen.generate(probe, RngHandle(0))
    assert np.array_equal(out.embedding, corpus[7].embedding)
    assert out.payload == "c7"
    assert out.id.startswith("nn-")
    with pytest.raises(ValueError, match="degenerate"):
        gen.generate(np.zeros(6), RngHandle(0))


# ------------------------------------------------------------------- loop

def test_config_validation():
    for kwargs in ({"n_parents": 1}, {"n_offspring": 0}, {"n_novelty": -1},
                   {"seed_size": 1}, {"mutation_scale": 1.0},
                   {"alpha": 1.5}, {"top_k": 0}, {"temperature": 0.0},
                   {"max_iterations": 0}):
        with pytest.raises(ValueError):
            EvolveConfig(**kwargs).validate()


def test_init_seeds_scores_and_surrogate():
    corpus = sphere_catalog(30, 8, seed=5)
    calls = []

    def fn(item):
        calls.append(item.id)
        return cosine_reward(corpus[0].embedding)(item)

    cfg = EvolveConfig(seed_size=6)
    state = init_evolve(corpus, cfg, GuidanceConfig(), fn, RngHandle(9))
    assert len(state.catalog) == 6
    assert len(calls) == 6
    assert state.queries == 6
    assert np.allclose(state.scores, 1.0 / 6)
    assert state.gp is not None and state.gp.n == 6
    assert state.used_corpus_ids == {it.id for it in state.catalog}
    assert state.best_id in calls


def test_catalog_only_grows_and_old_items_survive():
    corpus = sphere_catalog(40, 8, seed=6)
    fn = cosine_reward(corpus[3].embedding)
    cfg = EvolveConfig(seed_size=8, n_offspring=2, n_novelty=2,
                       max_iterations=4)
    state, trace = run_evolve(corpus, cfg, GuidanceConfig(eta0=0.1), fn,
                              IdentityGenerator(), RngHandle(11))
    # 8 seeds + 4 * (2 offspring + 2 novelty)
    assert len(state.catalog) == 8 + 4 * 4
    assert state.queries == 8 + 4 * 2
    first_ids = [state.catalog[i].id for i in range(8)]
    assert len(set(first_ids)) == 8
    assert len(state.probs) == len(state.catalog)
    assert np.isclose(state.probs.sum(), 1.0)
    assert len(trace) == 4
    bests = [rec.best_reward for rec in trace]
    assert bests == sorted(bests)


def test_generator_failures_are_logged_not_fatal():
    corpus = sphere_catalog(20, 6, seed=7)
    fn = cosine_reward(corpus[0].embedding)

    class Broken:
        def generate(self, embedding, rng):
            raise RuntimeError("renderer offline")

    cfg = EvolveConfig(seed_size=5, n_offspring=2, n_novelty=1,
                       max_iterations=2)
    state, trace = run_evolve(corpus, cfg, None, fn, Broken(), RngHandle(2))
    assert state.queries == 5  # only the seed round consumed the oracle
    assert len(state.catalog) == 5 + 2  # novelty still flows in
    assert sum("generator failed" in e for e in state.events) == 4
    assert all(rec.item_ids == [] for rec in trace)


def test_budget_is_exact_including_trailing_partial_round():
    corpus = sphere_catalog(50, 8, seed=8)
    count = {"n": 0}
    base = cosine_reward(corpus[1].embedding)

    def fn(item):
        count["n"] += 1
        return base(item)

    cfg = EvolveConfig(seed_size=10, n_offspring=2, max_iterations=1000)
    state, _ = run_evolve(corpus, cfg, GuidanceConfig(eta0=0.1), fn,
                          IdentityGenerator(), RngHandle(3), budget=17)
    assert count["n"] == 17
    assert state.queries == 17
    assert len(state.history) == 17


def test_run_evolve_is_reproducible():
    corpus = sphere_catalog(40, 8, seed=9)
    fn = cosine_reward(corpus[2].embedding)
    cfg = EvolveConfig(seed_size=8, max_iterations=5)
    out = []
    for _ in range(2):
        state, trace = run_evolve(corpus, cfg, GuidanceConfig(), fn,
                                  IdentityGenerator(), RngHandle(77))
        out.append((state.best_reward,
                    json.dumps([r.to_json() for r in trace], sort_keys=True)))
    assert out[0] == out[1]


def test_evolution_beats_equal_budget_random_draws():
    dim = 16
    wins = 0
    seeds = range(20)
    for s in seeds:
        g = np.random.default_rng(1000 + s)
        target = g.normal(size=dim)
        corpus = sphere_catalog(80, dim, seed=500 + s)
        fn = cosine_reward(target)
        cfg = EvolveConfig(seed_size=10, n_offspring=2, n_novelty=2,
                           max_iterations=1000)
        state, _ = run_evolve(corpus, cfg, GuidanceConfig(), fn,
                              IdentityGenerator(), RngHandle(s), budget=40)
        draws = g.normal(size=(40, dim))
        draws /= np.linalg.norm(draws, axis=1, keepdims=True)
        rand_best = max(fn(Item("r", d)) for d in draws)
        if state.best_reward >= rand_best:
            wins += 1
    assert wins >= 16, f"evolution won only {wins}/20 seeds"


def test_guidance_does_not_hurt_at_equal_budget():
    dim = 12
    with_g, without_g = [], []
    for s in range(20):
        g = np.random.default_rng(3000 + s)
        target = g.normal(size=dim)
        corpus = sphere_catalog(60, dim, seed=700 + s)
        fn = cosine_reward(target)
        cfg = EvolveConfig(seed_size=8, n_offspring=2, n_novelty=2,
                           max_iterations=1000)
        on, _ = run_evolve(corpus, cfg, GuidanceConfig(), fn,
                           IdentityGenerator(), RngHandle(s), budget=30)
        off, _ = run_evolve(corpus, cfg, None, fn,
                            IdentityGenerator(), RngHandle(s), budget=30)
        with_g.append(on.best_reward)
        without_g.append(off.best_reward)
    # one-sided paired test: "guidance is worse" must find no support
    p = stats.ttest_rel(with_g, without_g, alternative="less").pvalue
    assert p > 0.05, f"guidance significantly hurt (p={p})"
    assert np.mean(with_g) >= np.mean(without_g) - 0.02


# ---------------------------------------------------------------- offline

def test_offline_budget_and_curve():
    dim = 8

    class Sampler:
        def batch(self, rng, n):
            z = rng.gen.standard_normal((n, dim))
            return z / np.linalg.norm(z, axis=1, keepdims=True)

    g = np.random.default_rng(5)
    target = g.normal(size=dim)
    count = {"n": 0}

    def fn(z):
        count["n"] += 1
        return float(z @ target / (np.linalg.norm(z) * np.linalg.norm(target)))

    z_best, best, curve = run_offline(fn, Sampler(), budget=30,
                                      guidance=GuidanceConfig(),
                                      rng=RngHandle(8))
    assert count["n"] == 30
    assert len(curve) == 30
    assert curve == sorted(curve)
    assert best == curve[-1]
    assert fn(z_best) == pytest.approx(best, abs=1e-12) or best >= max(curve[:-1])

    with pytest.raises(ValueError):
        run_offline(fn, Sampler(), budget=1, guidance=GuidanceConfig(),
                    rng=RngHandle(0))


def test_offline_climb_tends_to_help():
    # the climbed final query should usually beat pure exploration
    dim = 10

    class Sampler:
        def batch(self, rng, n):
            z = rng.gen.standard_normal((n, dim))
            return z / np.linalg.norm(z, axis=1, keepdims=True)

    wins = 0
    for s in range(10):
        g = np.random.default_rng(600 + s)
        target = g.normal(size=dim)

        def fn(z):
            return float(z @ target
                         / (np.linalg.norm(z) * np.linalg.norm(target)))

        _, best, curve = run_offline(fn, Sampler(), budget=25,
                                     guidance=GuidanceConfig(),
                                     rng=RngHandle(s))
        explored_best = curve[-2]
        if best > explored_best:
            wins += 1
    assert wins >= 7
