"""Evolutionary stimulus generation steered by the surrogate.

Each round draws parents by roulette over the global sampling distribution,
breeds offspring by single-point embedding crossover plus one shared
multiplicative mutation, nudges each child along the surrogate gradient, and
materializes it through a generator. Offspring are scored, the catalog grows
by offspring plus fresh never-used corpus items, and the same three-stage
score update as the interactive loop runs over the extended catalog.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .core import Catalog, Item, RngHandle, roulette_sample, softmax
from .search import IterationRecord, direct_reward_update, spreading_update
from .surrogate import (
    GPModel,
    GuidanceConfig,
    eta_schedule,
    gp_append,
    gp_fit,
    pseudo_target,
    scale_reward,
)

__all__ = [
    "EvolveConfig",
    "EvolveState",
    "Generator",
    "IdentityGenerator",
    "NearestNeighborGenerator",
    "crossover",
    "mutate",
    "novelty_inject",
    "init_evolve",
    "evolve_step",
    "run_evolve",
    "run_offline",
]

RewardFn = Callable[[Item], float]


@dataclass(frozen=True)
class EvolveConfig:
    """Loop shape: parents per round, offspring bred, novelty injected.

    mutation_scale bounds the single shared multiplicative jitter, and must
    stay below 1 or a mutation could annihilate the embedding.
    """

    n_parents: int = 4
    n_offspring: int = 2
    n_novelty: int = 2
    seed_size: int = 10
    mutation_scale: float = 0.1
    alpha: float = 0.1
    beta: float = 0.1
    top_k: int = 2
    temperature: float = 1.0
    normalize_rewards: bool = False
    max_iterations: int = 10

    def validate(self) -> None:
        if self.n_parents < 2:
            raise ValueError("need at least 2 parents for crossover")
        if self.n_offspring < 1:
            raise ValueError("n_offspring must be at least 1")
        if self.n_novelty < 0:
            raise ValueError("n_novelty must be non-negative")
        if self.seed_size < 2:
            raise ValueError("seed_size must be at least 2")
        if not (0.0 <= self.mutation_scale < 1.0):
            raise ValueError("mutation_scale must lie in [0, 1)")
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise ValueError("alpha and beta must lie in [0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


class Generator(Protocol):
    def generate(self, embedding: np.ndarray, rng: RngHandle) -> Item: ...


class IdentityGenerator:
    """Materializes a proposal as-is; the embedding is the stimulus."""

    def __init__(self, prefix: str = "gen"):
        self.prefix = prefix
        self._count = 0

    def generate(self, embedding: np.ndarray, rng: RngHandle) -> Item:
        self._count += 1
        return Item(id=f"{self.prefix}-{self._count}", embedding=embedding)


class NearestNeighborGenerator:
    """Snaps a proposal to the most cosine-similar corpus item."""

    def __init__(self, corpus: Catalog, prefix: str = "nn"):
        self.corpus = corpus
        self.prefix = prefix
        self._count = 0

    def generate(self, embedding: np.ndarray, rng: RngHandle) -> Item:
        e = np.asarray(embedding, dtype=np.float64).ravel()
        norm = float(np.linalg.norm(e))
        if norm == 0.0:
            raise ValueError("degenerate vector: zero-norm proposal")
        norms = np.linalg.norm(self.corpus.matrix, axis=1)
        sims = (self.corpus.matrix @ e) / (norms * norm)
        src = self.corpus[int(np.argmax(sims))]
        self._count += 1
        return Item(id=f"{self.prefix}-{self._count}",
                    embedding=src.embedding, payload=src.payload or src.id)


def crossover(a: np.ndarray, b: np.ndarray, rng: RngHandle) -> np.ndarray:
    """Single-point splice: a's coordinates up to a uniform cut, b's after.

    The cut index is drawn from 0..dim inclusive, so either parent can pass
    through whole; both segments are copied verbatim.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    cut = int(rng.gen.integers(0, a.size + 1))
    return np.concatenate([a[:cut], b[cut:]])


def mutate(embedding: np.ndarray, scale: float, rng: RngHandle) -> np.ndarray:
    """Multiplicative jitter with one shared draw: e * (1 + delta).

    delta ~ Uniform(-scale, scale) applied to every coordinate at once, so
    the direction of the embedding is preserved exactly.
    """
    if not (0.0 <= scale < 1.0):
        raise ValueError("mutation scale must lie in [0, 1)")
    e = np.asarray(embedding, dtype=np.float64).ravel()
    delta = float(rng.gen.uniform(-scale, scale))
    return e * (1.0 + delta)


def novelty_inject(corpus: Catalog, used_ids: set[str], count: int,
                   rng: RngHandle) -> list[Item]:
    """Uniform draw of never-used corpus items; shrinks when few remain."""
    if count < 0:
        raise ValueError("count must be non-negative")
    fresh = [it for it in corpus if it.id not in used_ids]
    if count == 0 or not fresh:
        return []
    take = min(count, len(fresh))
    idx = rng.gen.choice(len(fresh), size=take, replace=False)
    return [fresh[int(i)] for i in np.sort(idx)]


@dataclass
class EvolveState:
    """Growing catalog plus the same score/probability bookkeeping as search."""

    catalog: Catalog
    config: EvolveConfig
    guidance: GuidanceConfig | None
    rng: RngHandle
    scores: np.ndarray
    probs: np.ndarray
    gp: GPModel | None = None
    t: int = 0
    history: list[tuple[int, str, float]] = field(default_factory=list)
    best_id: str | None = None
    best_reward: float = -np.inf
    used_corpus_ids: set[str] = field(default_factory=set)
    events: list[str] = field(default_factory=list)
    queries: int = 0


def _record(state: EvolveState, item_id: str, reward: float) -> None:
    state.history.append((state.t, item_id, float(reward)))
    if reward > state.best_reward:
        state.best_reward = float(reward)
        state.best_id = item_id


def init_evolve(corpus: Catalog, config: EvolveConfig,
                guidance: GuidanceConfig | None, reward_fn: RewardFn,
                rng: RngHandle, seed_size: int | None = None) -> EvolveState:
    """Seed the loop with random corpus items, score them, fit the surrogate."""
    config.validate()
    size = config.seed_size if seed_size is None else int(seed_size)
    size = min(size, len(corpus))
    if size < 2:
        raise ValueError("need at least 2 seed items")
    idx = np.sort(rng.gen.choice(len(corpus), size=size, replace=False))
    seed_items = [corpus[int(i)] for i in idx]
    catalog = Catalog(seed_items, normalized=corpus.normalized)
    n = len(catalog)
    state = EvolveState(
        catalog=catalog, config=config, guidance=guidance, rng=rng,
        scores=np.full(n, 1.0 / n), probs=np.full(n, 1.0 / n),
    )
    state.used_corpus_ids.update(it.id for it in seed_items)
    rewards = []
    for it in seed_items:
        r = float(reward_fn(it))
        rewards.append(r)
        _record(state, it.id, r)
    state.queries = len(seed_items)
    gamma = guidance.gamma if guidance is not None else 10.0
    z = np.stack([it.embedding for it in seed_items])
    y = np.array([scale_reward(r, gamma) for r in rewards])
    state.gp = gp_fit(z, y)
    return state


def _pick_parent_pair(parents: list[int], scores: np.ndarray,
                      rng: RngHandle) -> tuple[int, int]:
    # roulette over the parents' scores; negative mass clipped away
    w = np.clip(scores[parents], 0.0, None)
    if w.sum() <= 0.0:
        w = np.ones(len(parents))
    p = w / w.sum()
    a_pos, b_pos = roulette_sample(p, 2, rng)
    return parents[a_pos], parents[b_pos]


def evolve_step(state: EvolveState, reward_fn: RewardFn, generator: Generator,
                corpus: Catalog, n_offspring: int | None = None) -> list[int]:
    """One generation; returns catalog indices of the scored offspring."""
    cfg = state.config
    count = cfg.n_offspring if n_offspring is None else int(n_offspring)
    parents = roulette_sample(state.probs, min(cfg.n_parents, len(state.catalog)),
                              state.rng)
    parent_ids = [state.catalog[i].id for i in parents]

    offspring: list[Item] = []
    for _ in range(count):
        ia, ib = _pick_parent_pair(parents, state.scores, state.rng)
        child = crossover(state.catalog[ia].embedding,
                          state.catalog[ib].embedding, state.rng)
        child = mutate(child, cfg.mutation_scale, state.rng)
        if state.guidance is not None and state.gp is not None \
                and state.guidance.eta0 > 0.0:
            eta = eta_schedule(state.guidance, state.t, cfg.max_iterations)
            child = pseudo_target(state.gp, child, eta, state.guidance.mode)
        try:
            offspring.append(generator.generate(child, state.rng))
        except Exception as exc:  # a failed proposal skips, loop continues
            state.events.append(f"iteration {state.t}: generator failed: {exc}")

    rewards = np.array([float(reward_fn(it)) for it in offspring])
    state.queries += len(offspring)

    novelty = novelty_inject(corpus, state.used_corpus_ids, cfg.n_novelty,
                             state.rng)
    state.used_corpus_ids.update(it.id for it in novelty)

    base = len(state.catalog)
    new_items = offspring + novelty
    if new_items:
        state.catalog.append(new_items)
        n_now = len(state.catalog)
        state.scores = np.append(state.scores,
                                 np.full(len(new_items), 1.0 / n_now))
    offspring_idx = list(range(base, base + len(offspring)))

    state.t += 1
    if offspring_idx:
        used = rewards
        if cfg.normalize_rewards:
            std = float(rewards.std())
            used = ((rewards - rewards.mean()) / std if std > 0.0
                    else np.zeros_like(rewards))
        k = min(cfg.top_k, len(offspring_idx))
        order = sorted(range(len(offspring_idx)),
                       key=lambda p: (-used[p], offspring_idx[p]))
        top_pos = order[:k]
        top_idx = [offspring_idx[p] for p in top_pos]
        s1 = direct_reward_update(state.scores, offspring_idx, used,
                                  top_pos, cfg.alpha)
        state.scores = spreading_update(s1, state.catalog, top_idx, cfg.beta)
    state.probs = softmax(state.scores, cfg.temperature)

    gamma = state.guidance.gamma if state.guidance is not None else 10.0
    for pos, it in enumerate(offspring):
        _record(state, it.id, float(rewards[pos]))
        if state.gp is not None:
            state.gp = gp_append(state.gp, it.embedding,
                                 scale_reward(float(rewards[pos]), gamma))

    state.events.append(
        f"iteration {state.t}: parents={parent_ids} offspring={len(offspring)} "
        f"novelty={len(novelty)} catalog={len(state.catalog)}"
    )
    return offspring_idx


def run_evolve(corpus: Catalog, config: EvolveConfig,
               guidance: GuidanceConfig | None, reward_fn: RewardFn,
               generator: Generator, rng: RngHandle,
               budget: int | None = None
               ) -> tuple[EvolveState, list[IterationRecord]]:
    """Drive generations until the iteration cap or query budget is spent."""
    config.validate()
    seed_size = config.seed_size
    if budget is not None:
        if budget < 2:
            raise ValueError("budget must allow at least 2 queries")
        seed_size = min(seed_size, budget)
    state = init_evolve(corpus, config, guidance, reward_fn, rng,
                        seed_size=seed_size)
    trace: list[IterationRecord] = []
    while True:
        if budget is None:
            if state.t >= config.max_iterations:
                break
            count = config.n_offspring
        else:
            remaining = budget - state.queries
            if remaining <= 0:
                break
            count = min(config.n_offspring, remaining)
        idx = evolve_step(state, reward_fn, generator, corpus,
                          n_offspring=count)
        trace.append(IterationRecord(
            iteration=state.t,
            item_ids=[state.catalog[i].id for i in idx],
            rewards=[float(r) for _, iid, r in state.history[-len(idx):]]
            if idx else [],
            scores=[float(x) for x in state.scores],
            probs=[float(x) for x in state.probs],
            best_id=str(state.best_id),
            best_reward=float(state.best_reward),
        ))
        if budget is None and state.t >= config.max_iterations:
            break
    return state, trace


def run_offline(reward_fn: Callable[[np.ndarray], float],
                sampler, budget: int, guidance: GuidanceConfig,
                rng: RngHandle, ascent_steps: int = 50
                ) -> tuple[np.ndarray, float, list[float]]:
    """One-shot variant: sample, fit once, walk the surrogate, verify.

    All but one query goes to uniform exploration; the surrogate is fitted
    once on those observations and climbed with the decaying step schedule
    from the best observed point. The final query is spent on the climbed
    candidate, so the method uses exactly `budget` reward calls.
    Returns (best embedding, best reward, best-so-far curve).
    """
    if budget < 2:
        raise ValueError("budget must allow at least 2 queries")
    n_explore = budget - 1
    zs = sampler.batch(rng, n_explore)
    rewards = [float(reward_fn(z)) for z in zs]
    curve: list[float] = []
    best = -np.inf
    for r in rewards:
        best = max(best, r)
        curve.append(best)
    y = np.array([scale_reward(r, guidance.gamma) for r in rewards])
    model = gp_fit(zs, y)
    z_cur = zs[int(np.argmax(rewards))].copy()
    for step in range(ascent_steps):
        eta = eta_schedule(guidance, step, ascent_steps)
        z_cur = pseudo_target(model, z_cur, eta, guidance.mode)
    r_final = float(reward_fn(z_cur))
    best = max(best, r_final)
    curve.append(best)
    if r_final >= max(rewards):
        return z_cur, best, curve
    return zs[int(np.argmax(rewards))], best, curve
