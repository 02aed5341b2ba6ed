"""Interactive catalog search: sample, score with rewards, update, resample.

One step draws a batch by roulette over the current probabilities, collects a
reward per shown item, then runs the three-stage update: exponential moving
average on the batch's top scorers, similarity-weighted spreading across the
whole catalog, and a softmax refresh of the sampling distribution.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from .core import (
    Catalog,
    Item,
    RngHandle,
    check_probs,
    check_scores,
    roulette_sample_logits,
    softmax,
)

__all__ = [
    "SearchConfig",
    "SessionState",
    "IterationRecord",
    "init_session",
    "sample_batch",
    "direct_reward_update",
    "spreading_update",
    "apply_rewards",
    "search_step",
    "run_search",
]

RewardFn = Callable[[Item], float]


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the interactive loop.

    alpha      EMA weight pulling a top item's score toward its reward.
    beta       share of score mass redistributed by similarity spreading.
    top_k      batch items whose rewards feed the EMA update.
    temperature  softmax sharpness; 1.0 is the plain exponential rule.
    normalize_rewards  z-score rewards within each batch before updating
                       (bookkeeping still records the raw values).
    stop_threshold  optional early stop once a raw batch reward reaches it.
    """

    batch_size: int = 10
    max_iterations: int = 10
    alpha: float = 0.1
    beta: float = 0.1
    top_k: int = 2
    temperature: float = 1.0
    normalize_rewards: bool = False
    stop_threshold: float | None = None

    def validate(self, n_items: int | None = None) -> None:
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError("beta must lie in [0, 1]")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")
        if self.top_k > self.batch_size:
            raise ValueError("top_k cannot exceed batch_size")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if n_items is not None and self.batch_size > n_items:
            raise ValueError("batch_size cannot exceed catalog size")


@dataclass
class SessionState:
    """Mutable loop state; scores and probs always cover the whole catalog."""

    catalog: Catalog
    config: SearchConfig
    rng: RngHandle
    scores: np.ndarray
    probs: np.ndarray
    t: int = 0
    history: list[tuple[int, str, float]] = field(default_factory=list)
    best_id: str | None = None
    best_reward: float = -np.inf
    done: bool = False

    def clone(self) -> "SessionState":
        dup = SessionState(
            catalog=self.catalog,
            config=self.config,
            rng=self.rng,
            scores=self.scores.copy(),
            probs=self.probs.copy(),
            t=self.t,
            history=list(self.history),
            best_id=self.best_id,
            best_reward=self.best_reward,
            done=self.done,
        )
        return dup


def init_session(catalog: Catalog, config: SearchConfig, rng: RngHandle) -> SessionState:
    """Uniform prior: every item starts with score and probability 1/N."""
    config.validate(len(catalog))
    n = len(catalog)
    scores = np.full(n, 1.0 / n)
    probs = np.full(n, 1.0 / n)
    return SessionState(catalog=catalog, config=config, rng=rng,
                        scores=scores, probs=probs)


def sample_batch(state: SessionState) -> list[int]:
    """Roulette-draw the next batch of distinct catalog indices.

    Draws from the same distribution as sequential roulette over
    state.probs, but works from scores/temperature directly so that sharp
    temperatures cannot empty the support through float64 underflow.
    """
    if state.done:
        raise RuntimeError("session already finished")
    logits = state.scores / state.config.temperature
    return roulette_sample_logits(logits, state.config.batch_size, state.rng)


def direct_reward_update(scores, batch_idx, rewards, top_idx, alpha: float) -> np.ndarray:
    """EMA pull toward reward for the top batch items; everyone else is kept.

    `top_idx` selects positions within `batch_idx`.
    """
    s = check_scores(scores).copy()
    batch_idx = list(batch_idx)
    r = np.asarray(rewards, dtype=np.float64)
    if r.size != len(batch_idx):
        raise ValueError("one reward per batch item required")
    for pos in top_idx:
        j = batch_idx[pos]
        s[j] = (1.0 - alpha) * s[j] + alpha * float(r[pos])
    return s


def spreading_update(scores, catalog: Catalog, best_idx, beta: float) -> np.ndarray:
    """Redistribute a beta share of mass from the best items to their kin.

    Every catalog item j receives, from each best item i, a slice of i's score
    weighted by exp(cos(e_i, e_j)) normalized over the whole catalog; the
    slices are averaged over the best set.
    """
    s = check_scores(scores)
    best_idx = list(best_idx)
    if len(best_idx) == 0:
        raise ValueError("spreading needs at least one source index")
    if len(s) != len(catalog):
        raise ValueError("score vector does not match catalog size")
    rows = np.stack([catalog.sim_row(i) for i in best_idx])
    w = np.exp(rows)
    w /= w.sum(axis=1, keepdims=True)
    spread = s[best_idx] @ w
    return (1.0 - beta) * s + (beta / len(best_idx)) * spread


def _top_k_positions(rewards: np.ndarray, batch_idx: list[int], k: int) -> list[int]:
    # ties resolved toward the lower catalog index
    order = sorted(range(len(batch_idx)), key=lambda p: (-rewards[p], batch_idx[p]))
    return order[:k]


def apply_rewards(state: SessionState, batch_idx: list[int],
                  rewards: list[float]) -> SessionState:
    """Run the full update for one observed batch and advance the clock."""
    cfg = state.config
    raw = np.asarray(rewards, dtype=np.float64)
    if raw.size != len(batch_idx):
        raise ValueError("one reward per batch item required")
    if not np.all(np.isfinite(raw)):
        raise ValueError("rewards contain non-finite entries")

    used = raw
    if cfg.normalize_rewards:
        std = float(raw.std())
        used = (raw - raw.mean()) / std if std > 0.0 else np.zeros_like(raw)

    k = min(cfg.top_k, len(batch_idx))
    top_pos = _top_k_positions(used, batch_idx, k)
    top_catalog_idx = [batch_idx[p] for p in top_pos]

    s1 = direct_reward_update(state.scores, batch_idx, used, top_pos, cfg.alpha)
    s2 = spreading_update(s1, state.catalog, top_catalog_idx, cfg.beta)
    state.scores = s2
    state.probs = softmax(s2, cfg.temperature)
    state.t += 1

    for pos, j in enumerate(batch_idx):
        item_id = state.catalog[j].id
        r = float(raw[pos])
        state.history.append((state.t, item_id, r))
        if r > state.best_reward:
            state.best_reward = r
            state.best_id = item_id

    if cfg.stop_threshold is not None and float(raw.max()) >= cfg.stop_threshold:
        state.done = True
    if state.t >= cfg.max_iterations:
        state.done = True
    return state


def search_step(state: SessionState, reward_fn: RewardFn) -> tuple[SessionState, list[int], list[float]]:
    """Sample a batch, collect rewards in draw order, update."""
    batch_idx = sample_batch(state)
    rewards = [float(reward_fn(state.catalog[j])) for j in batch_idx]
    return apply_rewards(state, batch_idx, rewards), batch_idx, rewards


@dataclass
class IterationRecord:
    iteration: int
    item_ids: list[str]
    rewards: list[float]
    scores: list[float]
    probs: list[float]
    best_id: str
    best_reward: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def run_search(catalog: Catalog, config: SearchConfig, reward_fn: RewardFn,
               rng: RngHandle) -> tuple[SessionState, list[IterationRecord]]:
    """Drive the loop to completion; returns final state plus per-step trace."""
    state = init_session(catalog, config, rng)
    trace: list[IterationRecord] = []
    while not state.done:
        state, batch_idx, rewards = search_step(state, reward_fn)
        trace.append(IterationRecord(
            iteration=state.t,
            item_ids=[catalog[j].id for j in batch_idx],
            rewards=[float(r) for r in rewards],
            scores=[float(x) for x in state.scores],
            probs=[float(x) for x in state.probs],
            best_id=str(state.best_id),
            best_reward=float(state.best_reward),
        ))
    return state, trace
