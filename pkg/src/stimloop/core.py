"""Shared domain types and math primitives for closed-loop stimulus search."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RngHandle",
    "Item",
    "Catalog",
    "as_embedding",
    "cosine_sim",
    "softmax",
    "boost_probabilities",
    "roulette_sample",
    "roulette_sample_logits",
    "check_scores",
    "check_probs",
]

_UINT64_MASK = (1 << 64) - 1


class RngHandle:
    """Named random stream: identical (seed, stream) replays the same draws.

    All stochastic code takes one of these instead of touching global state.
    `child(stream)` derives an independent stream from the same seed so that
    e.g. a search session and a synthetic rater never share draws.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _UINT64_MASK
        self.stream = int(stream)
        self._gen = np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        )

    @property
    def gen(self) -> np.random.Generator:
        return self._gen

    def child(self, stream: int) -> "RngHandle":
        return RngHandle(self.seed, stream)

    def __repr__(self) -> str:
        return f"RngHandle(seed={self.seed}, stream={self.stream})"


def as_embedding(values, normalize: bool = False) -> np.ndarray:
    """Validate a 1-D float vector; optionally L2-normalize it."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"embedding must be 1-D, got shape {v.shape}")
    if v.size == 0:
        raise ValueError("embedding must be non-empty")
    if not np.all(np.isfinite(v)):
        raise ValueError("embedding has non-finite entries")
    if normalize:
        n = float(np.linalg.norm(v))
        if n == 0.0:
            raise ValueError("degenerate vector: zero norm cannot be normalized")
        v = v / n
    return v


@dataclass(frozen=True, eq=False)
class Item:
    """One catalog entry: stable id, embedding, optional payload reference."""

    id: str
    embedding: np.ndarray
    payload: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "embedding", as_embedding(self.embedding))


class Catalog:
    """Ordered item collection with cached embedding geometry.

    Grows only by `append` (ids stay unique, dimension fixed). Cosine rows
    are cached per anchor index when `cache_rows` is set; the cache is
    dropped on growth since row length changes with the catalog.
    """

    def __init__(self, items: list[Item], normalized: bool = False,
                 cache_rows: bool = True):
        if len(items) < 2:
            raise ValueError("catalog needs at least 2 items")
        self._items: list[Item] = list(items)
        self.normalized = bool(normalized)
        self.cache_rows = bool(cache_rows)
        self._index: dict[str, int] = {}
        for i, it in enumerate(self._items):
            if it.id in self._index:
                raise ValueError(f"duplicate item id: {it.id!r}")
            self._index[it.id] = i
        dim = self._items[0].embedding.size
        for it in self._items:
            if it.embedding.size != dim:
                raise ValueError("all embeddings must share one dimension")
        self.dim = dim
        self._matrix = np.stack([it.embedding for it in self._items])
        self._norms = np.linalg.norm(self._matrix, axis=1)
        if np.any(self._norms == 0.0):
            raise ValueError("degenerate vector: zero-norm embedding in catalog")
        self._row_cache: dict[int, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int) -> Item:
        return self._items[i]

    def __iter__(self):
        return iter(self._items)

    @property
    def items(self) -> list[Item]:
        return self._items

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def ids(self) -> list[str]:
        return [it.id for it in self._items]

    def index_of(self, item_id: str) -> int:
        try:
            return self._index[item_id]
        except KeyError:
            raise KeyError(f"unknown item id: {item_id!r}") from None

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._index

    def sim_row(self, i: int) -> np.ndarray:
        """Cosine similarity of item i against every catalog item."""
        if self.cache_rows and i in self._row_cache:
            return self._row_cache[i]
        v = self._matrix[i]
        row = (self._matrix @ v) / (self._norms * self._norms[i])
        np.clip(row, -1.0, 1.0, out=row)
        if self.cache_rows:
            self._row_cache[i] = row
        return row

    def append(self, items: list[Item]) -> None:
        for it in items:
            if it.id in self._index:
                raise ValueError(f"duplicate item id: {it.id!r}")
            if it.embedding.size != self.dim:
                raise ValueError("all embeddings must share one dimension")
            norm = float(np.linalg.norm(it.embedding))
            if norm == 0.0:
                raise ValueError("degenerate vector: zero-norm embedding")
            self._index[it.id] = len(self._items)
            self._items.append(it)
        self._matrix = np.vstack([self._matrix] + [it.embedding[None, :] for it in items])
        self._norms = np.linalg.norm(self._matrix, axis=1)
        self._row_cache.clear()


def cosine_sim(a, b) -> float:
    """Cosine similarity of two equal-length vectors, clipped to [-1, 1]."""
    va = np.asarray(a, dtype=np.float64).ravel()
    vb = np.asarray(b, dtype=np.float64).ravel()
    if va.size != vb.size:
        raise ValueError(f"length mismatch: {va.size} vs {vb.size}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ValueError("degenerate vector: zero norm in cosine similarity")
    return float(np.clip(np.dot(va, vb) / (na * nb), -1.0, 1.0))


def check_scores(scores: np.ndarray) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("scores must be a non-empty 1-D array")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores contain non-finite entries")
    return s


def check_probs(probs: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probabilities must be a non-empty 1-D array")
    if not np.all(np.isfinite(p)):
        raise ValueError("probabilities contain non-finite entries")
    if np.any(p < 0.0):
        raise ValueError("probabilities must be non-negative")
    if abs(float(p.sum()) - 1.0) > tol:
        raise ValueError(f"probabilities sum to {p.sum():.12f}, expected 1")
    return p


def softmax(scores, temperature: float = 1.0) -> np.ndarray:
    """Temperature softmax with max-subtraction so large scores cannot overflow.

    temperature=1 is the plain exponential-normalization rule; smaller values
    sharpen selection without changing the argmax.
    """
    s = check_scores(scores)
    if temperature <= 0.0:
        raise ValueError("temperature must be positive")
    z = (s - s.max()) / temperature
    e = np.exp(z)
    return e / e.sum()


def boost_probabilities(probs, indices, factor: float) -> np.ndarray:
    """Multiplicative alternative to the softmax refresh: scale the chosen
    entries by a constant factor and renormalize. Kept as a documented
    variant; the default pipeline always rebuilds probabilities via softmax.
    """
    p = check_probs(probs).copy()
    if factor <= 0.0:
        raise ValueError("boost factor must be positive")
    p[list(indices)] *= factor
    return p / p.sum()


def roulette_sample_logits(logits, n: int, rng: RngHandle) -> list[int]:
    """Sequential roulette over softmax(logits), carried out in log space.

    Each pick is one categorical draw from the softmax of the still-available
    logits, realized as an argmax over logits plus fresh standard Gumbel
    noise; the winner is then removed. That is the same draw-remove-
    renormalize chain as `roulette_sample` over softmax probabilities, but
    it keeps items alive whose relative probability is far below what
    float64 exponentiation can represent (sharp temperatures need this).
    """
    l = np.asarray(logits, dtype=np.float64)
    if l.ndim != 1 or l.size == 0:
        raise ValueError("logits must be a non-empty 1-D array")
    if not np.all(np.isfinite(l)):
        raise ValueError("logits contain non-finite entries")
    if n < 0:
        raise ValueError("sample size must be non-negative")
    if n > l.size:
        raise ValueError(f"cannot draw {n} distinct indices from {l.size} items")
    available = np.ones(l.size, dtype=bool)
    picks: list[int] = []
    for _ in range(n):
        z = l + rng.gen.gumbel(0.0, 1.0, l.size)
        z[~available] = -np.inf
        idx = int(np.argmax(z))
        picks.append(idx)
        available[idx] = False
    return picks


def roulette_sample(probs, n: int, rng: RngHandle) -> list[int]:
    """Fitness-proportionate sampling of n distinct indices.

    Sequential draws: after each pick the winner's mass is removed and the
    remainder renormalized, so no index repeats within one batch.
    """
    p = check_probs(probs)
    if n < 0:
        raise ValueError("sample size must be non-negative")
    support = int(np.count_nonzero(p > 0.0))
    if n > support:
        raise ValueError(f"cannot draw {n} distinct indices from support of {support}")
    remaining = p.copy()
    picks: list[int] = []
    for _ in range(n):
        total = float(remaining.sum())
        u = rng.gen.random() * total
        cum = np.cumsum(remaining)
        idx = int(np.searchsorted(cum, u, side="right"))
        if idx >= remaining.size:
            idx = remaining.size - 1
        while remaining[idx] == 0.0:
            # floating-point boundary landed on an emptied slot; step forward
            idx += 1
            if idx >= remaining.size:
                idx = int(np.argmax(remaining > 0.0))
                break
        picks.append(idx)
        remaining[idx] = 0.0
    return picks
