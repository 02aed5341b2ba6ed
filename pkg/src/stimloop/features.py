"""Feature readouts of simulated responses and the rewards built from them.

Two encoders are provided. The spectral one integrates Hann-window
periodogram power over classic frequency bands per channel. The semantic one
is a linear projection of the flattened response back to embedding space,
constructed as a regularized pseudo-inverse of the oracle's noiseless forward
map, so that for a noiseless linear oracle the round trip is exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.signal import periodogram

from .core import Item, RngHandle, cosine_sim
from .oracle import NeuralResponse, SyntheticBrain

__all__ = [
    "BandSpec",
    "DEFAULT_BANDS",
    "FeatureVector",
    "Target",
    "band_powers",
    "psd_encode",
    "SemanticDecoder",
    "semantic_score",
    "intensity_score",
    "reward",
    "make_reward_fn",
    "semantic_target",
    "psd_target",
]

DEFAULT_BANDS: tuple[tuple[str, float, float], ...] = (
    ("delta", 1.0, 4.0),
    ("theta", 4.0, 8.0),
    ("alpha", 8.0, 13.0),
    ("beta", 13.0, 30.0),
    ("gamma", 30.0, 80.0),
)


@dataclass(frozen=True)
class BandSpec:
    """Ordered, non-overlapping frequency bands [lo, hi) in Hz."""

    bands: tuple[tuple[str, float, float], ...] = DEFAULT_BANDS

    def __post_init__(self):
        if len(self.bands) == 0:
            raise ValueError("at least one band required")
        prev_hi = None
        for name, lo, hi in self.bands:
            if lo < 0.0 or hi <= lo:
                raise ValueError(f"invalid band {name!r}: [{lo}, {hi})")
            if prev_hi is not None and lo < prev_hi:
                raise ValueError(f"band {name!r} overlaps its predecessor")
            prev_hi = hi

    @property
    def names(self) -> list[str]:
        return [b[0] for b in self.bands]

    def __len__(self) -> int:
        return len(self.bands)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Feature values plus the encoder kind that produced them."""

    values: np.ndarray
    kind: str  # "semantic" | "psd"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise ValueError("feature vector must be finite and non-empty")
        object.__setattr__(self, "values", v)
        if self.kind not in ("semantic", "psd"):
            raise ValueError(f"unknown feature kind: {self.kind!r}")


@dataclass(frozen=True, eq=False)
class Target:
    """Search goal in feature space, optionally tied to a catalog item."""

    feature: FeatureVector
    item_id: str | None = None


def _as_response(x) -> tuple[np.ndarray, float | None]:
    if isinstance(x, NeuralResponse):
        return x.data, x.sampling_rate
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("response must be 2-D (channels x timepoints)")
    return a, None


def band_powers(x, bands: BandSpec = BandSpec(),
                sampling_rate: float | None = None) -> np.ndarray:
    """Integrated spectral power per channel and band, shape (C, B).

    Power spectral density comes from a Hann-window periodogram with the
    standard window-energy correction, so summing every bin recovers the
    window-weighted signal power exactly (Parseval); each band integrates
    the density over [lo, hi).
    """
    data, fs = _as_response(x)
    if sampling_rate is not None:
        fs = float(sampling_rate)
    if fs is None:
        raise ValueError("sampling_rate required for a bare array")
    freqs, pxx = periodogram(data, fs=fs, window="hann", detrend=False,
                             scaling="density", axis=1)
    df = freqs[1] - freqs[0]
    out = np.empty((data.shape[0], len(bands)))
    for b, (_, lo, hi) in enumerate(bands.bands):
        mask = (freqs >= lo) & (freqs < hi)
        out[:, b] = pxx[:, mask].sum(axis=1) * df
    return out


def psd_encode(x, bands: BandSpec = BandSpec(),
               sampling_rate: float | None = None) -> FeatureVector:
    """Concatenated per-channel band powers, compressed with log(1 + p)."""
    powers = band_powers(x, bands, sampling_rate)
    return FeatureVector(np.log1p(powers).ravel(), "psd")


class SemanticDecoder:
    """Linear readout from flattened response to embedding space."""

    def __init__(self, matrix: np.ndarray):
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError("decoder matrix must be 2-D")
        if not np.all(np.isfinite(m)):
            raise ValueError("decoder matrix has non-finite entries")
        self.matrix = m
        self.embed_dim = m.shape[0]

    def decode(self, x) -> FeatureVector:
        data, _ = _as_response(x)
        flat = data.ravel()
        if flat.size != self.matrix.shape[1]:
            raise ValueError("response shape does not match decoder")
        return FeatureVector(self.matrix @ flat, "semantic")

    @classmethod
    def for_oracle(cls, oracle: SyntheticBrain, ridge: float = 1e-6,
                   probes: np.ndarray | None = None) -> "SemanticDecoder":
        """Pseudo-inverse of the oracle's noiseless forward map.

        With an identity nonlinearity the forward map is one matrix, probed
        column by column and inverted in closed form; the noiseless round
        trip then reproduces the embedding. With tanh the decoder is the
        ridge least-squares fit over a probe set (caller-supplied, or unit
        Gaussian directions seeded from the oracle), which is exact only in
        the weak-activation limit.
        """
        if ridge <= 0.0:
            raise ValueError("ridge must be positive")
        cfg = oracle.config
        f = cfg.embed_dim
        if cfg.nonlinearity == "identity":
            basis = np.eye(f)
            m = np.stack([oracle.noiseless(basis[j]).data.ravel()
                          for j in range(f)], axis=1)
            gram = m.T @ m + ridge * np.eye(f)
            d = cho_solve(cho_factor(gram, lower=True), m.T)
            return cls(d)
        if probes is None:
            prng = np.random.default_rng(
                np.random.SeedSequence(entropy=cfg.seed, spawn_key=(0xDEC0,))
            )
            probes = prng.standard_normal((f + 128, f))
            probes /= np.linalg.norm(probes, axis=1, keepdims=True)
        probes = np.asarray(probes, dtype=np.float64)
        if probes.ndim != 2 or probes.shape[1] != f:
            raise ValueError("probes must be (n, embed_dim)")
        if probes.shape[0] < 2:
            raise ValueError("need at least 2 probes")
        x = np.stack([oracle.noiseless(e).data.ravel() for e in probes])
        gram = x @ x.T + ridge * np.eye(len(probes))
        # dual-form ridge: D = E^T (X X^T + ridge I)^{-1} X
        w = cho_solve(cho_factor(gram, lower=True), probes)
        return cls(w.T @ x)


def semantic_score(a: Item | np.ndarray, b: Item | np.ndarray,
                   oracle: SyntheticBrain, decoder: SemanticDecoder) -> float:
    """Cosine similarity of decoded noise-free responses of two stimuli."""
    ea = a.embedding if isinstance(a, Item) else a
    eb = b.embedding if isinstance(b, Item) else b
    fa = decoder.decode(oracle.noiseless(ea)).values
    fb = decoder.decode(oracle.noiseless(eb)).values
    return cosine_sim(fa, fb)


def intensity_score(a: Item | np.ndarray, b: Item | np.ndarray,
                    oracle: SyntheticBrain) -> float:
    """Cosine similarity of per-channel total power of noise-free responses.

    Squaring makes the score invariant to a sign flip of either response.
    """
    ea = a.embedding if isinstance(a, Item) else a
    eb = b.embedding if isinstance(b, Item) else b
    pa = np.mean(oracle.noiseless(ea).data ** 2, axis=1)
    pb = np.mean(oracle.noiseless(eb).data ** 2, axis=1)
    return cosine_sim(pa, pb)


def reward(item: Item, oracle: SyntheticBrain, target: Target,
           rng: RngHandle, decoder: SemanticDecoder | None = None,
           bands: BandSpec | None = None) -> float:
    """Cosine similarity between the item's encoded response and the target.

    The encoder is chosen by the target's feature kind; mismatched helper
    arguments (no decoder for a semantic target, say) raise immediately.
    """
    resp = oracle.respond(item, rng)
    if target.feature.kind == "semantic":
        if decoder is None:
            raise ValueError("semantic target requires a decoder")
        feat = decoder.decode(resp).values
    elif target.feature.kind == "psd":
        feat = psd_encode(resp, bands or BandSpec()).values
    else:
        raise ValueError(f"unsupported target kind: {target.feature.kind!r}")
    return cosine_sim(feat, target.feature.values)


def make_reward_fn(oracle: SyntheticBrain, target: Target, rng: RngHandle,
                   decoder: SemanticDecoder | None = None,
                   bands: BandSpec | None = None) -> Callable[[Item], float]:
    """Bind oracle, target, and noise stream into an item -> reward callable."""
    def fn(item: Item) -> float:
        return reward(item, oracle, target, rng, decoder=decoder, bands=bands)
    return fn


def semantic_target(oracle: SyntheticBrain, decoder: SemanticDecoder,
                    item: Item) -> Target:
    """Target = decoded noise-free response of a reference item."""
    feat = decoder.decode(oracle.noiseless(item.embedding))
    return Target(feature=feat, item_id=item.id)


def psd_target(oracle: SyntheticBrain, item: Item,
               bands: BandSpec = BandSpec()) -> Target:
    """Target = band-power signature of a reference item's clean response."""
    feat = psd_encode(oracle.noiseless(item.embedding), bands)
    return Target(feature=feat, item_id=item.id)
