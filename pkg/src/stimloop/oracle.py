"""Synthetic neural oracle: hidden embedding-to-signal map plus noise.

The oracle stands in for a brain during desk runs. Optimizers must treat it
as a black box: they get an item-to-response callable and nothing else. The
response model is a two-stage readout of the item embedding (linear, pointwise
nonlinearity, linear), reshaped to channels x timepoints, causally smoothed
along time, with i.i.d. Gaussian noise on top.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.signal import lfilter

from .core import Item, RngHandle, cosine_sim

__all__ = [
    "OracleConfig",
    "NeuralResponse",
    "SyntheticBrain",
    "make_oracle",
    "RaterConfig",
    "synthetic_rate",
    "cross_modal_correlation",
    "calibrate_noise_std",
]


@dataclass(frozen=True)
class OracleConfig:
    """Shape and statistics of the simulated recording.

    Defaults mirror a compact EEG-like setup: 17 channels, 250 samples at
    250 Hz (one second), driven by embeddings of dimension `embed_dim`.
    `smooth_width` is the time constant, in samples, of the causal
    exponential smoothing; 0 disables it. `nonlinearity` is "tanh" or
    "identity" (the identity map keeps the whole forward chain linear).
    """

    embed_dim: int = 1024
    hidden_dim: int = 128
    channels: int = 17
    timepoints: int = 250
    sampling_rate: float = 250.0
    nonlinearity: str = "tanh"
    noise_std: float = 0.0
    smooth_width: float = 3.0
    seed: int = 0

    def validate(self) -> None:
        if self.embed_dim < 1 or self.hidden_dim < 1:
            raise ValueError("embed_dim and hidden_dim must be at least 1")
        if self.channels < 1 or self.timepoints < 2:
            raise ValueError("need at least 1 channel and 2 timepoints")
        if self.sampling_rate <= 0.0:
            raise ValueError("sampling_rate must be positive")
        if self.nonlinearity not in ("tanh", "identity"):
            raise ValueError(f"unknown nonlinearity: {self.nonlinearity!r}")
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be non-negative")
        if self.smooth_width < 0.0:
            raise ValueError("smooth_width must be non-negative")


@dataclass(frozen=True, eq=False)
class NeuralResponse:
    """One simulated recording: channels x timepoints at a fixed rate."""

    data: np.ndarray
    sampling_rate: float

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError("response must be 2-D (channels x timepoints)")
        if not np.all(np.isfinite(d)):
            raise ValueError("response has non-finite entries")
        object.__setattr__(self, "data", d)


class SyntheticBrain:
    """Black-box stimulus-to-response map with seed-fixed hidden weights."""

    def __init__(self, config: OracleConfig):
        config.validate()
        self.config = config
        f, h = config.embed_dim, config.hidden_dim
        out = config.channels * config.timepoints
        wrng = np.random.default_rng(
            np.random.SeedSequence(entropy=config.seed, spawn_key=(0xB7A1,))
        )
        # 1/sqrt(fan-in) scaling keeps activations O(1) for unit inputs
        self._w1 = wrng.normal(0.0, 1.0 / math.sqrt(f), size=(f, h))
        self._w2 = wrng.normal(0.0, 1.0 / math.sqrt(h), size=(h, out))
        if config.smooth_width > 0.0:
            self._smooth_a = math.exp(-1.0 / config.smooth_width)
        else:
            self._smooth_a = 0.0

    def _forward(self, embedding: np.ndarray) -> np.ndarray:
        e = np.asarray(embedding, dtype=np.float64).ravel()
        if e.size != self.config.embed_dim:
            raise ValueError(
                f"embedding dimension {e.size} does not match oracle "
                f"embed_dim {self.config.embed_dim}"
            )
        if not np.all(np.isfinite(e)):
            raise ValueError("embedding has non-finite entries")
        pre = e @ self._w1
        hid = np.tanh(pre) if self.config.nonlinearity == "tanh" else pre
        x = (hid @ self._w2).reshape(self.config.channels, self.config.timepoints)
        a = self._smooth_a
        if a > 0.0:
            # y[t] = (1-a) x[t] + a y[t-1], causal, zero initial state
            x = lfilter([1.0 - a], [1.0, -a], x, axis=1)
        return x

    def noiseless(self, embedding: np.ndarray) -> NeuralResponse:
        """Clean response; deterministic for a given embedding."""
        return NeuralResponse(self._forward(embedding), self.config.sampling_rate)

    def respond(self, item: Item | np.ndarray, rng: RngHandle,
                noise_std: float | None = None) -> NeuralResponse:
        """Response with Gaussian noise drawn from the caller's stream."""
        emb = item.embedding if isinstance(item, Item) else item
        x = self._forward(emb)
        std = self.config.noise_std if noise_std is None else float(noise_std)
        if std < 0.0:
            raise ValueError("noise_std must be non-negative")
        if std > 0.0:
            x = x + std * rng.gen.standard_normal(x.shape)
        return NeuralResponse(x, self.config.sampling_rate)

    def with_noise(self, noise_std: float) -> "SyntheticBrain":
        """Same hidden weights, different default noise level."""
        cfg = OracleConfig(**{**self.config.__dict__, "noise_std": float(noise_std)})
        clone = SyntheticBrain.__new__(SyntheticBrain)
        clone.config = cfg
        clone._w1 = self._w1
        clone._w2 = self._w2
        clone._smooth_a = self._smooth_a
        return clone


def make_oracle(config: OracleConfig) -> SyntheticBrain:
    return SyntheticBrain(config)


@dataclass(frozen=True, eq=False)
class RaterConfig:
    """Synthetic stand-in for a human rating stimuli against a hidden goal.

    The rating is a monotone map of cosine similarity between the item
    embedding and the hidden target, plus optional Gaussian jitter, clipped
    to [0, 1] and snapped to the scale's granularity (0.01 by default).
    """

    target: np.ndarray
    noise_std: float = 0.0
    granularity: float = 0.01

    def __post_init__(self):
        t = np.asarray(self.target, dtype=np.float64).ravel()
        if t.size == 0 or not np.all(np.isfinite(t)):
            raise ValueError("rater target must be a finite non-empty vector")
        if float(np.linalg.norm(t)) == 0.0:
            raise ValueError("degenerate vector: rater target has zero norm")
        object.__setattr__(self, "target", t)
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be non-negative")
        if not (0.0 < self.granularity <= 1.0):
            raise ValueError("granularity must lie in (0, 1]")


def synthetic_rate(item: Item | np.ndarray, config: RaterConfig,
                   rng: RngHandle) -> float:
    """One rating in [0, 1]: affine-mapped cosine, jitter, clip, snap."""
    emb = item.embedding if isinstance(item, Item) else np.asarray(item, float)
    c = cosine_sim(emb, config.target)
    value = 0.5 * (1.0 + c)
    if config.noise_std > 0.0:
        value += config.noise_std * rng.gen.standard_normal()
    value = min(1.0, max(0.0, value))
    steps = round(value / config.granularity)
    return float(min(1.0, max(0.0, steps * config.granularity)))


def _pairwise_cosines(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("degenerate vector: zero norm in correlation probe")
    unit = rows / norms
    g = unit @ unit.T
    iu = np.triu_indices(len(rows), k=1)
    return g[iu]


def cross_modal_correlation(oracle: SyntheticBrain,
                            encode: Callable[[NeuralResponse], np.ndarray],
                            probes: np.ndarray,
                            rng: RngHandle,
                            noise_std: float | None = None) -> float:
    """Pearson correlation between embedding-space and feature-space geometry.

    For a probe set of embeddings, compares the pairwise cosine structure of
    the embeddings with the pairwise cosine structure of encoded noisy
    responses. Noiseless responses through a faithful encoder give values
    near 1; heavy noise drives the correlation toward 0.
    """
    probes = np.asarray(probes, dtype=np.float64)
    if probes.ndim != 2 or probes.shape[0] < 3:
        raise ValueError("need at least 3 probe embeddings")
    feats = []
    for e in probes:
        resp = oracle.respond(e, rng, noise_std=noise_std)
        feats.append(np.asarray(encode(resp), dtype=np.float64).ravel())
    a = _pairwise_cosines(probes)
    b = _pairwise_cosines(np.stack(feats))
    a = a - a.mean()
    b = b - b.mean()
    denom = float(np.linalg.norm(a) * np.linalg.norm(b))
    if denom == 0.0:
        raise ValueError("degenerate correlation: zero variance in similarities")
    return float(np.dot(a, b) / denom)


def calibrate_noise_std(oracle: SyntheticBrain,
                        encode_matrix: np.ndarray,
                        probes: np.ndarray,
                        target_r: float,
                        rng: RngHandle,
                        tol: float = 0.005,
                        max_iter: int = 60) -> tuple[float, float]:
    """Bisection on noise_std to hit a target cross-modal correlation.

    `encode_matrix` must be the linear feature readout (features x flattened
    response); linearity lets one fixed noise draw be rescaled instead of
    re-simulated, so every bisection step reuses the same randomness.
    Returns (noise_std, achieved_r). Raises if the target is out of the
    attainable range.
    """
    probes = np.asarray(probes, dtype=np.float64)
    d = np.asarray(encode_matrix, dtype=np.float64)
    if not (0.0 < target_r < 1.0):
        raise ValueError("target correlation must lie in (0, 1)")
    clean = np.stack([
        d @ oracle.noiseless(e).data.ravel() for e in probes
    ])
    shape = (oracle.config.channels * oracle.config.timepoints,)
    noise_feat = np.stack([
        d @ rng.gen.standard_normal(shape) for _ in range(len(probes))
    ])
    a = _pairwise_cosines(probes)
    a = a - a.mean()
    na = float(np.linalg.norm(a))

    def corr_at(std: float) -> float:
        b = _pairwise_cosines(clean + std * noise_feat)
        b = b - b.mean()
        nb = float(np.linalg.norm(b))
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(np.dot(a, b) / (na * nb))

    lo, hi = 0.0, 1.0
    r_lo = corr_at(lo)
    if r_lo < target_r:
        raise ValueError(
            f"target correlation {target_r} above noiseless ceiling {r_lo:.4f}"
        )
    for _ in range(60):
        if corr_at(hi) < target_r:
            break
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("noise level exploded before reaching target")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r_mid = corr_at(mid)
        if abs(r_mid - target_r) <= tol:
            return mid, r_mid
        if r_mid > target_r:
            lo = mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    return mid, corr_at(mid)
