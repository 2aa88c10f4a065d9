"""Stochastic sampling and filtering primitives.

Covers the latent truncation trick, nucleus/top-k sampling over categorical
distributions, Jensen-Shannon ensemble disagreement, and the two batch
filters (classifier-confidence rejection and uncertainty filtering). All
randomness comes from caller-owned ``numpy.random.Generator`` instances, so
identical seeds give identical outputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import xlogy

_DIST_TOL = 1e-9


@dataclass(frozen=True)
class FilterConfig:
    """Filter-stage knobs with their standard defaults.

    truncation_psi: latent coordinates are resampled into [-psi, psi].
    rejection_rate: fraction of lowest-confidence samples to reject.
    nucleus_p / top_k: token-sampling truncation for autoregressive sources.
    uncertainty_fraction: fraction of most-uncertain samples to drop.
    """

    truncation_psi: float = 0.9
    rejection_rate: float = 0.9
    nucleus_p: float = 0.92
    top_k: int = 200
    uncertainty_fraction: float = 0.10

    def __post_init__(self):
        if not self.truncation_psi > 0:
            raise ValueError("truncation_psi must be > 0")
        if not 0.0 <= self.rejection_rate < 1.0:
            raise ValueError("rejection_rate must be in [0, 1)")
        if not 0.0 < self.nucleus_p <= 1.0:
            raise ValueError("nucleus_p must be in (0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not 0.0 <= self.uncertainty_fraction < 1.0:
            raise ValueError("uncertainty_fraction must be in [0, 1)")

    @classmethod
    def from_file(cls, path) -> "FilterConfig":
        """Load key=value lines; unknown keys are rejected."""
        kwargs = {}
        fields = {f: t for f, t in (("truncation_psi", float), ("rejection_rate", float),
                                    ("nucleus_p", float), ("top_k", int),
                                    ("uncertainty_fraction", float))}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or key not in fields:
                raise ValueError(f"{path}:{lineno}: expected <known key>=<value>")
            kwargs[key] = fields[key](value.strip())
        return cls(**kwargs)

    def to_file(self, path) -> None:
        lines = [
            f"truncation_psi={self.truncation_psi!r}",
            f"rejection_rate={self.rejection_rate!r}",
            f"nucleus_p={self.nucleus_p!r}",
            f"top_k={self.top_k}",
            f"uncertainty_fraction={self.uncertainty_fraction!r}",
        ]
        Path(path).write_text("\n".join(lines) + "\n")

    def override(self, **kwargs) -> "FilterConfig":
        updates = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **updates)


def _as_dist(probs) -> np.ndarray:
    p = np.asarray(getattr(probs, "probs", probs), dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("distribution must be a nonempty 1-D vector")
    if p.min() < 0:
        raise ValueError("distribution entries must be nonnegative")
    if abs(p.sum() - 1.0) > _DIST_TOL:
        raise ValueError(f"distribution sums to {p.sum()!r}, not 1")
    return p


@dataclass(frozen=True)
class CategoricalDist:
    """A validated probability vector."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _as_dist(self.probs))


def truncated_normal(dim: int, psi: float, rng: np.random.Generator) -> np.ndarray:
    """Standard-normal coordinates resampled independently until |z| <= psi."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not psi > 0:
        raise ValueError("psi must be > 0")
    z = rng.standard_normal(dim)
    out_of_range = np.abs(z) > psi
    while out_of_range.any():
        z[out_of_range] = rng.standard_normal(int(out_of_range.sum()))
        out_of_range = np.abs(z) > psi
    return z


def nucleus_topk_support(probs, p: float, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncated support and renormalized probabilities for nucleus/top-k.

    Sorts descending (ties by ascending index), keeps the smallest prefix
    whose cumulative mass reaches p, intersects it with the top-k prefix,
    and renormalizes.
    """
    dist = _as_dist(probs)
    order = np.argsort(-dist, kind="stable")
    cumulative = np.cumsum(dist[order])
    prefix = int(np.searchsorted(cumulative, p)) + 1
    prefix = min(prefix, k, dist.size)
    support = order[:prefix]
    kept = dist[support]
    return support, kept / kept.sum()


def nucleus_topk_sample(probs, p: float, k: int, rng: np.random.Generator, size=None):
    """Draw an index (or ``size`` indices) from the truncated distribution."""
    support, renormalized = nucleus_topk_support(probs, p, k)
    return rng.choice(support, size=size, p=renormalized)


def _entropy(p: np.ndarray, axis=-1) -> np.ndarray:
    return -xlogy(p, p).sum(axis=axis)


def js_divergence(dists) -> float:
    """Jensen-Shannon divergence of N distributions, natural-log entropy.

    Entropy of the equal-weight mixture minus the mean member entropy;
    always in [0, ln N].
    """
    stack = [_as_dist(d) for d in dists]
    if len(stack) < 2:
        raise ValueError("need at least 2 distributions")
    sizes = {s.size for s in stack}
    if len(sizes) != 1:
        raise ValueError(f"support sizes differ: {sorted(sizes)}")
    p = np.stack(stack)
    value = _entropy(p.mean(axis=0)) - _entropy(p).mean()
    return float(max(value, 0.0))


@dataclass(frozen=True)
class EnsemblePrediction:
    """Per-pixel class probabilities from K heads, shape (K, H, W, C)."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=np.float64)
        if arr.ndim != 4:
            raise ValueError(f"ensemble probs must be (K, H, W, C), got {arr.shape}")
        if arr.shape[0] < 2:
            raise ValueError("ensemble needs K >= 2 heads")
        if arr.min() < 0:
            raise ValueError("probabilities must be nonnegative")
        sums = arr.sum(axis=-1)
        if np.abs(sums - 1.0).max() > 1e-6:
            raise ValueError("per-pixel probabilities must sum to 1 within 1e-6")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)

    @property
    def num_heads(self) -> int:
        return self.probs.shape[0]


def sample_uncertainty(pred) -> float:
    """Mean over pixels of the per-pixel JS divergence across ensemble heads."""
    probs = pred.probs if isinstance(pred, EnsemblePrediction) else np.asarray(pred, float)
    if probs.ndim != 4 or probs.shape[0] < 2:
        raise ValueError("expected (K, H, W, C) probabilities with K >= 2")
    mixture_entropy = _entropy(probs.mean(axis=0))
    mean_entropy = _entropy(probs).mean(axis=0)
    per_pixel = np.maximum(mixture_entropy - mean_entropy, 0.0)
    return float(per_pixel.mean())


def _require_scores(samples, attr: str) -> list[float]:
    scores = []
    for sample in samples:
        value = getattr(sample, attr)
        if value is None:
            raise ValueError(f"sample {sample.id!r} is missing {attr}")
        scores.append(float(value))
    return scores


def uncertainty_filter(samples, fraction: float = 0.10):
    """Drop the ceil(fraction*n) most uncertain samples.

    Ties at the cut are resolved by dropping the larger sample id first, so
    tied samples with smaller ids are kept. Input order is preserved.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError("fraction must be in [0, 1)")
    samples = list(samples)
    scores = _require_scores(samples, "uncertainty")
    drop = math.ceil(fraction * len(samples))
    if drop == 0:
        return samples
    order = sorted(range(len(samples)), key=lambda i: samples[i].id, reverse=True)
    order.sort(key=lambda i: -scores[i])  # stable: equal scores stay id-descending
    dropped = set(order[:drop])
    return [s for i, s in enumerate(samples) if i not in dropped]


def confidence_rejection(samples, rate: float = 0.9):
    """Keep the ceil((1-rate)*n) most confident samples.

    Ties at the cut keep the smaller sample id. Input order is preserved
    among the kept samples.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError("rate must be in [0, 1)")
    samples = list(samples)
    scores = _require_scores(samples, "confidence")
    keep = math.ceil((1.0 - rate) * len(samples))
    order = sorted(range(len(samples)), key=lambda i: samples[i].id)
    order.sort(key=lambda i: -scores[i])  # stable: equal scores stay id-ascending
    kept = set(order[:keep])
    return [s for i, s in enumerate(samples) if i in kept]
