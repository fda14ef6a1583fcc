"""Reproducible synthetic feature pools, balanced or exponentially long-tailed.

Class counts follow an exponential profile: class ``k`` of ``C`` holds
``round(n_max * ratio**(-k/(C-1)))`` samples, so the most frequent class has
exactly ``ratio`` times the least frequent. Samples are isotropic Gaussians
around well-separated class means.

All randomness flows from ``SynthSpec.seed`` through named sub-streams
(one for the class means, one for the output shuffle, one per class for the
noise), so generation is a pure function of the spec and bit-identical
across runs and platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SpecError


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic pool."""

    num_classes: int
    feature_dim: int
    max_per_class: int
    imbalance_ratio: float = 1.0
    class_separation: float = 6.0
    noise_sigma: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.num_classes < 1:
            raise SpecError("num_classes must be >= 1")
        if self.feature_dim < 1:
            raise SpecError("feature_dim must be >= 1")
        if self.max_per_class < 1:
            raise SpecError("max_per_class must be >= 1")
        if self.imbalance_ratio < 1.0:
            raise SpecError("imbalance_ratio must be >= 1")
        if self.imbalance_ratio > 1.0 and self.num_classes < 2:
            raise SpecError("an imbalanced pool needs at least 2 classes")
        if self.class_separation <= 0:
            raise SpecError("class_separation must be > 0")
        if self.noise_sigma <= 0:
            raise SpecError("noise_sigma must be > 0")


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5))


def longtail_counts(num_classes: int, n_max: int, ratio: float) -> list[int]:
    """Per-class sample counts decreasing exponentially by ``ratio`` overall.

    Endpoints are pinned: class 0 gets exactly ``n_max`` and the last class
    ``round(n_max / ratio)``. Rounding is half-away-from-zero.
    """
    if num_classes < 1 or n_max < 1:
        raise SpecError("num_classes and n_max must be positive")
    if ratio < 1.0:
        raise SpecError("ratio must be >= 1")
    if ratio > 1.0 and num_classes < 2:
        raise SpecError("ratio > 1 needs at least 2 classes")
    if num_classes == 1 or ratio == 1.0:
        return [n_max] * num_classes
    counts = [
        _round_half_away(n_max * ratio ** (-k / (num_classes - 1)))
        for k in range(num_classes)
    ]
    for k, c in enumerate(counts):
        if c < 1:
            raise SpecError(
                f"class {k} count rounds to {c}; lower the ratio or raise n_max"
            )
    return counts


def class_means(spec: SynthSpec) -> np.ndarray:
    """Deterministic (C, d') class means at pairwise distance >= separation.

    The first ``min(C, d')`` means are orthonormalized Gaussian draws scaled
    by ``class_separation`` (pairwise distance ``separation * sqrt(2)``).
    When C > d' there is no room for more orthogonal directions; the excess
    means are random unit directions at the same radius, so the separation
    floor is only guaranteed for C <= d'.
    """
    rng = _streams(spec, 0)
    c, d = spec.num_classes, spec.feature_dim
    n_ortho = min(c, d)
    raw = rng.normal(size=(n_ortho, d))
    basis = np.empty_like(raw)
    for i in range(n_ortho):
        v = raw[i]
        for j in range(i):
            v = v - (v @ basis[j]) * basis[j]
        norm = np.linalg.norm(v)
        while norm < 1e-9:  # essentially impossible, but never divide by ~0
            v = rng.normal(size=d)
            for j in range(i):
                v = v - (v @ basis[j]) * basis[j]
            norm = np.linalg.norm(v)
        basis[i] = v / norm
    if c > n_ortho:
        extra = rng.normal(size=(c - n_ortho, d))
        extra /= np.linalg.norm(extra, axis=1, keepdims=True)
        basis = np.vstack([basis, extra])
    return basis * spec.class_separation


def _streams(spec_or_seed, index: int) -> np.random.Generator:
    """Named sub-stream ``index`` of the spec's seed.

    Stream 0 draws the class means, stream 1 the output shuffle, and stream
    ``2 + c`` the noise of class ``c``.
    """
    seed = spec_or_seed.seed if isinstance(spec_or_seed, SynthSpec) else spec_or_seed
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def sample_classes(
    means: np.ndarray,
    counts: list[int],
    noise_sigma: float,
    seed: int,
    stream_offset: int = 2,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``counts[c]`` noisy samples around each mean; unshuffled.

    Returns float32 features and int64 labels, grouped by class.
    """
    blocks = []
    labels = []
    for c, n_c in enumerate(counts):
        rng = np.random.default_rng(
            np.random.SeedSequence([int(seed), int(stream_offset + c)])
        )
        noise = rng.normal(scale=noise_sigma, size=(n_c, means.shape[1]))
        blocks.append((means[c] + noise).astype(np.float32))
        labels.append(np.full(n_c, c, dtype=np.int64))
    return np.vstack(blocks), np.concatenate(labels)


def generate(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generate the pool: (features float32, labels int64, class means float32).

    The per-class histogram of the output equals ``longtail_counts`` exactly;
    the sample order is a seeded shuffle.
    """
    spec.validate()
    counts = longtail_counts(spec.num_classes, spec.max_per_class, spec.imbalance_ratio)
    means = class_means(spec)
    features, labels = sample_classes(means, counts, spec.noise_sigma, spec.seed)
    order = _streams(spec, 1).permutation(len(labels))
    return features[order], labels[order], means.astype(np.float32)
