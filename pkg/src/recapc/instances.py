"""Seeded random instances.

``generate_instance`` follows the cosine-affinity recipe: latent vectors for
categories and types (dimension = number of categories), like-probabilities
from rescaled cosine similarity, and a softmax prior over normal logits, with
the same clipping steps and the same draw order (category latents, type
latents, logits).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Instance
from .rng import CounterRNG, derive_seed


@dataclass(frozen=True)
class GeneratorConfig:
    n_categories: int
    n_types: int
    clip_threshold: float = 0.01
    prior_logit_std: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_categories < 1 or self.n_types < 1:
            raise ValueError("need at least one category and one type")
        if not 0 < self.clip_threshold < 0.5:
            raise ValueError("clip_threshold must lie in (0, 0.5)")
        if self.prior_logit_std < 0:
            raise ValueError("prior_logit_std must be non-negative")


def default_names(prefix: str, n: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{i + 1}" for i in range(n))


def generate_instance(config: GeneratorConfig) -> Instance:
    rng = CounterRNG(config.seed)
    K, M, thr = config.n_categories, config.n_types, config.clip_threshold
    dim = K
    category_vecs = rng.normal((K, dim))
    type_vecs = rng.normal((M, dim))
    norms = np.outer(np.linalg.norm(category_vecs, axis=1), np.linalg.norm(type_vecs, axis=1))
    P = (category_vecs @ type_vecs.T) / norms
    P = np.clip((P + 1.0) / 2.0, thr, 1.0 - thr)

    logits = rng.normal(M, scale=config.prior_logit_std)
    q = np.exp(logits)
    q /= q.sum()
    q = np.clip(q, thr / M, 1.0 - thr)
    q /= q.sum()
    return Instance(default_names("k", K), default_names("m", M), P, q)


def generate_batch(config: GeneratorConfig, count: int) -> list[Instance]:
    """``count`` instances with seeds derived from ``(config.seed, index)``."""
    return [
        generate_instance(
            GeneratorConfig(
                config.n_categories,
                config.n_types,
                config.clip_threshold,
                config.prior_logit_std,
                derive_seed(config.seed, i),
            )
        )
        for i in range(count)
    ]


def uniform_instance(
    n_categories: int,
    n_types: int,
    seed: int,
    p_low: float = 0.01,
    p_high: float = 0.85,
    prior_floor: float = 0.1,
) -> Instance:
    """Like-probabilities uniform on ``[p_low, p_high]`` and a prior with
    every entry bounded away from zero.

    Entries are distinct with probability one, and ``p_high`` keeps the
    horizon H(eps) short, which makes this the family used for exact-oracle
    cross-checks.
    """
    rng = CounterRNG(seed)
    P = p_low + (p_high - p_low) * rng.uniform(n_categories * n_types).reshape(n_categories, n_types)
    w = rng.uniform(n_types) + prior_floor
    return Instance(default_names("k", n_categories), default_names("m", n_types), P, w / w.sum())
