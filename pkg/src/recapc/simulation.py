"""Monte-Carlo sessions: sample a user type from the prior, then recommend
along the policy until the first dislike.

Session ``i`` under seed ``s`` draws all of its randomness from counter
stream ``(s, i)``: draw 0 picks the type, draw ``t`` decides round ``t``.
Any subset of sessions can therefore be reproduced on its own, and the
vectorized batch simulation gives exactly the per-session results.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import EmptySimulationError, RoundCapExceeded
from .model import Instance
from .rng import stream_key, uniforms
from .valuation import Policy

ROUND_CAP = 10_000_000
Z95 = 1.959963984540054


@dataclass(frozen=True)
class SessionOutcome:
    sampled_type: int
    likes: int

    @property
    def rounds_survived(self) -> int:
        return self.likes


@dataclass(frozen=True)
class SessionBatch:
    """Per-session results of a batch run, in session-index order."""

    types: np.ndarray
    likes: np.ndarray

    def __len__(self) -> int:
        return len(self.likes)

    def summary(self) -> "SimulationSummary":
        return summarize(self.likes)

    def per_type(self, n_types: int) -> list["SimulationSummary | None"]:
        """Summaries conditional on the sampled type (None if never sampled)."""
        return [summarize(self.likes[self.types == m]) if np.any(self.types == m) else None
                for m in range(n_types)]


@dataclass(frozen=True)
class SimulationSummary:
    sessions: int
    mean_likes: float
    std_error: float
    ci95_low: float
    ci95_high: float

    def contains(self, value: float, n_sigma: float = 3.0) -> bool:
        return abs(value - self.mean_likes) <= n_sigma * self.std_error


def summarize(likes: np.ndarray) -> SimulationSummary:
    """Sample mean with a normal-approximation 95% interval."""
    n = len(likes)
    if n == 0:
        raise EmptySimulationError("empty simulation: no sessions")
    mean = float(np.mean(likes))
    se = float(np.std(likes, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return SimulationSummary(n, mean, se, mean - Z95 * se, mean + Z95 * se)


def _run(instance: Instance, policy: Policy, keys: np.ndarray, round_cap: int) -> SessionBatch:
    policy.validate(instance)
    cdf = np.cumsum(instance.q)
    u0 = uniforms(keys, 0)
    types = np.minimum(np.searchsorted(cdf, u0 * cdf[-1], side="right"), instance.n_types - 1)
    likes = np.zeros(len(keys), dtype=np.int64)
    active = np.arange(len(keys))
    t = 0
    while len(active):
        t += 1
        if t > round_cap:
            raise RoundCapExceeded(f"a session survived {round_cap} rounds")
        k = policy.category_at(t)
        liked = uniforms(keys[active], t) < instance.P[k, types[active]]
        active = active[liked]
        likes[active] += 1
    return SessionBatch(types.astype(np.int64), likes)


def simulate_batch(
    instance: Instance, policy: Policy, sessions: int, seed: int, *, round_cap: int = ROUND_CAP
) -> SessionBatch:
    if sessions < 0:
        raise ValueError("sessions must be non-negative")
    return _run(instance, policy, stream_key(seed, np.arange(sessions)), round_cap)


def simulate_session(
    instance: Instance, policy: Policy, seed: int, index: int = 0, *, round_cap: int = ROUND_CAP
) -> SessionOutcome:
    """One session, identical to session ``index`` of a batch under ``seed``."""
    batch = _run(instance, policy, stream_key(seed, np.array([index])), round_cap)
    return SessionOutcome(int(batch.types[0]), int(batch.likes[0]))


def simulate_many(
    instance: Instance, policy: Policy, sessions: int, seed: int, *, chunk: int = 250_000
) -> SimulationSummary:
    """Mean likes per session over ``sessions`` independent sessions."""
    if sessions <= 0:
        raise EmptySimulationError("empty simulation: sessions must be positive")
    parts = []
    for start in range(0, sessions, chunk):
        idx = np.arange(start, min(sessions, start + chunk))
        parts.append(_run(instance, policy, stream_key(seed, idx), ROUND_CAP).likes)
    return summarize(np.concatenate(parts))


def write_sessions_csv(path: str | os.PathLike, instance: Instance, batch: SessionBatch) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["session_index", "sampled_type", "likes"])
        for i, (m, n) in enumerate(zip(batch.types, batch.likes)):
            w.writerow([i, instance.types[m], int(n)])
