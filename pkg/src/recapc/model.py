"""Problem instances, beliefs and Bayesian belief walks.

Matrices follow the ``P[k, m]`` convention: rows are categories, columns are
user types. Beliefs are plain 1-D float arrays over types.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import IO, Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import InfiniteWelfareError, InstanceFormatError, ZeroLikelihoodError

#: Denominators at or below this are treated as an impossible "like".
MIN_LIKELIHOOD = 1e-300

_INSTANCE_KEYS = ("categories", "types", "P", "q")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Instance:
    """A Rec-APC problem: like-probabilities ``P`` (categories x types) and
    a prior ``q`` over user types."""

    categories: tuple[str, ...]
    types: tuple[str, ...]
    P: np.ndarray
    q: np.ndarray
    # Per-entry geometric value P/(1-P), cached because every bound uses it.
    ratio: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        categories = tuple(str(c) for c in self.categories)
        types = tuple(str(t) for t in self.types)
        P = np.asarray(self.P, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if not categories or not types:
            raise InstanceFormatError("an instance needs at least one category and one type")
        if len(set(categories)) != len(categories) or len(set(types)) != len(types):
            raise InstanceFormatError("category and type names must be unique")
        if P.shape != (len(categories), len(types)):
            raise InstanceFormatError(
                f"P has shape {P.shape}, expected {(len(categories), len(types))}"
            )
        if q.shape != (len(types),):
            raise InstanceFormatError(f"q has shape {q.shape}, expected {(len(types),)}")
        if not (np.all(np.isfinite(P)) and np.all(np.isfinite(q))):
            raise InstanceFormatError("P and q must be finite")
        if np.any(P < 0) or np.any(P > 1):
            raise InstanceFormatError("P entries must lie in [0, 1]")
        if P.max() >= 1:
            raise InfiniteWelfareError(
                "p_max >= 1: a fixed policy on that category has infinite expected welfare"
            )
        if np.any(q <= 0) or np.any(q > 1):
            raise InstanceFormatError("q entries must lie in (0, 1]")
        if abs(q.sum() - 1.0) > 1e-9:
            raise InstanceFormatError(f"q sums to {q.sum()!r}, not 1")
        object.__setattr__(self, "categories", categories)
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "P", _frozen(P))
        object.__setattr__(self, "q", _frozen(q / q.sum()))
        object.__setattr__(self, "ratio", _frozen(P / (1.0 - P)))

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    @property
    def n_types(self) -> int:
        return len(self.types)

    @property
    def p_max(self) -> float:
        return float(self.P.max())

    def category_index(self, category: int | str) -> int:
        if isinstance(category, (int, np.integer)) and not isinstance(category, bool):
            if not 0 <= category < self.n_categories:
                raise IndexError(f"category index {category} out of range")
            return int(category)
        try:
            return self.categories.index(category)
        except ValueError:
            raise KeyError(f"unknown category {category!r}") from None

    def type_index(self, user_type: int | str) -> int:
        if isinstance(user_type, (int, np.integer)) and not isinstance(user_type, bool):
            if not 0 <= user_type < self.n_types:
                raise IndexError(f"type index {user_type} out of range")
            return int(user_type)
        try:
            return self.types.index(user_type)
        except ValueError:
            raise KeyError(f"unknown type {user_type!r}") from None

    def to_dict(self) -> dict[str, Any]:
        return {
            "categories": list(self.categories),
            "types": list(self.types),
            "P": self.P.tolist(),
            "q": self.q.tolist(),
        }

    def vertex(self, m: int) -> np.ndarray:
        e = np.zeros(self.n_types)
        e[m] = 1.0
        return e


# --------------------------------------------------------------------------
# Loading and saving
# --------------------------------------------------------------------------


def _number_list(value: Any, what: str) -> list[float]:
    if not isinstance(value, list):
        raise InstanceFormatError(f"{what} must be a list")
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise InstanceFormatError(f"{what} contains a non-numeric entry {v!r}")
        if not math.isfinite(v):
            raise InstanceFormatError(f"{what} contains a non-finite entry")
        out.append(float(v))
    return out


def instance_from_dict(doc: Mapping[str, Any]) -> Instance:
    """Validate a decoded JSON instance document.

    Types with zero prior mass are dropped (their P columns too) and the
    prior is renormalized; name order is otherwise preserved.
    """
    if not isinstance(doc, Mapping):
        raise InstanceFormatError("instance document must be a JSON object")
    unknown = set(doc) - set(_INSTANCE_KEYS)
    if unknown:
        raise InstanceFormatError(f"unknown keys: {sorted(unknown)}")
    missing = [k for k in _INSTANCE_KEYS if k not in doc]
    if missing:
        raise InstanceFormatError(f"missing keys: {missing}")

    categories, types = doc["categories"], doc["types"]
    for name, seq in (("categories", categories), ("types", types)):
        if not isinstance(seq, list) or not seq or not all(isinstance(s, str) for s in seq):
            raise InstanceFormatError(f"{name} must be a non-empty list of strings")
    if not isinstance(doc["P"], list) or len(doc["P"]) != len(categories):
        raise InstanceFormatError("P must have one row per category")
    rows = [_number_list(row, "P row") for row in doc["P"]]
    if any(len(row) != len(types) for row in rows):
        raise InstanceFormatError("every P row must have one entry per type")
    q = np.array(_number_list(doc["q"], "q"))
    if len(q) != len(types):
        raise InstanceFormatError("q must have one entry per type")
    P = np.array(rows, dtype=float).reshape(len(categories), len(types))

    if np.any(P < 0) or np.any(P > 1):
        raise InstanceFormatError("P entries must lie in [0, 1]")
    if np.any(q < 0) or np.any(q > 1):
        raise InstanceFormatError("q entries must lie in [0, 1]")
    if abs(q.sum() - 1.0) > 1e-6:
        raise InstanceFormatError(f"q sums to {q.sum()!r}; expected 1 within 1e-6")

    keep = q > 0
    P = P[:, keep]
    kept_types = [t for t, k in zip(types, keep) if k]
    q = q[keep] / q[keep].sum()
    if P.max() >= 1:
        raise InfiniteWelfareError(
            "p_max >= 1: a fixed policy on that category has infinite expected welfare"
        )
    return Instance(tuple(categories), tuple(kept_types), P, q)


def loads_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"not valid JSON: {exc}") from exc
    return instance_from_dict(doc)


def load_instance(source: str | os.PathLike | IO[str]) -> Instance:
    """Load an instance from a path or an open text file."""
    if hasattr(source, "read"):
        return loads_instance(source.read())
    with open(source, encoding="utf-8") as fh:
        return loads_instance(fh.read())


def dumps_instance(instance: Instance) -> str:
    return json.dumps(instance.to_dict(), indent=2)


def save_instance(instance: Instance, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_instance(instance))
        fh.write("\n")


# --------------------------------------------------------------------------
# Beliefs
# --------------------------------------------------------------------------


def as_belief(instance: Instance, belief: Iterable[float] | None) -> np.ndarray:
    """Validate a belief vector; ``None`` means the prior."""
    if belief is None:
        return instance.q
    b = np.asarray(belief, dtype=float)
    if b.shape != (instance.n_types,):
        raise ValueError(f"belief has shape {b.shape}, expected {(instance.n_types,)}")
    if not np.all(np.isfinite(b)) or np.any(b < 0):
        raise ValueError("belief entries must be finite and non-negative")
    s = b.sum()
    if abs(s - 1.0) > 1e-9:
        raise ValueError(f"belief sums to {s!r}, not 1")
    return b / s


def immediate_reward(instance: Instance, belief: np.ndarray, category: int) -> float:
    """Probability that a user drawn from ``belief`` likes ``category``."""
    return float(np.dot(belief, instance.P[category]))


def bayes_update(instance: Instance, belief: np.ndarray, category: int) -> np.ndarray:
    """Posterior over types after a 'like' on ``category``."""
    w = belief * instance.P[category]
    z = w.sum()
    if not z > MIN_LIKELIHOOD:
        raise ZeroLikelihoodError(
            f"a like on category {instance.categories[category]!r} has probability {z!r}"
        )
    w /= z
    return w / w.sum()


@dataclass(frozen=True)
class WalkStep:
    belief: np.ndarray
    category: int
    reward: float


@dataclass(frozen=True)
class BeliefWalk:
    steps: tuple[WalkStep, ...]
    end_belief: np.ndarray

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def beliefs(self) -> np.ndarray:
        """Beliefs b_1..b_h followed by the end-of-prefix belief b_{h+1}."""
        return np.vstack([s.belief for s in self.steps] + [self.end_belief])

    @property
    def rewards(self) -> np.ndarray:
        return np.array([s.reward for s in self.steps])


def walk(
    instance: Instance, prefix: Sequence[int], start: np.ndarray | None = None
) -> BeliefWalk:
    """Belief walk induced by ``prefix`` under repeated positive feedback."""
    if len(prefix) == 0:
        raise ValueError("walk needs a non-empty prefix")
    b = as_belief(instance, start)
    steps = []
    for k in prefix:
        k = instance.category_index(k)
        steps.append(WalkStep(b, k, immediate_reward(instance, b, k)))
        b = bayes_update(instance, b, k)
    return BeliefWalk(tuple(steps), b)
