"""Value functions for category-sequence policies and the prefix bounds used
by branch-and-bound."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import HorizonTooLarge
from .model import Instance, as_belief, bayes_update

MAX_HORIZON = 10**7


@dataclass(frozen=True)
class Policy:
    """A finite prefix followed by one category repeated forever."""

    prefix: tuple[int, ...]
    tail: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "prefix", tuple(int(k) for k in self.prefix))
        object.__setattr__(self, "tail", int(self.tail))

    def category_at(self, t: int) -> int:
        """Category recommended in round ``t`` (1-based)."""
        return self.prefix[t - 1] if t <= len(self.prefix) else self.tail

    def validate(self, instance: Instance) -> "Policy":
        for k in (*self.prefix, self.tail):
            instance.category_index(k)
        return self


@dataclass(frozen=True)
class BoundedValue:
    """Lower/upper sandwich around the best value of policies starting with
    ``prefix``, plus the walk state needed to extend the prefix cheaply."""

    prefix: tuple[int, ...]
    lower: float
    upper: float
    accumulated: float  # expected likes collected during the prefix
    discount: float  # probability of surviving the whole prefix
    belief: np.ndarray  # belief after the prefix
    best_tail: int  # fixed category achieving the lower bound


def value_fixed(instance: Instance, belief: np.ndarray, category: int) -> float:
    """Value of recommending ``category`` forever: sum_m b(m) P/(1-P)."""
    return float(np.dot(belief, instance.ratio[category]))


def value_policy(instance: Instance, belief: np.ndarray, policy: Policy) -> float:
    """Exact value of a prefix-plus-tail policy.

    Works per type on products of raw like-probabilities, then mixes by the
    belief, so no renormalization error accumulates along the prefix.
    """
    survive = np.ones(instance.n_types)
    total = np.zeros(instance.n_types)
    for k in policy.prefix:
        survive = survive * instance.P[k]
        total += survive
    total += survive * instance.ratio[policy.tail]
    return float(np.dot(belief, total))


def value_finite_horizon(
    instance: Instance, belief: np.ndarray, prefix: Sequence[int], horizon: int
) -> float:
    """Expected likes when the session is cut off after ``horizon`` rounds,
    accumulated along the belief walk."""
    if horizon < 0 or len(prefix) < horizon:
        raise ValueError("prefix must cover the horizon")
    b = belief
    discount, total = 1.0, 0.0
    for t in range(horizon):
        k = prefix[t]
        p = float(np.dot(b, instance.P[k]))
        discount *= p
        total += discount
        if discount == 0.0:
            break
        if t + 1 < horizon:
            b = bayes_update(instance, b, k)
    return total


def horizon_for_pmax(p_max: float, epsilon: float) -> int:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if p_max <= 0:
        return 1
    target = epsilon * (1.0 - p_max) / p_max
    if target >= 1.0:
        return 1
    h = math.ceil(math.log(target) / math.log(p_max))
    if h > MAX_HORIZON:
        raise HorizonTooLarge(f"H(eps) = {h} exceeds {MAX_HORIZON}; p_max is too close to 1")
    return max(1, h)


def horizon_for_epsilon(instance: Instance, epsilon: float) -> int:
    """Rounds after which the unexplored tail is worth at most ``epsilon``."""
    return horizon_for_pmax(instance.p_max, epsilon)


def upper_bound(instance: Instance, belief: np.ndarray) -> float:
    """Full-information bound: every type gets its favourite category forever."""
    return float(np.dot(belief, instance.ratio.max(axis=0)))


def lower_bound(instance: Instance, belief: np.ndarray) -> tuple[float, int]:
    """Best fixed-category value and its category (lowest index on ties)."""
    values = instance.ratio @ belief
    k = int(np.argmax(values))
    return float(values[k]), k


def root_bounds(instance: Instance, belief: np.ndarray | None = None) -> BoundedValue:
    b = as_belief(instance, belief)
    lo, k = lower_bound(instance, b)
    return BoundedValue((), lo, upper_bound(instance, b), 0.0, 1.0, b, k)


def extend_bounds(instance: Instance, node: BoundedValue, category: int) -> BoundedValue:
    """Bounds for ``node.prefix + (category,)`` reusing the cached walk state."""
    p = float(np.dot(node.belief, instance.P[category]))
    b = bayes_update(instance, node.belief, category)
    discount = node.discount * p
    accumulated = node.accumulated + discount
    lo, k = lower_bound(instance, b)
    return BoundedValue(
        node.prefix + (category,),
        accumulated + discount * lo,
        accumulated + discount * upper_bound(instance, b),
        accumulated,
        discount,
        b,
        k,
    )


def prefix_bounds(
    instance: Instance, prefix: Sequence[int], belief: np.ndarray | None = None
) -> BoundedValue:
    """Bounds on the best value of any policy that starts with ``prefix``.

    Cumulative reward over the prefix plus the survival-weighted lower/upper
    bound at the end-of-prefix belief. An empty prefix gives the bounds at
    the start belief itself.
    """
    node = root_bounds(instance, belief)
    for k in prefix:
        node = extend_bounds(instance, node, instance.category_index(k))
    return node
