"""Optimal-policy computation.

``solve_bnb`` is the anytime branch-and-bound search over category prefixes.
``solve_dp`` solves the H-round problem exactly by backward induction over
category count vectors (a belief depends only on how often each category was
liked, not on the order). ``solve_bruteforce`` enumerates every sequence and
exists as an oracle for the other two.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import NodeBudgetExceeded, SearchBudgetExceeded, StateBudgetExceeded
from .model import Instance, as_belief, bayes_update
from .valuation import Policy, horizon_for_epsilon, lower_bound, upper_bound

DP_STATE_BUDGET = 5_000_000
BRUTEFORCE_BUDGET = 10_000_000
DEPTH_SLACK = 8

QUEUE_DISCIPLINES = ("best", "fifo")


@dataclass(frozen=True)
class SolveResult:
    prefix: tuple[int, ...]
    value: float
    upper_certificate: float
    nodes_expanded: int
    wall_time: float  # seconds
    extended_policy: Policy
    epsilon: float

    @property
    def gap(self) -> float:
        return self.upper_certificate - self.value

    @property
    def first_action(self) -> int:
        return self.extended_policy.category_at(1)


class HorizonSolution(NamedTuple):
    value: float
    prefix: tuple[int, ...]


def _unwind(link) -> tuple[int, ...]:
    out = []
    while link is not None:
        k, link = link
        out.append(k)
    return tuple(reversed(out))


def solve_bnb(
    instance: Instance,
    epsilon: float,
    queue: str = "best",
    *,
    belief: np.ndarray | None = None,
    max_nodes: int | None = None,
) -> SolveResult:
    """Epsilon-optimal prefix by branch-and-bound.

    The incumbent starts at the best fixed-category value of the start
    belief and is raised whenever a popped prefix has a better lower bound.
    A child prefix is queued only if its upper bound beats the incumbent by
    more than ``epsilon``. ``queue="best"`` pops the largest upper bound
    first; ``queue="fifo"`` pops in insertion order.

    The returned ``upper_certificate`` is the largest upper bound among the
    pruned prefixes, so ``value <= V* <= upper_certificate``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if queue not in QUEUE_DISCIPLINES:
        raise ValueError(f"unknown queue discipline {queue!r}")
    t0 = time.perf_counter()

    P, ratio = instance.P, instance.ratio
    ratio_t = ratio.T.copy()
    best_ratio = ratio.max(axis=0)
    depth_cap = horizon_for_epsilon(instance, epsilon) + DEPTH_SLACK

    b0 = as_belief(instance, belief)
    best_value, best_tail = lower_bound(instance, b0)
    best_link, best_belief = None, b0
    pruned_upper = -math.inf

    # node: (lower, tail, accumulated, discount, belief, depth, link)
    root = (best_value, best_tail, 0.0, 1.0, b0, 0, None)
    counter = itertools.count()
    if queue == "best":
        frontier: list = [(-upper_bound(instance, b0), next(counter), root)]
        pop = lambda: heapq.heappop(frontier)  # noqa: E731
        push = lambda up, node: heapq.heappush(frontier, (-up, next(counter), node))  # noqa: E731
    else:
        frontier = deque([(-upper_bound(instance, b0), 0, root)])
        pop = frontier.popleft
        push = lambda up, node: frontier.append((-up, 0, node))  # noqa: E731

    expanded = 0
    while frontier:
        neg_up, _, node = pop()
        lower, tail, acc, disc, b, depth, link = node
        if best_value < lower:
            best_value, best_tail, best_link, best_belief = lower, tail, link, b
        if -neg_up - best_value <= epsilon:
            # Child upper bounds never exceed the parent's, so all would be pruned.
            pruned_upper = max(pruned_upper, -neg_up)
            continue
        if depth >= depth_cap:
            pruned_upper = max(pruned_upper, -neg_up)
            continue
        expanded += 1
        if max_nodes is not None and expanded > max_nodes:
            raise NodeBudgetExceeded(f"branch-and-bound exceeded {max_nodes} expansions")

        likes = P * b  # unnormalized posteriors, one row per category
        p = likes.sum(axis=1)
        child_disc = disc * p
        child_acc = acc + child_disc
        child_up = child_acc + disc * (likes @ best_ratio)
        fixed = likes @ ratio_t
        child_tail = fixed.argmax(axis=1)
        child_low = child_acc + disc * fixed[np.arange(len(p)), child_tail]
        for k in range(len(p)):
            up = float(child_up[k])
            if up - best_value > epsilon:
                child = (
                    float(child_low[k]),
                    int(child_tail[k]),
                    float(child_acc[k]),
                    float(child_disc[k]),
                    likes[k] / p[k],
                    depth + 1,
                    (k, link),
                )
                push(up, child)
            else:
                pruned_upper = max(pruned_upper, up)

    prefix = _unwind(best_link)
    return SolveResult(
        prefix=prefix,
        value=best_value,
        upper_certificate=max(best_value, pruned_upper),
        nodes_expanded=expanded,
        wall_time=time.perf_counter() - t0,
        extended_policy=Policy(prefix, lower_bound(instance, best_belief)[1]),
        epsilon=epsilon,
    )


# --------------------------------------------------------------------------
# Multiset dynamic programming
# --------------------------------------------------------------------------


def dp_state_count(n_categories: int, horizon: int) -> int:
    """Number of count vectors with total at most ``horizon``."""
    return math.comb(horizon + n_categories, n_categories)


def compositions(total: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to
    ``total``, in ascending lexicographic order."""
    rows = np.zeros((1, 0), dtype=np.int64)
    remaining = np.array([total], dtype=np.int64)
    for _ in range(parts - 1):
        fan = remaining + 1
        starts = np.repeat(np.cumsum(fan) - fan, fan)
        value = np.arange(fan.sum(), dtype=np.int64) - starts
        rows = np.column_stack([np.repeat(rows, fan, axis=0), value])
        remaining = np.repeat(remaining, fan) - value
    return np.column_stack([rows, remaining])


def _binomial_table(n: int, k: int) -> np.ndarray:
    table = np.zeros((n + 1, k + 1), dtype=np.int64)
    for i in range(n + 1):
        for j in range(min(i, k) + 1):
            table[i, j] = math.comb(i, j)
    return table


def composition_rank(counts: np.ndarray, binom: np.ndarray) -> np.ndarray:
    """Position of each row of ``counts`` within ``compositions(total, K)``.

    Counts the lexicographically smaller vectors coordinate by coordinate;
    the inner sums over skipped values collapse by the hockey-stick identity.
    """
    counts = np.atleast_2d(counts)
    K = counts.shape[1]
    remaining = counts.sum(axis=1)
    rank = np.zeros(len(counts), dtype=np.int64)
    for i in range(K - 1):
        a = K - i - 2
        n_i = counts[:, i]
        rank += binom[remaining + a + 1, a + 1] - binom[remaining - n_i + a + 1, a + 1]
        remaining = remaining - n_i
    return rank


def _layer_beliefs(counts: np.ndarray, log_q: np.ndarray, log_P: np.ndarray) -> np.ndarray:
    log_w = log_q + counts @ log_P
    log_w -= log_w.max(axis=1, keepdims=True)
    w = np.exp(log_w)
    return w / w.sum(axis=1, keepdims=True)


def solve_dp(instance: Instance, horizon: int) -> HorizonSolution:
    """Exact optimum of the ``horizon``-round value, by backward induction
    over category count vectors.

    Layer ``h`` holds every count vector with total ``h``; its belief is the
    prior reweighted by ``prod_k P[k]**n_k``. Ties go to the lowest category
    at every state, so the returned prefix is the lexicographically first
    optimizer.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    K = instance.n_categories
    n_states = dp_state_count(K, horizon)
    if n_states > DP_STATE_BUDGET:
        raise StateBudgetExceeded(
            f"{n_states} multiset states for H={horizon}, |K|={K}; budget is {DP_STATE_BUDGET}"
        )
    P = instance.P
    with np.errstate(divide="ignore"):
        log_P = np.where(P > 0, np.log(np.where(P > 0, P, 1.0)), -1e300)
    log_q = np.log(instance.q)
    binom = _binomial_table(horizon + K + 1, K)
    eye = np.eye(K, dtype=np.int64)

    next_values = np.zeros(math.comb(horizon + K - 1, K - 1))
    choices: list[np.ndarray] = [None] * horizon  # type: ignore[list-item]
    for h in range(horizon - 1, -1, -1):
        counts = compositions(h, K)
        beliefs = instance.q[None, :] if h == 0 else _layer_beliefs(counts, log_q, log_P)
        p = beliefs @ P.T
        child = np.stack([composition_rank(counts + eye[k], binom) for k in range(K)], axis=1)
        q_values = p * (1.0 + next_values[child])
        best = q_values.argmax(axis=1)
        choices[h] = best.astype(np.int16)
        next_values = q_values[np.arange(len(best)), best]

    value = float(next_values[0])
    counts = np.zeros(K, dtype=np.int64)
    prefix = []
    for h in range(horizon):
        k = int(choices[h][composition_rank(counts, binom)[0]])
        prefix.append(k)
        counts[k] += 1
    return HorizonSolution(value, tuple(prefix))


def solve_bruteforce(instance: Instance, horizon: int) -> HorizonSolution:
    """Maximum of the ``horizon``-round value over all |K|^H sequences.

    Depth-first, sharing work between sequences with a common prefix; the
    per-sequence arithmetic is the same as ``value_finite_horizon``.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    K = instance.n_categories
    if K**horizon > BRUTEFORCE_BUDGET:
        raise SearchBudgetExceeded(f"{K}^{horizon} sequences exceed {BRUTEFORCE_BUDGET}")
    best = [-math.inf, ()]
    path: list[int] = []

    def visit(b: np.ndarray, disc: float, total: float, depth: int) -> None:
        for k in range(K):
            p = float(np.dot(b, instance.P[k]))
            d = disc * p
            t = total + d
            path.append(k)
            if depth + 1 == horizon or d == 0.0:
                if t > best[0]:
                    best[0], best[1] = t, tuple(path) + (0,) * (horizon - depth - 1)
            else:
                visit(bayes_update(instance, b, k), d, t, depth + 1)
            path.pop()

    visit(instance.q, 1.0, 0.0, 0)
    return HorizonSolution(best[0], best[1])


# --------------------------------------------------------------------------
# Baselines
# --------------------------------------------------------------------------


def policy_myopic(
    instance: Instance, start: np.ndarray | None = None, steps: int = 1
) -> tuple[int, ...]:
    """Greedy sequence: highest immediate like-probability, then update."""
    b = as_belief(instance, start)
    out = []
    for _ in range(steps):
        k = int(np.argmax(instance.P @ b))
        out.append(k)
        b = bayes_update(instance, b, k)
    return tuple(out)


def policy_bfa(instance: Instance, start: np.ndarray | None = None) -> int:
    """Best fixed-action category at ``start``."""
    return lower_bound(instance, as_belief(instance, start))[1]

