"""Convergence diagnostics: the instance constant ``c``, belief
concentration, convergence of the re-solved optimal policy, uncertainty
curves, and numerical checks of the value-gap, near-vertex and Lipschitz
properties."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from .errors import NotConvergedWithinBudget, PreconditionError
from .model import Instance, as_belief, bayes_update
from .solvers import solve_bnb

STABILITY_WINDOW = 50


@dataclass(frozen=True)
class InstanceConstants:
    c1: float
    c2: float
    c3: float
    c4: float
    c: float
    p_max: float

    @property
    def delta(self) -> float:
        """Concentration threshold c^2/4."""
        return self.c**2 / 4.0

    @property
    def theorems_apply(self) -> bool:
        return self.c > 0

    @property
    def value_ceiling(self) -> float:
        return (1.0 - self.c) / self.c if self.c > 0 else math.inf

    @property
    def lipschitz_constant(self) -> float:
        return self.value_ceiling

    def gap_lower_bound(self, delta: float) -> float:
        return delta * (1.0 - delta) * self.c**2 / (1.0 - self.c)

    def max_unconcentrated(self, delta: float | None = None) -> int | None:
        """Most delta-unconcentrated beliefs an optimal walk can visit."""
        if self.c <= 0:
            return None
        delta = self.delta if delta is None else delta
        return math.ceil((1.0 - self.c) ** 2 / (delta * (1.0 - delta) * self.c**3))


def compute_constants(instance: Instance) -> InstanceConstants:
    """Heterogeneity constants of an instance.

    c2 is the smallest gap between two types within one category row, c3
    the smallest margin between a type's favourite and second-favourite
    category. When there are no pairs to compare (one type, or one
    category) the corresponding constant is vacuous and reported as 1.
    """
    P = instance.P
    c1 = 1.0 - instance.p_max
    if instance.n_types > 1:
        rows = np.sort(P, axis=1)
        c2 = float(np.diff(rows, axis=1).min())
    else:
        c2 = 1.0
    if instance.n_categories > 1:
        cols = np.sort(P, axis=0)
        c3 = float((cols[-1] - cols[-2]).min())
    else:
        c3 = 1.0
    c4 = float(instance.q.min())
    return InstanceConstants(c1, c2, c3, c4, min(c1, c2, c3, c4), instance.p_max)


def classify_belief(belief: np.ndarray, delta: float) -> int | None:
    """Index of the type the belief is (delta, m)-concentrated at, or None
    when it is unconcentrated. Requires ``delta < 0.5`` for uniqueness."""
    m = int(np.argmax(belief))
    return m if belief[m] >= 1.0 - delta else None


def first_action(instance: Instance, belief: np.ndarray, epsilon: float) -> int:
    return solve_bnb(instance, epsilon, belief=belief).first_action


def first_action_bounds(
    instance: Instance, belief: np.ndarray, epsilon: float
) -> tuple[np.ndarray, np.ndarray]:
    """Certified lower/upper bounds on ``p_k(b) * (1 + V*(tau(b, k)))`` for
    every category ``k``: the optimal value when the first move is fixed."""
    b = as_belief(instance, belief)
    lo = np.zeros(instance.n_categories)
    hi = np.zeros(instance.n_categories)
    for k in range(instance.n_categories):
        p = float(b @ instance.P[k])
        if p <= 0:
            continue
        res = solve_bnb(instance, epsilon, belief=bayes_update(instance, b, k))
        lo[k] = p * (1.0 + res.value)
        hi[k] = p * (1.0 + res.upper_certificate)
    return lo, hi


def first_action_margin(instance: Instance, belief: np.ndarray, epsilon: float) -> tuple[int, float]:
    """Certified optimal first action and how far it beats every other
    action's upper bound (negative when the argmax is not certified)."""
    lo, hi = first_action_bounds(instance, belief, epsilon)
    best = int(np.argmax(lo))
    others = np.delete(hi, best)
    margin = float(lo[best] - others.max()) if len(others) else math.inf
    return best, margin


def has_clear_first_action(
    instance: Instance, belief: np.ndarray, epsilon: float = 1e-9, margin: float = 1e-6
) -> bool:
    """True when branch-and-bound at ``epsilon`` certifies the optimal first
    action at ``belief`` with at least ``margin`` to spare, so that its
    first action is the exact argmax."""
    return first_action_margin(instance, belief, epsilon)[1] > margin


# --------------------------------------------------------------------------
# Convergence of the optimal walk
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceReport:
    converged: bool
    T: int  # 1-based round from which the recommendation stays fixed
    final_category: int
    final_type: int
    unconcentrated_count: int
    theoretical_H: int | None
    actions: tuple[int, ...]
    beliefs: np.ndarray  # beliefs at rounds 1..len(actions)
    delta: float


def limit_type(instance: Instance, belief: np.ndarray, category: int) -> int:
    """Vertex that repeated likes on ``category`` drive ``belief`` towards
    (ties resolved by current mass)."""
    support = belief > 0
    row = np.where(support, instance.P[category], -np.inf)
    top = row == row.max()
    return int(np.argmax(np.where(top, belief, -np.inf)))


def detect_convergence(
    instance: Instance,
    epsilon: float,
    max_rounds: int = 500,
    *,
    window: int = STABILITY_WINDOW,
    delta: float | None = None,
    start: np.ndarray | None = None,
) -> ConvergenceReport:
    """Follow the epsilon-optimal policy, re-solved at every belief of its
    own walk, until the recommendation has been the same for ``window``
    consecutive rounds.

    ``T`` is the first round of that final run. Raises
    NotConvergedWithinBudget if no such run appears within ``max_rounds``.
    """
    consts = compute_constants(instance)
    delta = consts.delta if delta is None else delta
    b = as_belief(instance, start)
    actions: list[int] = []
    beliefs: list[np.ndarray] = []
    run_start = 0
    for t in range(max_rounds):
        a = first_action(instance, b, epsilon)
        if actions and a != actions[-1]:
            run_start = t
        actions.append(a)
        beliefs.append(b)
        if t + 1 - run_start >= window:
            break
        b = bayes_update(instance, b, a)
    else:
        raise NotConvergedWithinBudget(
            f"recommendation not stable for {window} rounds within {max_rounds} rounds"
        )
    B = np.array(beliefs)
    unconcentrated = int(np.sum(B.max(axis=1) < 1.0 - delta))
    final = actions[-1]
    return ConvergenceReport(
        converged=True,
        T=run_start + 1,
        final_category=final,
        final_type=limit_type(instance, beliefs[-1], final),
        unconcentrated_count=unconcentrated,
        theoretical_H=consts.max_unconcentrated(delta) if delta > 0 else None,
        actions=tuple(actions),
        beliefs=B,
        delta=delta,
    )


@dataclass(frozen=True)
class UncertaintyCurve:
    distances: np.ndarray  # ||b_t - e_{m*}||_1 for t = 1..rounds
    actions: tuple[int, ...]
    beliefs: np.ndarray
    terminal_type: int
    report: ConvergenceReport


def uncertainty_curve(
    instance: Instance,
    epsilon: float,
    rounds: int,
    *,
    max_rounds: int = 500,
    window: int = STABILITY_WINDOW,
) -> UncertaintyCurve:
    """l1 distance between the optimal walk's beliefs and the vertex it
    converges to.

    The walk uses the re-solved actions up to the point where convergence
    was declared and the converged category afterwards.
    """
    report = detect_convergence(instance, epsilon, max_rounds, window=window)
    actions = list(report.actions[:rounds])
    beliefs = list(report.beliefs[:rounds])
    b = report.beliefs[-1]
    if len(actions) < rounds:
        b = bayes_update(instance, b, report.actions[-1])
    while len(actions) < rounds:
        actions.append(report.final_category)
        beliefs.append(b)
        b = bayes_update(instance, b, report.final_category)
    B = np.array(beliefs)
    vertex = instance.vertex(report.final_type)
    return UncertaintyCurve(
        np.abs(B - vertex).sum(axis=1), tuple(actions), B, report.final_type, report
    )


def write_curve_csv(path: str | os.PathLike, instance: Instance, curve: UncertaintyCurve) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "l1_uncertainty", "chosen_category", *(f"b_{t}" for t in instance.types)])
        for t, (d, a, b) in enumerate(zip(curve.distances, curve.actions, curve.beliefs), start=1):
            w.writerow([t, repr(float(d)), instance.categories[a], *(repr(float(x)) for x in b)])


@dataclass(frozen=True)
class ExponentialFit:
    amplitude: float
    rate: float
    r2: float  # on the original scale
    r2_log: float  # of the straight-line fit to log(series)


def _r2(y: np.ndarray, fitted: np.ndarray) -> float:
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def fit_exponential(series: Sequence[float]) -> ExponentialFit:
    """Least-squares fit of ``a * exp(-r * t)`` for ``t = 1, 2, ...``."""
    y = np.asarray(series, dtype=float)
    t = np.arange(1, len(y) + 1, dtype=float)
    positive = y > 0
    slope, intercept = np.polyfit(t[positive], np.log(y[positive]), 1)
    r2_log = _r2(np.log(y[positive]), intercept + slope * t[positive])
    (a, r), _ = curve_fit(
        lambda x, a, r: a * np.exp(-r * x), t, y, p0=(math.exp(intercept), -slope), maxfev=10000
    )
    return ExponentialFit(float(a), float(r), _r2(y, a * np.exp(-r * t)), r2_log)


# --------------------------------------------------------------------------
# Theorem checks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GapCheck:
    measured_gap: float
    theoretical_gap: float
    action: int
    holds: bool


def verify_gap_theorem(
    instance: Instance, belief: np.ndarray, epsilon: float, delta: float | None = None
) -> GapCheck:
    """Compare the optimal value's increase along one optimal step with the
    guaranteed minimum ``delta (1 - delta) c^2 / (1 - c)``.

    The belief must put at most ``1 - delta`` mass on every type. Both
    optimal values come from branch-and-bound at precision ``epsilon``, so
    the check allows ``2 * epsilon`` of slack.
    """
    consts = compute_constants(instance)
    if consts.c <= 0:
        raise PreconditionError("value-gap bound needs c > 0")
    delta = consts.delta if delta is None else delta
    b = as_belief(instance, belief)
    if b.max() > 1.0 - delta + 1e-12:
        raise PreconditionError(f"belief is not {delta}-unconcentrated")
    here = solve_bnb(instance, epsilon, belief=b)
    a = here.first_action
    there = solve_bnb(instance, epsilon, belief=bayes_update(instance, b, a))
    measured = there.value - here.value
    theoretical = consts.gap_lower_bound(delta)
    return GapCheck(measured, theoretical, a, measured >= theoretical - 2 * epsilon)


def favourite_category(instance: Instance, m: int) -> int:
    return int(np.argmax(instance.P[:, m]))


def check_myopic_near_vertex(instance: Instance, belief: np.ndarray, epsilon: float) -> bool:
    """At a (c^2/4, m)-concentrated belief the optimal first action is the
    favourite category of ``m``."""
    consts = compute_constants(instance)
    m = classify_belief(belief, consts.delta)
    if consts.c <= 0 or m is None:
        raise PreconditionError("belief must be (c^2/4, m)-concentrated with c > 0")
    return first_action(instance, belief, epsilon) == favourite_category(instance, m)


def check_no_concentrated_jump(instance: Instance, belief: np.ndarray, epsilon: float) -> bool:
    """One optimal step from a (c^2/4, m)-concentrated belief never lands on
    a belief concentrated at another type."""
    consts = compute_constants(instance)
    m = classify_belief(belief, consts.delta)
    if consts.c <= 0 or m is None:
        raise PreconditionError("belief must be (c^2/4, m)-concentrated with c > 0")
    nxt = bayes_update(instance, belief, first_action(instance, belief, epsilon))
    m2 = classify_belief(nxt, consts.delta)
    return m2 is None or m2 == m


def check_lipschitz(
    instance: Instance, b1: np.ndarray, b2: np.ndarray, epsilon: float
) -> tuple[float, float]:
    """Return (|V*(b1) - V*(b2)|, ||b1 - b2||_1 (1-c)/c + 2 eps)."""
    consts = compute_constants(instance)
    v1 = solve_bnb(instance, epsilon, belief=b1).value
    v2 = solve_bnb(instance, epsilon, belief=b2).value
    return abs(v1 - v2), float(np.abs(b1 - b2).sum()) * consts.lipschitz_constant + 2 * epsilon
