"""From a user-item ratings table to an instance.

Users are grouped into types and items into categories, either by supplied
assignment files or by alternating k-means co-clustering. ``P(k, m)`` is the
mean rating between item cluster ``k`` and user cluster ``m`` divided by the
maximum rating, and ``q(m)`` is the share of users in cluster ``m``.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import EmptyClusterError, InstanceFormatError, UnknownIdError
from .model import Instance
from .rng import CounterRNG

MODES = ("external-assignments", "alternating-kmeans")
CLIP_LOW, CLIP_HIGH = 0.01, 0.99
MAX_ITERATIONS = 100


@dataclass(frozen=True, eq=False)
class RatingsTable:
    users: np.ndarray  # index into user_ids, one per rating
    items: np.ndarray  # index into item_ids, one per rating
    ratings: np.ndarray
    user_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    rating_max: float = 5.0

    @classmethod
    def from_triplets(
        cls, triplets: Sequence[tuple[object, object, float]], rating_max: float = 5.0
    ) -> "RatingsTable":
        if not triplets:
            raise InstanceFormatError("ratings table is empty")
        u_raw = [str(t[0]) for t in triplets]
        i_raw = [str(t[1]) for t in triplets]
        ratings = np.array([float(t[2]) for t in triplets])
        if not np.all(np.isfinite(ratings)) or ratings.min() < 1.0 or ratings.max() > rating_max:
            raise InstanceFormatError(f"ratings must lie in [1, {rating_max}]")
        user_ids, users = np.unique(u_raw, return_inverse=True)
        item_ids, items = np.unique(i_raw, return_inverse=True)
        return cls(
            users.astype(np.int64),
            items.astype(np.int64),
            ratings,
            tuple(str(u) for u in user_ids),
            tuple(str(i) for i in item_ids),
            float(rating_max),
        )

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)


def read_ratings_csv(path: str | os.PathLike, rating_max: float = 5.0) -> RatingsTable:
    """CSV with header ``user_id,item_id,rating``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"user_id", "item_id", "rating"} <= set(reader.fieldnames):
            raise InstanceFormatError("ratings CSV needs header user_id,item_id,rating")
        try:
            rows = [(r["user_id"], r["item_id"], float(r["rating"])) for r in reader]
        except ValueError as exc:
            raise InstanceFormatError(f"bad rating value: {exc}") from None
    return RatingsTable.from_triplets(rows, rating_max)


def read_assignment_csv(path: str | os.PathLike, id_column: str) -> dict[str, str]:
    """CSV with header ``<id_column>,cluster``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {id_column, "cluster"} <= set(reader.fieldnames):
            raise InstanceFormatError(f"assignment CSV needs header {id_column},cluster")
        return {r[id_column]: r["cluster"] for r in reader}


@dataclass(frozen=True)
class CoClustering:
    user_labels: np.ndarray
    item_labels: np.ndarray
    objective: tuple[float, ...]  # after initialization and after each iteration
    iterations: int


def _block_sums(table: RatingsTable, ul: np.ndarray, il: np.ndarray, nu: int, ni: int):
    cell = ul[table.users] * ni + il[table.items]
    sums = np.bincount(cell, weights=table.ratings, minlength=nu * ni).reshape(nu, ni)
    counts = np.bincount(cell, minlength=nu * ni).reshape(nu, ni)
    return sums, counts


def _block_means(table, ul, il, nu, ni) -> np.ndarray:
    sums, counts = _block_sums(table, ul, il, nu, ni)
    fill = table.ratings.mean()
    return np.where(counts > 0, sums / np.maximum(counts, 1), fill)


def _objective(table, ul, il, mu) -> float:
    return float(np.sum((table.ratings - mu[ul[table.users], il[table.items]]) ** 2))


def _reassign(owner, other_labels, ratings, n_owner, n_groups, n_other, mu) -> np.ndarray:
    """Best group for every row given fixed block means ``mu`` (groups x other)."""
    S = np.zeros((n_owner, n_other))
    N = np.zeros((n_owner, n_other))
    np.add.at(S, (owner, other_labels), ratings)
    np.add.at(N, (owner, other_labels), 1.0)
    cost = N @ (mu**2).T - 2.0 * S @ mu.T
    return cost.argmin(axis=1)


def _fill_empty(labels, n_groups, owner, other_labels, ratings, mu_rows) -> np.ndarray:
    """Give every empty group the row that is currently fitted worst."""
    labels = labels.copy()
    for g in range(n_groups):
        counts = np.bincount(labels, minlength=n_groups)
        if counts[g]:
            continue
        resid = (ratings - mu_rows[labels[owner], other_labels]) ** 2
        per_row = np.bincount(owner, weights=resid, minlength=len(labels))
        per_row[counts[labels] <= 1] = -np.inf  # never empty another group
        labels[int(np.argmax(per_row))] = g
    return labels


def _initial_labels(n: int, groups: int, rng: CounterRNG) -> np.ndarray:
    labels = np.empty(n, dtype=np.int64)
    labels[np.argsort(rng.uniform(n), kind="stable")] = np.arange(n) % groups
    return labels


def alternating_kmeans(
    table: RatingsTable, n_user_clusters: int, n_item_clusters: int, seed: int = 0,
    max_iterations: int = MAX_ITERATIONS,
) -> CoClustering:
    """Co-cluster users and items by alternating block k-means.

    The objective is the squared error of the observed ratings against
    their block means. Reassigning rows to their best block row, and
    recomputing the means, can only lower it, so it never increases.
    """
    nu, ni = n_user_clusters, n_item_clusters
    if nu < 1 or ni < 1:
        raise ValueError("cluster counts must be positive")
    if nu > table.n_users or ni > table.n_items:
        raise EmptyClusterError("more clusters requested than users or items")
    rng = CounterRNG(seed)
    ul = _initial_labels(table.n_users, nu, rng)
    il = _initial_labels(table.n_items, ni, rng)
    mu = _block_means(table, ul, il, nu, ni)
    history = [_objective(table, ul, il, mu)]
    it = 0
    for it in range(1, max_iterations + 1):
        new_ul = _reassign(table.users, il[table.items], table.ratings, table.n_users, nu, ni, mu)
        new_ul = _fill_empty(new_ul, nu, table.users, il[table.items], table.ratings, mu)
        mu = _block_means(table, new_ul, il, nu, ni)
        new_il = _reassign(table.items, new_ul[table.users], table.ratings, table.n_items, ni, nu, mu.T)
        new_il = _fill_empty(new_il, ni, table.items, new_ul[table.users], table.ratings, mu.T)
        mu = _block_means(table, new_ul, new_il, nu, ni)
        history.append(_objective(table, new_ul, new_il, mu))
        changed = not (np.array_equal(new_ul, ul) and np.array_equal(new_il, il))
        ul, il = new_ul, new_il
        if not changed:
            break
    return CoClustering(ul, il, tuple(history), it)


def _labels_from_assignment(
    ids: Sequence[str], assignment: Mapping[str, str], what: str
) -> tuple[np.ndarray, tuple[str, ...]]:
    known = set(ids)
    unknown = sorted(set(assignment) - known)
    if unknown:
        raise UnknownIdError(f"unknown {what} id(s) in assignment: {', '.join(unknown[:5])}")
    missing = [i for i in ids if i not in assignment]
    if missing:
        raise UnknownIdError(f"{what} id(s) without a cluster: {', '.join(missing[:5])}")

    def order(label: str):
        return (0, int(label), "") if label.lstrip("-").isdigit() else (1, 0, label)

    names = tuple(sorted(set(assignment.values()), key=order))
    index = {n: j for j, n in enumerate(names)}
    return np.array([index[assignment[i]] for i in ids], dtype=np.int64), names


@dataclass(frozen=True)
class IngestResult:
    instance: Instance
    imputed_cells: tuple[tuple[str, str], ...]  # (category, type) pairs with no ratings
    metadata: dict = field(default_factory=dict)


def ingest_ratings(
    table: RatingsTable,
    n_user_clusters: int | None = None,
    n_item_clusters: int | None = None,
    mode: str = "alternating-kmeans",
    noise_std: float = 0.0,
    seed: int = 0,
    *,
    user_assignment: Mapping[str, str] | None = None,
    item_assignment: Mapping[str, str] | None = None,
) -> IngestResult:
    """Aggregate a ratings table into an instance.

    Cluster pairs without any rating get the global mean rating ratio and
    are listed in ``imputed_cells``. With ``noise_std > 0`` every entry is
    perturbed by seeded Gaussian noise. Entries are finally clipped to
    [0.01, 0.99].
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    meta: dict = {"mode": mode, "noise_std": noise_std, "seed": seed}
    if mode == "external-assignments":
        if user_assignment is None or item_assignment is None:
            raise ValueError("external-assignments mode needs user and item assignments")
        ul, type_names = _labels_from_assignment(table.user_ids, user_assignment, "user")
        il, cat_names = _labels_from_assignment(table.item_ids, item_assignment, "item")
        for n, names, what in ((n_user_clusters, type_names, "user"), (n_item_clusters, cat_names, "item")):
            if n is not None and n != len(names):
                raise EmptyClusterError(f"{n} {what} clusters requested but assignment has {len(names)}")
    else:
        if n_user_clusters is None or n_item_clusters is None:
            raise ValueError("alternating-kmeans mode needs both cluster counts")
        co = alternating_kmeans(table, n_user_clusters, n_item_clusters, seed)
        ul, il = co.user_labels, co.item_labels
        type_names = tuple(f"m{j + 1}" for j in range(n_user_clusters))
        cat_names = tuple(f"k{j + 1}" for j in range(n_item_clusters))
        meta["objective"] = list(co.objective)
        meta["iterations"] = co.iterations
    nu, ni = len(type_names), len(cat_names)

    sums, counts = _block_sums(table, ul, il, nu, ni)  # user cluster x item cluster
    global_ratio = float(table.ratings.mean() / table.rating_max)
    P = np.where(counts > 0, sums / np.maximum(counts, 1) / table.rating_max, global_ratio).T
    if noise_std > 0:
        P = P + CounterRNG(seed, 1).normal(P.shape, scale=noise_std)
    P = np.clip(P, CLIP_LOW, CLIP_HIGH)

    sizes = np.bincount(ul, minlength=nu)
    if np.any(sizes == 0) or np.any(np.bincount(il, minlength=ni) == 0):
        raise EmptyClusterError("a user or item cluster is empty")
    q = sizes / sizes.sum()
    imputed = tuple((cat_names[k], type_names[m]) for m, k in zip(*np.nonzero(counts == 0)))
    meta["imputed_cells"] = [list(c) for c in imputed]
    meta["imputed_value"] = global_ratio
    return IngestResult(Instance(cat_names, type_names, P, q), imputed, meta)
