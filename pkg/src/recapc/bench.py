"""Runtime benchmark of branch-and-bound on generated instances, with
percentile-bootstrap confidence intervals on the mean runtime."""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .instances import GeneratorConfig, generate_batch
from .rng import derive_seed
from .solvers import solve_bnb

CSV_HEADER = (
    "n_types",
    "n_categories",
    "reps",
    "mean_runtime_ms",
    "ci95_low_ms",
    "ci95_high_ms",
    "mean_nodes",
)


@dataclass(frozen=True)
class BenchRow:
    n_types: int
    n_categories: int
    reps: int
    mean_runtime: float  # milliseconds
    ci95_low: float
    ci95_high: float
    mean_nodes: float

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if not self.ci95_low <= self.mean_runtime <= self.ci95_high:
            raise ValueError("confidence interval must contain the mean")


@dataclass(frozen=True)
class BenchReport:
    rows: tuple[BenchRow, ...]
    epsilon: float

    def row(self, n_types: int, n_categories: int) -> BenchRow:
        for r in self.rows:
            if (r.n_types, r.n_categories) == (n_types, n_categories):
                return r
        raise KeyError((n_types, n_categories))


def bootstrap_mean_ci(
    sample: Sequence[float], resamples: int = 1000, seed: int = 0, level: float = 0.95
) -> tuple[float, float]:
    """Percentile-bootstrap interval for the mean.

    A sample with fewer than two distinct values gets the zero-width
    interval at its mean. The interval is widened if needed so that it
    always contains the sample mean.
    """
    x = np.asarray(sample, dtype=float)
    mean = float(x.mean())
    if len(x) < 2 or np.ptp(x) == 0:
        return mean, mean
    res = stats.bootstrap(
        (x,),
        np.mean,
        n_resamples=resamples,
        confidence_level=level,
        method="percentile",
        rng=np.random.default_rng(seed),
    )
    ci = res.confidence_interval
    return min(float(ci.low), mean), max(float(ci.high), mean)


def bench_run(
    sizes: Iterable[tuple[int, int]],
    reps: int,
    epsilon: float,
    bootstrap_resamples: int = 1000,
    seed: int = 0,
    queue: str = "best",
) -> BenchReport:
    """Time ``solve_bnb`` on ``reps`` generated instances per
    ``(n_types, n_categories)`` size."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    if bootstrap_resamples < 100:
        raise ValueError("bootstrap_resamples must be at least 100")
    rows = []
    for j, (n_types, n_categories) in enumerate(sizes):
        config = GeneratorConfig(n_categories, n_types, seed=derive_seed(seed, j))
        times, nodes = [], []
        for inst in generate_batch(config, reps):
            t0 = time.perf_counter()
            res = solve_bnb(inst, epsilon, queue)
            times.append((time.perf_counter() - t0) * 1000.0)
            nodes.append(res.nodes_expanded)
        low, high = bootstrap_mean_ci(times, bootstrap_resamples, seed=derive_seed(seed, j))
        rows.append(
            BenchRow(n_types, n_categories, reps, float(np.mean(times)), low, high, float(np.mean(nodes)))
        )
    return BenchReport(tuple(rows), epsilon)


def write_bench_csv(path: str | os.PathLike, report: BenchReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in report.rows:
            w.writerow(
                [r.n_types, r.n_categories, r.reps, repr(r.mean_runtime), repr(r.ci95_low),
                 repr(r.ci95_high), repr(r.mean_nodes)]
            )


def read_bench_csv(path: str | os.PathLike, epsilon: float = float("nan")) -> BenchReport:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError("unexpected bench CSV header")
        rows = tuple(
            BenchRow(
                int(r["n_types"]),
                int(r["n_categories"]),
                int(r["reps"]),
                float(r["mean_runtime_ms"]),
                float(r["ci95_low_ms"]),
                float(r["ci95_high_ms"]),
                float(r["mean_nodes"]),
            )
            for r in reader
        )
    return BenchReport(rows, epsilon)
