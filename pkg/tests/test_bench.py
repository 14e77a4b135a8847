import numpy as np
import pytest

from recapc.bench import (
    CSV_HEADER,
    BenchReport,
    BenchRow,
    bench_run,
    bootstrap_mean_ci,
    read_bench_csv,
    write_bench_csv,
)
from recapc.instances import uniform_instance
from recapc.solvers import solve_bnb


class TestBootstrap:
    def test_constant_sample(self):
        assert bootstrap_mean_ci([2.5] * 20) == (2.5, 2.5)

    def test_single_value(self):
        assert bootstrap_mean_ci([1.0]) == (1.0, 1.0)

    def test_contains_mean(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = rng.exponential(size=30)
            low, high = bootstrap_mean_ci(x, 200)
            assert low <= x.mean() <= high
            assert high - low > 0

    def test_width_close_to_normal_interval(self):
        x = np.random.default_rng(1).normal(10, 2, size=400)
        low, high = bootstrap_mean_ci(x, 2000, seed=3)
        expected = 2 * 1.96 * x.std(ddof=1) / np.sqrt(len(x))
        assert high - low == pytest.approx(expected, rel=0.15)

    def test_seeded(self):
        x = [1.0, 2.0, 4.0, 8.0, 3.0]
        assert bootstrap_mean_ci(x, 500, seed=7) == bootstrap_mean_ci(x, 500, seed=7)


class TestBenchRun:
    def test_smoke(self):
        report = bench_run([(3, 10)], 5, 1e-6, bootstrap_resamples=200)
        assert len(report.rows) == 1
        row = report.row(3, 10)
        assert row.reps == 5
        assert row.ci95_low <= row.mean_runtime <= row.ci95_high
        assert row.mean_nodes >= 0
        assert report.epsilon == 1e-6

    def test_node_counts_deterministic(self):
        a = bench_run([(2, 3), (3, 2)], 4, 1e-4, bootstrap_resamples=100, seed=5)
        b = bench_run([(2, 3), (3, 2)], 4, 1e-4, bootstrap_resamples=100, seed=5)
        assert [r.mean_nodes for r in a.rows] == [r.mean_nodes for r in b.rows]

    def test_missing_row(self):
        with pytest.raises(KeyError):
            bench_run([(2, 2)], 1, 1e-3, bootstrap_resamples=100).row(3, 3)

    @pytest.mark.parametrize("kwargs", [dict(reps=0), dict(reps=2, bootstrap_resamples=50)])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            bench_run([(2, 2)], epsilon=1e-3, **kwargs)


class TestBenchCsv:
    def test_round_trip(self, tmp_path):
        report = bench_run([(2, 2), (2, 4)], 3, 1e-4, bootstrap_resamples=100)
        path = tmp_path / "bench.csv"
        write_bench_csv(path, report)
        assert path.read_text().splitlines()[0] == ",".join(CSV_HEADER)
        back = read_bench_csv(path, 1e-4)
        assert back == report

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bench.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_bench_csv(path)

    def test_row_invariants(self):
        with pytest.raises(ValueError):
            BenchRow(2, 2, 0, 1.0, 0.5, 1.5, 3.0)
        with pytest.raises(ValueError):
            BenchRow(2, 2, 5, 1.0, 1.2, 1.5, 3.0)

    def test_report_lookup(self):
        row = BenchRow(2, 3, 5, 1.0, 0.5, 1.5, 3.0)
        assert BenchReport((row,), 1e-6).row(2, 3) is row


class TestBranchingTrend:
    """Node counts depend only on the instances, so this trend check is
    deterministic. Uniform entries keep p_max from shrinking as categories
    are added, which isolates the effect of the branching factor."""

    def test_nodes_grow_with_categories(self):
        medians = []
        for n_categories in (2, 4, 6, 8):
            nodes = [
                solve_bnb(uniform_instance(n_categories, 3, 1000 * n_categories + s), 1e-6).nodes_expanded
                for s in range(100)
            ]
            medians.append(np.median(nodes))
        assert all(a < b for a, b in zip(medians, medians[1:])), medians
