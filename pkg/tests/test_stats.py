import json

import numpy as np
import pytest

from embkit.errors import ConfigError, ParseError
from embkit.stats import (
    BootstrapResult,
    bootstrap_ci_diff,
    load_metric_values,
    percentile,
    read_metric_file,
    values_from_runs,
)


class TestPercentile:
    def test_hand_cases(self):
        data = [1.0, 2.0, 3.0, 4.0]
        assert percentile(data, 0.0) == 1.0
        assert percentile(data, 1.0) == 4.0
        assert percentile(data, 0.5) == 2.5
        # h = 0.25*3 = 0.75 -> 1 + 0.75*(2-1)
        assert percentile(data, 0.25) == 1.75

    def test_single_value(self):
        assert percentile([7.0], 0.3) == 7.0

    def test_unsorted_input(self):
        assert percentile([4, 1, 3, 2], 0.5) == 2.5

    @pytest.mark.parametrize("seed", range(5))
    def test_numpy_linear_oracle(self, seed):
        rng = np.random.default_rng(seed)
        data = rng.normal(size=int(rng.integers(2, 200)))
        for q in (0.01, 0.025, 0.5, 0.975, 0.99):
            assert percentile(data, q) == pytest.approx(
                np.quantile(data, q, method="linear"), abs=1e-12
            )

    def test_validation(self):
        with pytest.raises(ConfigError):
            percentile([], 0.5)
        with pytest.raises(ConfigError):
            percentile([1.0], 1.5)


class TestBootstrap:
    def test_deterministic(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(1, 1, 30), rng.normal(0, 1, 30)
        r1 = bootstrap_ci_diff(a, b, resamples=2000, seed=42)
        r2 = bootstrap_ci_diff(a, b, resamples=2000, seed=42)
        assert (r1.lo, r1.hi) == (r2.lo, r2.hi)

    def test_seed_changes_interval(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(1, 1, 30), rng.normal(0, 1, 30)
        r1 = bootstrap_ci_diff(a, b, resamples=2000, seed=1)
        r2 = bootstrap_ci_diff(a, b, resamples=2000, seed=2)
        assert (r1.lo, r1.hi) != (r2.lo, r2.hi)

    def test_zero_variance_collapses(self):
        r = bootstrap_ci_diff([2.0, 2.0, 2.0], [2.0, 2.0], resamples=500)
        assert (r.lo, r.hi) == (0.0, 0.0)
        assert r.contains_zero
        assert not r.significant

    def test_constant_offset(self):
        r = bootstrap_ci_diff([3.0, 3.0, 3.0], [1.0, 1.0], resamples=500)
        assert (r.lo, r.hi) == (2.0, 2.0)
        assert r.significant
        assert r.point_estimate == 2.0

    def test_shift_invariance(self):
        # resampling indices depend only on sizes and seed, so shifting a
        # shifts the whole interval by exactly the same amount
        rng = np.random.default_rng(3)
        a, b = rng.normal(0, 1, 25), rng.normal(0, 1, 40)
        base = bootstrap_ci_diff(a, b, resamples=3000, seed=7)
        shifted = bootstrap_ci_diff(a + 10.0, b, resamples=3000, seed=7)
        assert shifted.lo == pytest.approx(base.lo + 10.0, abs=1e-9)
        assert shifted.hi == pytest.approx(base.hi + 10.0, abs=1e-9)

    def test_point_estimate(self):
        r = bootstrap_ci_diff([1.0, 2.0, 3.0], [1.0, 1.0], resamples=100)
        assert r.point_estimate == pytest.approx(1.0)

    def test_clear_difference_significant(self):
        rng = np.random.default_rng(1)
        a = rng.normal(5.0, 0.5, 40)
        b = rng.normal(0.0, 0.5, 40)
        r = bootstrap_ci_diff(a, b, resamples=4000, seed=0)
        assert r.significant
        assert r.lo > 0
        assert "unlikely due to chance" in r.interpretation

    def test_no_difference_not_significant(self):
        rng = np.random.default_rng(2)
        pool = rng.normal(0.0, 1.0, 80)
        r = bootstrap_ci_diff(pool[:40], pool[40:], resamples=4000, seed=0)
        assert not r.significant
        assert "consistent with chance" in r.interpretation

    def test_significant_iff_excludes_zero(self):
        for lo, hi in [(-1.0, 1.0), (0.1, 0.5), (-0.5, -0.1), (0.0, 0.5)]:
            r = BootstrapResult(
                lo=lo, hi=hi, alpha=0.05, resamples=1,
                point_estimate=0.0, contains_zero=lo <= 0.0 <= hi,
            )
            assert r.significant == (not (lo <= 0.0 <= hi))

    def test_chunk_boundary_consistent(self):
        # crossing the 65536 chunk size must not disturb determinism
        rng = np.random.default_rng(4)
        a, b = rng.normal(0, 1, 10), rng.normal(0, 1, 10)
        r1 = bootstrap_ci_diff(a, b, resamples=70_000, seed=5)
        r2 = bootstrap_ci_diff(a, b, resamples=70_000, seed=5)
        assert (r1.lo, r1.hi) == (r2.lo, r2.hi)

    def test_interval_roughly_correct(self):
        # difference of independent N(mu,1) means, analytic CI half-width
        # 1.96*sqrt(2/n); the bootstrap interval should land near it
        rng = np.random.default_rng(6)
        n = 200
        a = rng.normal(1.0, 1.0, n)
        b = rng.normal(0.0, 1.0, n)
        r = bootstrap_ci_diff(a, b, resamples=20_000, seed=0)
        width = r.hi - r.lo
        expected = 2 * 1.96 * np.sqrt(2.0 / n)
        assert width == pytest.approx(expected, rel=0.15)
        assert r.lo < r.point_estimate < r.hi

    def test_validation(self):
        with pytest.raises(ConfigError):
            bootstrap_ci_diff([1.0], [1.0, 2.0])
        with pytest.raises(ConfigError):
            bootstrap_ci_diff([1.0, 2.0], [1.0, 2.0], alpha=0.0)
        with pytest.raises(ConfigError):
            bootstrap_ci_diff([1.0, 2.0], [1.0, 2.0], resamples=0)
        with pytest.raises(ConfigError):
            bootstrap_ci_diff([1.0, np.nan], [1.0, 2.0])

    def test_to_dict(self):
        r = bootstrap_ci_diff([1.0, 2.0], [0.0, 1.0], resamples=200)
        d = r.to_dict()
        assert set(d) == {
            "lo", "hi", "alpha", "resamples", "point_estimate",
            "contains_zero", "significant", "interpretation",
        }


class TestMetricFiles:
    def test_read_plain_values(self, tmp_path):
        p = tmp_path / "metrics.txt"
        p.write_text("0.81\n\n0.83\n0.79\n", encoding="utf-8")
        assert read_metric_file(p) == [0.81, 0.83, 0.79]

    def test_bad_value_line_number(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("0.81\nnot-a-number\n", encoding="utf-8")
        with pytest.raises(ParseError) as exc:
            read_metric_file(p)
        assert exc.value.line_no == 2

    def runs_payload(self):
        return {
            "runs": [
                {"run": 0, "dev": {"f1": 0.8}, "test": {"f1": 0.75, "precision": 0.7}},
                {"run": 1, "dev": {"f1": 0.82}, "test": {"f1": 0.77, "precision": 0.72}},
            ]
        }

    def test_values_from_runs(self, tmp_path):
        p = tmp_path / "runs.json"
        p.write_text(json.dumps(self.runs_payload()), encoding="utf-8")
        assert values_from_runs(p) == [0.75, 0.77]
        assert values_from_runs(p, metric="precision") == [0.7, 0.72]
        assert values_from_runs(p, split="dev") == [0.8, 0.82]

    def test_missing_metric(self, tmp_path):
        p = tmp_path / "runs.json"
        p.write_text(json.dumps(self.runs_payload()), encoding="utf-8")
        with pytest.raises(ConfigError):
            values_from_runs(p, metric="recall")

    def test_no_runs_array(self, tmp_path):
        p = tmp_path / "runs.json"
        p.write_text("{}", encoding="utf-8")
        with pytest.raises(ConfigError):
            values_from_runs(p)

    def test_loader_sniffs_format(self, tmp_path):
        plain = tmp_path / "a.txt"
        plain.write_text("1.0\n2.0\n", encoding="utf-8")
        runs = tmp_path / "b.json"
        runs.write_text(json.dumps(self.runs_payload()), encoding="utf-8")
        assert load_metric_values(plain) == [1.0, 2.0]
        assert load_metric_values(runs) == [0.75, 0.77]
