import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from creepuq.metrics import (METRIC_ORDER, EvaluationReport, MetricError, composite_metric, coverage, evaluate, mae,
                             mean_interval_width, pcc, r_squared, rmse)
from creepuq.predictive import PredictiveDistribution, aggregate_draws

from oracles import brute_pcc, brute_r2


class TestAccuracy:
    def test_pcc_examples(self):
        y = np.array([1.0, 2.0, 3.0])
        assert pcc(y, 2 * y) == pytest.approx(1.0)
        assert pcc(y, -y) == pytest.approx(-1.0)
        assert pcc(y, [1.0, 2.0, 4.0]) == pytest.approx(0.9820, abs=1e-4)

    def test_pcc_constant_rejected(self):
        with pytest.raises(MetricError):
            pcc([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_r2_examples(self):
        y = np.array([1.0, 2.0, 3.0])
        assert r_squared(y, y) == 1.0
        assert r_squared(y, np.full(3, 2.0)) == 0.0
        assert r_squared(y, [1.0, 2.0, 4.0]) == pytest.approx(0.5)

    def test_rmse_mae_examples(self):
        assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5))
        assert mae([0.0, 0.0], [3.0, 4.0]) == 3.5
        assert rmse([1.0, 2.0], [2.0, 3.0]) == mae([1.0, 2.0], [2.0, 3.0]) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(MetricError):
            rmse([1.0], [1.0, 2.0])

    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 10), st.floats(-5, 5))
    def test_pcc_affine_invariance(self, seed, a, b):
        rng = np.random.default_rng(seed)
        y, p = rng.normal(size=20), rng.normal(size=20)
        assert abs(pcc(a * y + b, p) - pcc(y, p)) < 1e-12
        assert abs(pcc(y, a * p + b) - pcc(y, p)) < 1e-12

    def test_rmse_at_least_mae(self, rng):
        for _ in range(1000):
            n = rng.integers(1, 30)
            y, p = rng.normal(size=n), rng.normal(size=n) * rng.uniform(0.1, 5)
            assert rmse(y, p) >= mae(y, p) - 1e-15

    def test_r2_equals_pcc_squared_for_least_squares_fit(self, rng):
        x = rng.normal(size=40)
        y = 3 * x + rng.normal(size=40)
        slope = np.sum((x - x.mean()) * (y - y.mean())) / np.sum((x - x.mean()) ** 2)
        fit = y.mean() + slope * (x - x.mean())
        assert r_squared(y, fit) == pytest.approx(pcc(y, fit) ** 2, abs=1e-12)

    def test_brute_force_agreement(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 25))
            y, p = rng.normal(size=n), rng.normal(size=n)
            assert abs(pcc(y, p) - brute_pcc(y, p)) < 1e-12
            assert abs(r_squared(y, p) - brute_r2(y, p)) < 1e-12


class TestUq:
    def test_coverage_examples(self):
        iv = [(0.0, 1.0)] * 4
        assert coverage([0.5] * 4, iv) == 1.0
        assert coverage([2.0] * 4, iv) == 0.0
        assert coverage([0.0, 1.0, 0.5, 3.0], iv) == 0.75

    def test_inverted_interval(self):
        with pytest.raises(MetricError):
            coverage([0.0], [(1.0, 0.0)])
        with pytest.raises(MetricError):
            mean_interval_width([(1.0, 0.0)])

    def test_width_examples(self):
        assert mean_interval_width([(0.0, 0.0), (1.0, 1.0)]) == 0.0
        assert mean_interval_width([(0.0, 1.0), (0.0, 3.0)]) == 2.0
        assert mean_interval_width([(-1.0, 1.0)]) == 2.0

    def test_composite_examples(self):
        assert composite_metric(1.0, 1.0) == 1.0
        assert composite_metric(0.9433, 0.39) == pytest.approx(1.3485, abs=1e-4)
        assert composite_metric(0.0, 1e12) == pytest.approx(0.0, abs=1e-12)
        assert composite_metric(0.5, 0.0) is None

    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 3), st.floats(0.0, 2))
    def test_coverage_monotone_in_z(self, seed, z, extra):
        rng = np.random.default_rng(seed)
        y, m, s = rng.normal(size=30), rng.normal(size=30), rng.uniform(0, 1, 30)
        narrow = PredictiveDistribution(m, s, z=z).intervals()
        wide = PredictiveDistribution(m, s, z=z + extra).intervals()
        assert coverage(y, wide) >= coverage(y, narrow)


class TestAggregation:
    def test_population_sd(self):
        pd = aggregate_draws(np.array([[1.0], [2.0], [3.0]]))
        assert pd.mean[0] == 2.0
        assert pd.std[0] == pytest.approx(math.sqrt(2 / 3))

    def test_two_draws(self):
        pd = aggregate_draws(np.array([[1.0], [3.0]]))
        assert (pd.mean[0], pd.std[0]) == (2.0, 1.0)

    def test_needs_two_draws(self):
        with pytest.raises(ValueError):
            aggregate_draws(np.array([[1.0]]))

    def test_interval_ordering_enforced(self):
        with pytest.raises(ValueError):
            PredictiveDistribution(np.array([1.0]), np.array([0.1]), lower=np.array([1.5]), upper=np.array([2.0]))


class TestReport:
    def test_summary_is_mean_and_sample_sd(self, rng):
        report = EvaluationReport("gpr", "synthetic", "abc")
        folds = []
        for _ in range(5):
            y, p = rng.normal(size=20), rng.normal(size=20)
            m = evaluate(y, PredictiveDistribution(p, np.full(20, 0.5)))
            report.add_fold(m)
            folds.append(m)
        summary = report.summary()
        for name in METRIC_ORDER:
            vals = [f[name] for f in folds]
            assert summary[name]["mean"] == pytest.approx(sum(vals) / 5, abs=1e-15)
            assert summary[name]["sd"] == pytest.approx(np.std(vals, ddof=1), abs=1e-15)
            assert summary[name]["count"] == 5

    def test_point_predictor_has_no_uq(self, rng):
        report = EvaluationReport("nn", "synthetic", "abc")
        report.add_fold(evaluate(rng.normal(size=5), PredictiveDistribution(rng.normal(size=5))))
        assert report.metric_names() == ["pcc", "r2", "rmse", "mae"]
        assert "coverage" not in report.to_dict()["summary"]
