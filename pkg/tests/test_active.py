import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from creepuq.active import (ActiveLearningError, ActiveLearningTrace, kmeans, run_al_loop,
                            select_batch_vr_kmeans)
from creepuq.data import apply_log10_target, generate_synthetic_creep, transform
from creepuq.metrics import r_squared
from creepuq.models import fit_model

GPR_FAST = {"hyper_search": {"grid_points": 3, "refine_rounds": 1}}


@pytest.fixture(scope="module")
def synthetic():
    return apply_log10_target(generate_synthetic_creep(120, 0.1, 0))


def blobs(rng, n=20):
    return np.vstack([rng.normal(0, 0.1, (n, 2)), rng.normal(10, 0.1, (n, 2))])


class TestKmeans:
    def test_one_cluster_per_point(self, rng):
        pts = rng.normal(size=(7, 3))
        res = kmeans(pts, 7, seed=0)
        assert res.inertia == 0.0
        assert len(set(res.labels.tolist())) == 7

    def test_separated_blobs(self, rng):
        pts = blobs(rng)
        res = kmeans(pts, 2, seed=1)
        assert len(set(res.labels[:20])) == 1 and len(set(res.labels[20:])) == 1
        assert res.labels[0] != res.labels[-1]
        for i, p in enumerate(pts):
            d = [sum((a - b) ** 2 for a, b in zip(p, c)) for c in res.centroids]
            assert res.labels[i] == d.index(min(d))

    def test_single_cluster_is_mean(self, rng):
        pts = rng.normal(size=(30, 4))
        np.testing.assert_allclose(kmeans(pts, 1, seed=0).centroids[0], pts.mean(axis=0), atol=1e-12)

    def test_deterministic(self, rng):
        pts = rng.normal(size=(50, 2))
        np.testing.assert_array_equal(kmeans(pts, 5, seed=3).labels, kmeans(pts, 5, seed=3).labels)

    def test_duplicate_points_still_fill_every_cluster(self):
        pts = np.vstack([np.zeros((5, 2)), np.ones((1, 2))])
        assert len(set(kmeans(pts, 3, seed=0).labels.tolist())) == 3

    def test_bad_k(self, rng):
        with pytest.raises(ActiveLearningError):
            kmeans(rng.normal(size=(3, 2)), 4, seed=0)
        with pytest.raises(ActiveLearningError):
            kmeans(rng.normal(size=(3, 2)), 0, seed=0)


class TestSelectBatch:
    def test_single_pick_is_global_argmax(self, rng):
        sigma = rng.uniform(size=25)
        assert select_batch_vr_kmeans(sigma, rng.normal(size=(25, 2)), 1, seed=0).tolist() == [int(sigma.argmax())]

    def test_one_argmax_per_blob(self, rng):
        pts = blobs(rng)
        sigma = rng.uniform(size=40)
        picks = select_batch_vr_kmeans(sigma, pts, 2, seed=0)
        assert picks.tolist() == [int(sigma[:20].argmax()), 20 + int(sigma[20:].argmax())]

    def test_ties_go_to_lowest_position(self, rng):
        pts = blobs(rng, 5)
        assert select_batch_vr_kmeans(np.ones(10), pts, 2, seed=0).tolist() == [0, 5]

    @settings(max_examples=30)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 8))
    def test_constant_sigma_is_pure_diversity(self, seed, B):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(30, 2))
        picks = select_batch_vr_kmeans(np.ones(30), pts, B, seed)
        labels = kmeans(pts, B, seed).labels
        assert len(set(picks.tolist())) == B
        assert len(set(labels[picks].tolist())) == B

    def test_needs_uncertainty(self, rng):
        with pytest.raises(ActiveLearningError):
            select_batch_vr_kmeans(None, rng.normal(size=(5, 2)), 2, seed=0)


class TestLoop:
    def test_budget_equal_to_initial(self, synthetic):
        trace = run_al_loop(synthetic, "gpr", "random", B=5, initial_size=10, label_budget=10,
                            model_options=GPR_FAST)
        assert len(trace.records) == 1
        assert trace.records[0].selected == ()

    def test_budget_below_initial(self, synthetic):
        with pytest.raises(ActiveLearningError):
            run_al_loop(synthetic, "gpr", "random", B=5, initial_size=10, label_budget=5)

    def test_initial_plus_batch_exceeds_pool(self, synthetic):
        with pytest.raises(ActiveLearningError):
            run_al_loop(synthetic, "gpr", "random", B=50, initial_size=50)

    def test_unknown_strategy(self, synthetic):
        with pytest.raises(ActiveLearningError):
            run_al_loop(synthetic, "gpr", "greedy", B=5)

    def test_point_model_cannot_drive_vr(self, synthetic):
        with pytest.raises(ActiveLearningError):
            run_al_loop(synthetic, "nn", "vr_kmeans", B=5, label_budget=15,
                        model_options={"hidden": [4], "training": {"epochs": 2}})

    def test_random_is_reproducible(self, synthetic):
        a = run_al_loop(synthetic, "gpr", "random", B=10, label_budget=50, seed=4, model_options=GPR_FAST)
        b = run_al_loop(synthetic, "gpr", "random", B=10, label_budget=50, seed=4, model_options=GPR_FAST)
        assert a.to_csv() == b.to_csv()

    @pytest.mark.parametrize("strategy", ["vr_kmeans", "random"])
    def test_partition_invariants(self, synthetic, strategy):
        states = []
        trace = run_al_loop(synthetic, "gpr", strategy, B=10, label_budget=55, seed=1, model_options=GPR_FAST,
                            on_iteration=states.append)
        n = synthetic.n_samples
        test = states[0].test
        for prev, cur in zip(states, states[1:]):
            assert cur.labeled.size - prev.labeled.size == min(10, 55 - prev.labeled.size)
            assert set(prev.labeled) <= set(cur.labeled)
            np.testing.assert_array_equal(cur.test, test)
        for s in states:
            assert not set(s.labeled) & set(s.pool) and not set(s.labeled) & set(s.test)
            assert s.labeled.size + s.pool.size + s.test.size == n
        for rec, s in zip(trace.records, states):
            chosen = set(rec.selected)
            assert len(chosen) == len(rec.selected)
            assert chosen <= set(s.pool)
        assert np.all(np.diff(trace.labeled_counts()) > 0)
        assert trace.labeled_counts()[-1] == 55

    def test_final_model_matches_conventional_fit(self, synthetic):
        states = []
        trace = run_al_loop(synthetic, "gpr", "vr_kmeans", B=10, label_budget=40, seed=2, model_options=GPR_FAST,
                            on_iteration=states.append)
        last = states[-1]
        rest = np.concatenate([last.labeled, last.pool])
        X = transform(synthetic, list(zip(synthetic.features[rest].min(axis=0),
                                          synthetic.features[rest].max(axis=0)))).features
        y = synthetic.target
        fitted = fit_model("gpr", X[last.labeled], y[last.labeled], GPR_FAST, 2)
        assert r_squared(y[last.test], fitted.predict(X[last.test]).mean) == trace.records[-1].r2

    def test_strategies_share_test_and_initial_sets(self, synthetic):
        seen = {}
        for strategy in ("vr_kmeans", "random"):
            states = []
            run_al_loop(synthetic, "gpr", strategy, B=10, label_budget=30, seed=6, model_options=GPR_FAST,
                        on_iteration=states.append)
            seen[strategy] = states[0]
        np.testing.assert_array_equal(seen["vr_kmeans"].test, seen["random"].test)
        np.testing.assert_array_equal(seen["vr_kmeans"].labeled, seen["random"].labeled)


class TestTrace:
    def test_csv_round_trip(self, synthetic):
        trace = run_al_loop(synthetic, "gpr", "vr_kmeans", B=10, label_budget=40, seed=0, model_options=GPR_FAST)
        back = ActiveLearningTrace.from_csv(trace.to_csv(), "vr_kmeans", "gpr", 0)
        assert back == trace

    def test_labels_to_reach(self):
        from creepuq.active import AlRecord
        t = ActiveLearningTrace("random", "gpr", 0, [AlRecord(0, 20, 0.5, 1.0, ()), AlRecord(1, 30, 0.85, 0.5, ()),
                                                      AlRecord(2, 40, 0.8, 0.5, ())])
        assert t.labels_to_reach(0.8) == 30
        assert t.labels_to_reach(0.9) == float("inf")
