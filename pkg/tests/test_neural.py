import json
import math

import numpy as np
import pytest

from creepuq.data import apply_log10_target, fit_normalizer, generate_synthetic_creep
from creepuq.models.neural import (NEURAL_DEFAULTS, VARIANTS, FittedNeural, NeuralModelConfig,
                                   fit_neural)
from creepuq.physics import pi_loss_terms

FAST = {
    "deterministic": {"hidden": [16, 8], "training": {"epochs": 5}},
    "deep_ensemble": {"n_members": 3, "training": {"epochs": 5}},
    "mc_dropout": {"hidden": [16, 16], "n_passes": 20, "training": {"epochs": 5}},
    "bnn_vi": {"hidden": [16], "n_draws": 20, "training": {"epochs": 5}},
    "bnn_mcmc": {"hidden": [4], "n_warmup": 100, "n_samples": 20, "n_draws": 10, "pre_optimize_steps": 200},
}


@pytest.fixture(scope="module")
def synthetic():
    ds = fit_normalizer(apply_log10_target(generate_synthetic_creep(120, 0.1, 0)))
    return ds.features, ds.target


def constant_members(values, width=3):
    """Deep ensemble whose member ``s`` outputs ``values[s]`` everywhere."""
    cfg = NeuralModelConfig.create("deep_ensemble", {"hidden": [2]}, None, 0)
    arch = cfg.architecture(width)
    params = np.zeros((len(values), arch.n_params))
    params[:, -1] = values
    return FittedNeural(cfg, arch, params)


class TestConfig:
    def test_defaults(self):
        cfg = NeuralModelConfig.create("bnn_vi")
        assert cfg.options["prior_sd"] == 0.06
        assert cfg.options["kl_weight"] == 0.01
        assert NEURAL_DEFAULTS["deterministic"]["hidden"] == [1000, 200, 40]
        assert NEURAL_DEFAULTS["deep_ensemble"]["n_members"] == 5
        assert NEURAL_DEFAULTS["mc_dropout"]["n_passes"] == 1000

    def test_overrides_merge_deeply(self):
        cfg = NeuralModelConfig.create("mc_dropout", {"training": {"epochs": 3}})
        assert cfg.training().epochs == 3
        assert cfg.training().optimizer == "adagrad"

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            NeuralModelConfig.create("svm")

    def test_round_trip(self):
        cfg = NeuralModelConfig.create("bnn_mcmc", {"n_chains": 2}, {"lambda1": 0.5, "upper_bound": 6.0}, 4)
        assert NeuralModelConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


class TestFit:
    def test_ensemble_cardinality(self, synthetic):
        X, y = synthetic
        m = fit_neural(NeuralModelConfig.create("deep_ensemble", FAST["deep_ensemble"], None, 0), X, y)
        assert m.params.shape[0] == 3
        assert len({p.tobytes() for p in m.params}) == 3

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_deterministic_given_seed(self, variant, synthetic):
        X, y = synthetic
        a = fit_neural(NeuralModelConfig.create(variant, FAST[variant], None, 3), X, y)
        b = fit_neural(NeuralModelConfig.create(variant, FAST[variant], None, 3), X, y)
        np.testing.assert_array_equal(a.params, b.params)
        np.testing.assert_array_equal(a.predict(X).mean, b.predict(X).mean)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_predict_is_pure(self, variant, synthetic):
        X, y = synthetic
        m = fit_neural(NeuralModelConfig.create(variant, FAST[variant], None, 1), X, y)
        a, b = m.predict(X[:10]), m.predict(X[:10])
        np.testing.assert_array_equal(a.mean, b.mean)
        if variant == "deterministic":
            assert a.std is None
        else:
            np.testing.assert_array_equal(a.std, b.std)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_serialization_round_trip(self, variant, synthetic):
        X, y = synthetic
        m = fit_neural(NeuralModelConfig.create(variant, FAST[variant], None, 2), X, y)
        back = FittedNeural.from_dict(json.loads(json.dumps(m.to_dict())))
        np.testing.assert_array_equal(back.predict(X).mean, m.predict(X).mean)

    def test_shape_mismatch(self, synthetic):
        X, y = synthetic
        m = fit_neural(NeuralModelConfig.create("deterministic", FAST["deterministic"], None, 0), X, y)
        with pytest.raises(ValueError):
            m.predict(X[:, :2])

    def test_learns_noise_free_surface(self):
        ds = fit_normalizer(apply_log10_target(generate_synthetic_creep(400, 0.0, 0)))
        cfg = NeuralModelConfig.create("deterministic", {"training": {"epochs": 100}}, None, 0)
        m = fit_neural(cfg, ds.features, ds.target)
        assert np.sqrt(np.mean((m.predict(ds.features).mean - ds.target) ** 2)) < 0.1


class TestPredict:
    def test_dropout_rate_zero_gives_zero_spread(self, synthetic):
        X, y = synthetic
        cfg = NeuralModelConfig.create("mc_dropout", {**FAST["mc_dropout"], "dropout": 0.0}, None, 0)
        np.testing.assert_array_equal(fit_neural(cfg, X, y).predict(X).std, 0.0)

    def test_copied_members_give_zero_spread(self, synthetic):
        X, y = synthetic
        m = fit_neural(NeuralModelConfig.create("deterministic", FAST["deterministic"], None, 0), X, y)
        cfg = NeuralModelConfig.create("deep_ensemble", {"hidden": FAST["deterministic"]["hidden"]}, None, 0)
        ens = FittedNeural(cfg, m.arch, np.repeat(m.params, 5, axis=0))
        np.testing.assert_array_equal(ens.predict(X).std, 0.0)

    def test_members_one_two_three(self):
        pd = constant_members([1.0, 2.0, 3.0]).predict(np.ones((4, 3)))
        np.testing.assert_allclose(pd.mean, 2.0)
        np.testing.assert_allclose(pd.std, math.sqrt(2 / 3))

    def test_mc_dropout_passes_differ(self, synthetic):
        X, y = synthetic
        m = fit_neural(NeuralModelConfig.create("mc_dropout", FAST["mc_dropout"], None, 0), X, y)
        assert np.all(m.predict(X).std > 0)


class TestPhysicsLoss:
    def test_penalty_never_worsens_feasibility(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(size=(60, 2))
        y = np.where(X[:, 0] > 0.5, 6.0, 0.0)
        a = 6.0
        violation = {}
        for lam in (0.0, 10.0):
            totals = []
            for seed in range(5):
                overrides = {"hidden": [8], "training": {"epochs": 30, "lr": 0.05}}
                cfg = NeuralModelConfig.create("deterministic", overrides,
                                               {"lambda1": lam, "lambda2": lam, "upper_bound": a}, seed)
                pred = fit_neural(cfg, X, y).predict(X).mean
                totals.append(sum(pi_loss_terms(pred, a)))
            violation[lam] = np.mean(totals)
        assert violation[10.0] <= violation[0.0]


class TestMcmcContraction:
    def test_sigma_shrinks_with_more_data(self):
        opts = {"hidden": [6], "n_warmup": 150, "n_samples": 100, "n_draws": 100, "pre_optimize_steps": 500,
                "include_noise": False}
        test = fit_normalizer(apply_log10_target(generate_synthetic_creep(450, 0.1, 1)))
        X_test = test.features[400:]
        medians = []
        for n in (50, 400):
            cfg = NeuralModelConfig.create("bnn_mcmc", opts, None, 0)
            medians.append(np.median(fit_neural(cfg, test.features[:n], test.target[:n]).predict(X_test).std))
        assert medians[1] < medians[0]
