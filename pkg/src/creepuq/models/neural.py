"""Neural predictors: deterministic MLP, deep ensemble, MC dropout and two BNNs.

All variants share one entry point pair, :func:`fit_neural` and
:meth:`FittedNeural.predict`, and work on normalized features with a
log10 target.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import MlpArchitecture, adam_step, dropout_masks, forward, init_params
from ..autodiff.tensor import Tensor
from ..autodiff.train import TrainingConfig, train
from ..inference.hmc import LogDensityTarget, nuts_sample
from ..inference.predict import posterior_predict, thin
from ..inference.vi import MeanFieldPosterior, vi_fit
from ..physics import pi_loss_terms
from ..predictive import DEFAULT_Z, PredictiveDistribution, aggregate_draws

VARIANTS = ("deterministic", "deep_ensemble", "mc_dropout", "bnn_vi", "bnn_mcmc")

NEURAL_DEFAULTS: dict[str, dict] = {
    "deterministic": {
        "hidden": [1000, 200, 40],
        "training": {"optimizer": "rmsprop", "lr": 0.01},
    },
    "deep_ensemble": {
        "hidden": [10, 10, 10], "n_members": 5, "dropout": 0.5,
        "training": {"optimizer": "adam", "lr": 0.01},
    },
    "mc_dropout": {
        "hidden": [100, 100, 100], "dropout": 0.5, "n_passes": 1000,
        "training": {"optimizer": "adagrad", "lr": 0.01},
    },
    "bnn_vi": {
        "hidden": [100, 100], "prior_sd": 0.06, "kl_weight": 0.01, "obs_sd": 0.1,
        "n_draws": 1000, "n_mc_samples": 1, "include_noise": False,
        "training": {"optimizer": "sgd", "lr": 0.001, "optimizer_options": {"nesterov": 0.95}},
    },
    "bnn_mcmc": {
        "hidden": [10, 10, 10], "prior_sd": 1.0, "n_warmup": 300, "n_samples": 200, "n_chains": 1,
        "n_draws": 100, "max_tree_depth": 6, "target_accept": 0.8, "adapt_mass": True,
        "pre_optimize_steps": 2000, "pre_optimize_lr": 0.01, "include_noise": True,
    },
}

TRAINING_BASE = {"epochs": 2000, "batch_size": 16, "patience": 200}


class NeuralModelError(RuntimeError):
    pass


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True)
class NeuralModelConfig:
    """Variant name plus resolved hyperparameters.

    ``physics_loss`` is ``None`` or ``{"lambda1", "lambda2", "upper_bound"}``.
    """

    variant: str
    options: dict = field(default_factory=dict)
    physics_loss: dict | None = None
    seed: int = 0
    prediction_seed: int = 1

    @classmethod
    def create(cls, variant: str, overrides: dict | None = None, physics_loss: dict | None = None,
               seed: int = 0, prediction_seed: int | None = None) -> "NeuralModelConfig":
        if variant not in VARIANTS:
            raise ValueError(f"unknown neural variant {variant!r}; choose from {VARIANTS}")
        options = _merge(NEURAL_DEFAULTS[variant], overrides or {})
        if "training" in NEURAL_DEFAULTS[variant]:
            options["training"] = _merge(TRAINING_BASE, options["training"])
        return cls(variant, options, physics_loss, int(seed),
                   int(seed) + 1 if prediction_seed is None else int(prediction_seed))

    def architecture(self, input_width: int) -> MlpArchitecture:
        return MlpArchitecture.of(input_width, self.options["hidden"])

    def training(self) -> TrainingConfig:
        return TrainingConfig.from_dict(self.options["training"])

    def to_dict(self) -> dict:
        return {"variant": self.variant, "options": copy.deepcopy(self.options),
                "physics_loss": copy.deepcopy(self.physics_loss), "seed": self.seed,
                "prediction_seed": self.prediction_seed}

    @classmethod
    def from_dict(cls, d: dict) -> "NeuralModelConfig":
        return cls(d["variant"], d["options"], d.get("physics_loss"), d["seed"], d["prediction_seed"])


@dataclass(frozen=True)
class FittedNeural:
    """Trained network(s). ``params`` has one row per member, draw or sample."""

    config: NeuralModelConfig
    arch: MlpArchitecture
    params: np.ndarray
    posterior: MeanFieldPosterior | None = None
    noise_var: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def variant(self) -> str:
        return self.config.variant

    def predict(self, X, z: float = DEFAULT_Z, seed: int | None = None) -> PredictiveDistribution:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.arch.input_width:
            raise ValueError(f"expected inputs with {self.arch.input_width} columns, got shape {X.shape}")
        seed = self.config.prediction_seed if seed is None else seed
        opts = self.config.options
        if self.variant == "deterministic":
            return PredictiveDistribution(forward(self.arch, self.params[0], X), z=z)
        if self.variant == "deep_ensemble":
            return aggregate_draws(np.stack([forward(self.arch, p, X) for p in self.params]), z)
        if self.variant == "mc_dropout":
            rng = np.random.default_rng(seed)
            rate = float(opts["dropout"])
            draws = np.empty((int(opts["n_passes"]), X.shape[0]))
            for m in range(draws.shape[0]):
                masks = dropout_masks(self.arch, X.shape[0], rate, rng) if rate > 0 else None
                draws[m] = forward(self.arch, self.params[0], X, masks)
            return aggregate_draws(draws, z)
        if self.variant == "bnn_vi":
            noise = self.noise_var if opts.get("include_noise") else 0.0
            return posterior_predict(self.posterior, self.arch, X, int(opts["n_draws"]), seed, z, noise)
        noise = self.noise_var if opts.get("include_noise") else 0.0
        return posterior_predict(self.params, self.arch, X, int(opts["n_draws"]), seed, z, noise)

    def to_dict(self) -> dict:
        out = {"config": self.config.to_dict(), "layer_widths": list(self.arch.layer_widths),
               "params": self.params.tolist(), "noise_var": self.noise_var,
               "diagnostics": self.diagnostics}
        if self.posterior is not None:
            out["posterior"] = self.posterior.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FittedNeural":
        post = d.get("posterior")
        return cls(NeuralModelConfig.from_dict(d["config"]), MlpArchitecture(tuple(d["layer_widths"])),
                   np.asarray(d["params"], dtype=np.float64),
                   MeanFieldPosterior(np.asarray(post["mean"]), np.asarray(post["log_sd"])) if post else None,
                   float(d["noise_var"]), d.get("diagnostics", {}))


def _penalty(physics_loss: dict | None):
    """Differentiable ``lambda1 * L_B1 + lambda2 * L_B2`` or ``None``."""
    if not physics_loss:
        return None
    lam1, lam2 = float(physics_loss.get("lambda1", 0.1)), float(physics_loss.get("lambda2", 0.1))
    if lam1 < 0 or lam2 < 0:
        raise ValueError("physics loss weights must be non-negative")
    a = float(physics_loss["upper_bound"])

    def penalty(pred):
        b1, b2 = pi_loss_terms(pred, a)
        return b1 * lam1 + b2 * lam2
    return penalty


def _train_mlp(arch, X, y, training: TrainingConfig, seed: int, dropout: float, penalty):
    rng = np.random.default_rng(seed)
    params0 = init_params(arch, rng)

    def loss(params, rows, rng_):
        masks = dropout_masks(arch, len(rows), dropout, rng_) if dropout > 0 else None
        f = forward(arch, params, X[rows], masks)
        r = f - y[rows]
        total = (r * r).mean()
        if penalty is not None:
            total = total + penalty(f)
        return total

    return train(loss, params0, X.shape[0], training, rng)


def _mcmc_log_density(arch: MlpArchitecture, X, y, prior_sd: float, penalty):
    """Log posterior over ``[weights, log sigma_obs]``.

    Gaussian prior on weights, half-normal(1) on sigma_obs (with the log
    Jacobian), Gaussian likelihood, and the physics penalty scaled by n.
    """
    n = y.shape[0]
    P = arch.n_params
    inv_prior_var = 1.0 / prior_sd ** 2

    def logp(theta: Tensor):
        w, s = theta[:P], theta[P]
        f = forward(arch, w, X)
        r = y - f
        loglik = -(r * r).sum() * 0.5 * (s * -2.0).exp() - s * n
        sigma = s.exp()
        out = loglik - (w * w).sum() * (0.5 * inv_prior_var) - sigma * sigma * 0.5 + s
        if penalty is not None:
            out = out - penalty(f) * n
        return out

    return LogDensityTarget.from_tensor_fn(P + 1, logp)


def _fit_mcmc(config: NeuralModelConfig, arch, X, y, penalty) -> FittedNeural:
    opts = config.options
    target = _mcmc_log_density(arch, X, y, float(opts["prior_sd"]), penalty)
    chains, diags = [], []
    for c in range(int(opts["n_chains"])):
        seed = config.seed + c
        rng = np.random.default_rng(seed)
        theta = np.concatenate([init_params(arch, rng), [math.log(0.5)]])
        state = None
        for _ in range(int(opts["pre_optimize_steps"])):
            _, g = target(theta)
            theta, state = adam_step(theta, -g, float(opts["pre_optimize_lr"]), state)
        ps = nuts_sample(target, int(opts["n_warmup"]), int(opts["n_samples"]), seed,
                         target_accept=float(opts["target_accept"]), init=theta,
                         max_tree_depth=int(opts["max_tree_depth"]), adapt_mass=bool(opts["adapt_mass"]))
        chains.append(ps.samples)
        diags.append(ps.diagnostics())
    samples = thin(np.concatenate(chains), int(opts["n_draws"]))
    noise_var = float(np.mean(np.exp(2.0 * samples[:, -1])))
    return FittedNeural(config, arch, samples[:, :-1].copy(), noise_var=noise_var,
                        diagnostics={"chains": diags})


def fit_neural(config: NeuralModelConfig, X, y) -> FittedNeural:
    """Train the configured variant on normalized features ``X`` and log10 targets ``y``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or y.shape[0] == 0:
        raise ValueError(f"need matching non-empty X and y, got {X.shape} and {y.shape}")
    arch = config.architecture(X.shape[1])
    penalty = _penalty(config.physics_loss)
    opts = config.options
    if config.variant == "bnn_mcmc":
        return _fit_mcmc(config, arch, X, y, penalty)
    training = config.training()
    if config.variant == "bnn_vi":
        rng = np.random.default_rng(config.seed)
        posterior = vi_fit(arch, init_params(arch, rng), X, y, float(opts["prior_sd"]),
                           float(opts["kl_weight"]), training, config.seed, float(opts["obs_sd"]),
                           int(opts["n_mc_samples"]), penalty=penalty)
        return FittedNeural(config, arch, posterior.mean[None, :], posterior,
                            noise_var=float(opts["obs_sd"]) ** 2)
    if config.variant == "deep_ensemble":
        members = [_train_mlp(arch, X, y, training, config.seed + s, float(opts["dropout"]), penalty)
                   for s in range(int(opts["n_members"]))]
        return FittedNeural(config, arch, np.stack([m.params for m in members]),
                            diagnostics={"epochs": [m.epochs_run for m in members]})
    dropout = float(opts["dropout"]) if config.variant == "mc_dropout" else 0.0
    result = _train_mlp(arch, X, y, training, config.seed, dropout, penalty)
    return FittedNeural(config, arch, result.params[None, :], diagnostics={"epochs": result.epochs_run})
