"""Name-based access to every predictor behind one fit/predict interface."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from ..predictive import DEFAULT_Z, PredictiveDistribution
from .boosting import ngboost_fit, qr_fit
from .gpr import gpr_fit
from .neural import FittedNeural, NeuralModelConfig, fit_neural

CLASSICAL_MODELS = ("gpr", "qr", "ngboost")
NEURAL_MODELS = {"nn": "deterministic", "deep_ensemble": "deep_ensemble", "mc_dropout": "mc_dropout",
                 "bnn_vi": "bnn_vi", "bnn_mcmc": "bnn_mcmc"}
MODEL_NAMES = ("nn", "qr", "ngboost", "gpr", "deep_ensemble", "mc_dropout", "bnn_vi", "bnn_mcmc")
MODEL_LABELS = {"nn": "NN", "qr": "QR", "ngboost": "NGBoost", "gpr": "GPR", "deep_ensemble": "DE",
                "mc_dropout": "MC Dropout", "bnn_vi": "BNN-VI", "bnn_mcmc": "BNN-MCMC"}


@dataclass(frozen=True)
class FittedModel:
    name: str
    model: Any

    def predict(self, X, z: float = DEFAULT_Z) -> PredictiveDistribution:
        # quantile regression keeps its fitted quantile interval whatever z is
        return self.model.predict(np.asarray(X, dtype=np.float64), z=z)

    def summary(self) -> dict:
        if self.name == "gpr":
            return self.model.hyperparameters()
        if isinstance(self.model, FittedNeural):
            return self.model.diagnostics
        return {}


def fit_model(name: str, X, y, options: dict | None = None, seed: int = 0,
              physics_loss: dict | None = None) -> FittedModel:
    """Fit model ``name`` with per-model ``options`` overriding its defaults.

    ``physics_loss`` only applies to the neural models.
    """
    options = dict(options or {})
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if name == "gpr":
        fixed = options.get("fixed")
        return FittedModel(name, gpr_fit(X, y, options.get("hyper_search"),
                                         tuple(fixed) if fixed else None, options.get("center", True)))
    if name == "qr":
        quantiles = options.pop("quantiles", (0.025, 0.5, 0.975))
        return FittedModel(name, qr_fit(X, y, quantiles, options))
    if name == "ngboost":
        return FittedModel(name, ngboost_fit(X, y, options))
    if name in NEURAL_MODELS:
        config = NeuralModelConfig.create(NEURAL_MODELS[name], options, physics_loss, seed)
        return FittedModel(name, fit_neural(config, X, y))
    raise ValueError(f"unknown model {name!r}; choose from {MODEL_NAMES}")
