"""Posterior predictive aggregation for sampled or variational posteriors."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..predictive import DEFAULT_Z, PredictiveDistribution, aggregate_draws
from .hmc import PosteriorSamples
from .vi import MeanFieldPosterior


def thin(samples: np.ndarray, n: int) -> np.ndarray:
    """``n`` evenly spaced rows of ``samples`` (all rows if there are fewer)."""
    samples = np.asarray(samples)
    if samples.shape[0] <= n:
        return samples
    return samples[np.linspace(0, samples.shape[0] - 1, n).round().astype(int)]


def parameter_draws(posterior, n_draws: int, seed: int = 0) -> np.ndarray:
    """Parameter vectors to push through the model, shape ``(S, dim)``."""
    if isinstance(posterior, MeanFieldPosterior):
        return posterior.sample(n_draws, np.random.default_rng(seed))
    if isinstance(posterior, PosteriorSamples):
        posterior = posterior.samples
    return thin(np.atleast_2d(posterior), n_draws)


def posterior_predict(posterior, model: Callable, x, n_draws: int, seed: int = 0,
                      z: float = DEFAULT_Z, noise_var: float = 0.0) -> PredictiveDistribution:
    """Mean and population SD of ``model(theta_s, x)`` over ``n_draws`` draws.

    ``posterior`` is a :class:`MeanFieldPosterior` (sampled with ``seed``),
    :class:`PosteriorSamples` or a plain sample matrix (thinned evenly).
    A positive ``noise_var`` is added to the predictive variance.
    """
    if n_draws < 2:
        raise ValueError("posterior predictive needs at least 2 draws")
    thetas = parameter_draws(posterior, n_draws, seed)
    if thetas.shape[0] < 2:
        raise ValueError("posterior predictive needs at least 2 draws")
    x = np.asarray(x, dtype=np.float64)
    draws = np.stack([np.asarray(model(theta, x), dtype=np.float64) for theta in thetas])
    pd = aggregate_draws(draws, z)
    if noise_var > 0:
        pd = PredictiveDistribution(pd.mean, np.sqrt(pd.std ** 2 + noise_var), z=z)
    return pd
