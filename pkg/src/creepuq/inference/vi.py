"""Mean-field Gaussian variational inference (Bayes by backprop)."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from ..autodiff.tensor import Tensor
from ..autodiff.train import TrainingConfig, train

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MeanFieldPosterior:
    """Factorized Gaussian ``q(theta) = prod N(mean_i, exp(log_sd_i)^2)``."""

    mean: np.ndarray
    log_sd: np.ndarray

    @property
    def sd(self) -> np.ndarray:
        return np.exp(self.log_sd)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.mean, self.log_sd])

    @classmethod
    def from_flat(cls, phi) -> "MeanFieldPosterior":
        phi = np.asarray(phi, dtype=np.float64)
        d = phi.shape[0] // 2
        return cls(phi[:d].copy(), phi[d:].copy())

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.mean + self.sd * rng.standard_normal((n, self.dim))

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "log_sd": self.log_sd.tolist()}


def gaussian_kl(q_mean, q_log_sd, prior_sd):
    """KL[N(q_mean, q_sd^2) || N(0, prior_sd^2)] summed over dimensions.

    Accepts Tensors for the variational parameters.
    """
    prior_sd = np.asarray(prior_sd, dtype=np.float64)
    q_var = (q_log_sd * 2.0).exp() if isinstance(q_log_sd, Tensor) else np.exp(2.0 * q_log_sd)
    terms = (np.log(prior_sd) - q_log_sd) + (q_var + q_mean * q_mean) * (0.5 / prior_sd ** 2) - 0.5
    return terms.sum()


def gaussian_log_likelihood(y, f, obs_sd: float):
    r = y - f
    return -(r * r).sum() * (0.5 / obs_sd ** 2) - r.size * (math.log(obs_sd) + 0.5 * LOG_2PI)


def elbo(phi: Tensor, model: Callable, prior_sd, X_batch, y_batch, n_total: int, n_mc_samples: int,
         kl_weight: float, obs_sd: float, rng: np.random.Generator, penalty: Callable | None = None) -> Tensor:
    """Negative ELBO as a differentiable scalar.

    ``-E_q[log p(Y|X, theta)] + kl_weight * KL[q || prior]``, with the
    expectation estimated from ``n_mc_samples`` reparameterized draws and
    the minibatch likelihood scaled by ``n_total / batch_size``.
    ``penalty(predictions)`` adds an extra per-draw term (physics loss)
    weighted by ``n_total / obs_sd**2``, the same weight the squared
    residuals carry.
    """
    if n_mc_samples < 1:
        raise ValueError("need at least one Monte Carlo sample")
    if kl_weight < 0:
        raise ValueError("kl_weight must be non-negative")
    d = phi.shape[0] // 2
    mean, log_sd = phi[:d], phi[d:]
    kl = gaussian_kl(mean, log_sd, prior_sd)
    b = len(y_batch)
    if b == 0:
        return kl * kl_weight
    nll = None
    for _ in range(n_mc_samples):
        eps = rng.standard_normal(d)
        theta = mean + log_sd.exp() * eps
        f = model(theta, X_batch)
        term = -gaussian_log_likelihood(y_batch, f, obs_sd) * (n_total / b)
        if penalty is not None:
            term = term + penalty(f) * (n_total / obs_sd ** 2)
        nll = term if nll is None else nll + term
    return nll * (1.0 / n_mc_samples) + kl * kl_weight


def vi_fit(model: Callable, init_mean: np.ndarray, X, y, prior_sd, kl_weight: float,
           training: TrainingConfig, seed: int, obs_sd: float = 0.1, n_mc_samples: int = 1,
           init_sd: float | None = None, penalty: Callable | None = None) -> MeanFieldPosterior:
    """Fit a mean-field posterior by stochastic minimization of the negative ELBO.

    The optimizer sees the negative ELBO times ``obs_sd**2 / n``. The
    optimum is unchanged and the data term becomes half the minibatch MSE,
    so learning rates behave as they would for a plain regression loss.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    rng = np.random.default_rng(seed)
    init_mean = np.asarray(init_mean, dtype=np.float64)
    sd0 = float(np.min(prior_sd)) if init_sd is None else init_sd
    phi0 = np.concatenate([init_mean, np.full(init_mean.shape, math.log(sd0))])
    scale = obs_sd ** 2 / max(n, 1)

    def loss(phi, rows, rng_):
        return elbo(phi, model, prior_sd, X[rows], y[rows], n, n_mc_samples, kl_weight, obs_sd, rng_,
                    penalty) * scale

    # the Monte Carlo ELBO is noisy, so the lowest epoch loss is not a better fit
    result = train(loss, phi0, n, replace(training, restore_best=False), rng)
    return MeanFieldPosterior.from_flat(result.params)
