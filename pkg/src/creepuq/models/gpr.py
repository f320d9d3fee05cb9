"""Gaussian process regression with an isotropic RBF kernel."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from ..predictive import DEFAULT_Z, PredictiveDistribution

JITTERS = (0.0, 1e-12, 1e-10, 1e-8, 1e-6)


class GprError(RuntimeError):
    pass


def rbf_kernel(A: np.ndarray, B: np.ndarray, signal_sd: float, length_scale: float) -> np.ndarray:
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return signal_sd ** 2 * np.exp(-0.5 * sq / length_scale ** 2)


def _cholesky(K: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor, escalating diagonal jitter up to 1e-6."""
    eye = np.eye(K.shape[0])
    for jitter in JITTERS:
        try:
            return np.linalg.cholesky(K + jitter * eye), jitter
        except np.linalg.LinAlgError:
            continue
    raise GprError("kernel matrix is not positive definite even with 1e-6 jitter")


@dataclass(frozen=True)
class GprModel:
    signal_sd: float
    length_scale: float
    noise_sd: float
    X: np.ndarray
    chol: np.ndarray
    alpha: np.ndarray
    y_offset: float = 0.0
    jitter: float = 0.0
    log_marginal_likelihood: float = float("nan")

    def predict(self, X_new, z: float = DEFAULT_Z) -> PredictiveDistribution:
        return gpr_predict(self, X_new, z)

    def hyperparameters(self) -> dict:
        return {
            "signal_sd": self.signal_sd,
            "length_scale": self.length_scale,
            "noise_sd": self.noise_sd,
            "y_offset": self.y_offset,
            "jitter": self.jitter,
            "log_marginal_likelihood": self.log_marginal_likelihood,
        }


def build_gpr(X, y, signal_sd: float, length_scale: float, noise_sd: float,
              y_offset: float = 0.0) -> GprModel:
    """Condition a GP with fixed hyperparameters on ``(X, y - y_offset)``."""
    if signal_sd <= 0 or length_scale <= 0 or noise_sd < 0:
        raise GprError("kernel scales must be positive and noise non-negative")
    X = np.asarray(X, dtype=np.float64)
    yc = np.asarray(y, dtype=np.float64).reshape(-1) - y_offset
    K = rbf_kernel(X, X, signal_sd, length_scale) + noise_sd ** 2 * np.eye(X.shape[0])
    L, jitter = _cholesky(K)
    alpha = cho_solve((L, True), yc)
    lml = (-0.5 * float(yc @ alpha) - float(np.sum(np.log(np.diag(L))))
           - 0.5 * X.shape[0] * math.log(2 * math.pi))
    return GprModel(signal_sd, length_scale, noise_sd, X, L, alpha, y_offset, jitter, lml)


def log_marginal_likelihood(X, y, signal_sd, length_scale, noise_sd) -> float:
    try:
        return build_gpr(X, y, signal_sd, length_scale, noise_sd).log_marginal_likelihood
    except GprError:
        return -math.inf


DEFAULT_SEARCH = {
    "signal_sd": (1e-2, 1e2),
    "length_scale": (1e-2, 1e2),
    "noise_sd": (1e-4, 1.0),
    "grid_points": 7,
    "refine_rounds": 3,
}


def gpr_fit(X, y, hyper_search: dict | None = None, fixed: tuple[float, float, float] | None = None,
            center: bool = True) -> GprModel:
    """Fit by maximizing the log marginal likelihood.

    A log-spaced grid over (signal_sd, length_scale, noise_sd) is searched
    first, then each coordinate is refined for a few rounds with a log-step
    that halves every round. Only improvements are accepted, so the result is
    at least as likely as every grid point. ``fixed`` skips the search.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] < 1 or (fixed is None and X.shape[0] < 2):
        raise GprError("need at least 2 training points to select hyperparameters")
    offset = float(y.mean()) if center else 0.0
    yc = y - offset
    if fixed is not None:
        return build_gpr(X, y, *fixed, y_offset=offset)

    cfg = {**DEFAULT_SEARCH, **(hyper_search or {})}
    names = ("signal_sd", "length_scale", "noise_sd")
    grids = [np.geomspace(*cfg[n], int(cfg["grid_points"])) for n in names]
    best_theta, best_lml = None, -math.inf
    for theta in itertools.product(*grids):
        lml = log_marginal_likelihood(X, yc, *theta)
        if lml > best_lml:
            best_theta, best_lml = np.array(theta), lml
    if best_theta is None:
        raise GprError("no grid point produced a finite marginal likelihood")

    log_theta = np.log(best_theta)
    step = np.array([np.log(g[1] / g[0]) if len(g) > 1 else 1.0 for g in grids]) / 2.0
    for _ in range(int(cfg["refine_rounds"])):
        for i in range(3):
            for direction in (1.0, -1.0):
                trial = log_theta.copy()
                trial[i] += direction * step[i]
                lml = log_marginal_likelihood(X, yc, *np.exp(trial))
                if lml > best_lml:
                    log_theta, best_lml = trial, lml
        step /= 2.0
    return build_gpr(X, y, *np.exp(log_theta), y_offset=offset)


def gpr_predict(model: GprModel, X_new, z: float = DEFAULT_Z) -> PredictiveDistribution:
    """Posterior predictive of observations (latent variance plus noise)."""
    X_new = np.atleast_2d(np.asarray(X_new, dtype=np.float64))
    if X_new.shape[1] != model.X.shape[1]:
        raise GprError(f"expected {model.X.shape[1]} features, got {X_new.shape[1]}")
    k_star = rbf_kernel(X_new, model.X, model.signal_sd, model.length_scale)
    mean = k_star @ model.alpha + model.y_offset
    v = solve_triangular(model.chol, k_star.T, lower=True)
    var = model.signal_sd ** 2 - np.sum(v * v, axis=0) + model.noise_sd ** 2
    if np.any(var < -1e-10):
        raise GprError(f"negative predictive variance {var.min():.3e}")
    return PredictiveDistribution(mean, np.sqrt(np.maximum(var, 0.0)), z=z)
