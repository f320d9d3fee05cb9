"""Gradient-boosted quantile regression and natural-gradient boosting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..predictive import DEFAULT_Z, PredictiveDistribution
from .trees import RegressionTree, fit_tree


def pinball_loss(y, q, tau: float):
    """Quantile (pinball) loss and its derivative with respect to ``q``.

    The derivative is ``-tau`` when ``y > q``, ``1 - tau`` when ``y < q``
    and 0 at a tie.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("quantile level must lie in (0, 1)")
    y = np.asarray(y, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    diff = y - q
    loss = np.where(diff >= 0, tau * diff, (tau - 1.0) * diff)
    grad = np.where(diff > 0, -tau, np.where(diff < 0, 1.0 - tau, 0.0))
    if loss.ndim == 0:
        return float(loss), float(grad)
    return loss, grad


QR_DEFAULTS = {"quantiles": (0.025, 0.5, 0.975), "n_rounds": 300, "learning_rate": 0.05,
               "max_depth": 3, "min_samples_leaf": 5, "offset_folds": 5}


@dataclass(frozen=True)
class QuantileEnsemble:
    tau: float
    init: float
    learning_rate: float
    trees: tuple[RegressionTree, ...]
    base: "QuantileEnsemble | None" = None

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.full(X.shape[0], self.init)
        if self.base is not None:
            out += self.base.predict(X)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out


def fit_quantile_ensemble(X, y, tau: float, n_rounds: int, learning_rate: float, max_depth: int = 3,
                          min_samples_leaf: int = 5) -> QuantileEnsemble:
    """Friedman-style boosting: trees fit the negative pinball gradient,
    leaves are re-estimated as the tau-quantile of the residuals they hold.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    init = float(np.quantile(y, tau))
    F = np.full(y.shape, init)
    trees = []
    for _ in range(n_rounds):
        _, g = pinball_loss(y, F, tau)
        resid = y - F
        tree = fit_tree(X, -g, max_depth, min_samples_leaf,
                        leaf_value=lambda idx: np.quantile(resid[idx], tau))
        F += learning_rate * tree.predict(X)
        trees.append(tree)
    return QuantileEnsemble(tau, init, learning_rate, tuple(trees))


@dataclass(frozen=True)
class QuantileRegressor:
    ensembles: tuple[QuantileEnsemble, ...]
    interval_z: float = DEFAULT_Z

    def predict_quantiles(self, X) -> np.ndarray:
        """Quantile predictions sorted ascending per point, shape (n, n_quantiles)."""
        return np.sort(np.column_stack([e.predict(X) for e in self.ensembles]), axis=1)

    def predict(self, X, z: float | None = None) -> PredictiveDistribution:
        q = self.predict_quantiles(X)
        lower, upper = q[:, 0], q[:, -1]
        median = q[:, len(self.ensembles) // 2]
        std = (upper - lower) / (2.0 * DEFAULT_Z)
        return PredictiveDistribution(median, std, lower=lower, upper=upper, z=DEFAULT_Z)


def qr_fit(X, y, quantiles=(0.025, 0.5, 0.975), boost_config: dict | None = None) -> QuantileRegressor:
    quantiles = tuple(float(q) for q in quantiles)
    if len(quantiles) != 3 or not all(0 < a < b < 1 for a, b in zip(quantiles, quantiles[1:])):
        raise ValueError("need three strictly increasing quantile levels in (0, 1)")
    y = np.asarray(y, dtype=np.float64)
    if y.size < 2:
        raise ValueError("quantile regression needs at least 2 training rows")
    cfg = {**QR_DEFAULTS, **(boost_config or {})}
    args = (int(cfg["n_rounds"]), float(cfg["learning_rate"]), int(cfg["max_depth"]), int(cfg["min_samples_leaf"]))
    # outer quantiles are the middle fit plus residual-quantile offsets; residuals
    # come from out-of-fold middle fits since in-sample ones are overfit
    middle = fit_quantile_ensemble(X, y, quantiles[1], *args)
    X = np.asarray(X, dtype=np.float64)
    k = int(cfg["offset_folds"])
    if args[0] == 0 or k < 2 or y.size < 2 * k:
        resid = y - middle.predict(X)
    else:
        fold = np.arange(y.size) % k
        resid = np.empty_like(y)
        for f in range(k):
            held = fold == f
            resid[held] = y[held] - fit_quantile_ensemble(X[~held], y[~held], quantiles[1], *args).predict(X[held])
    lower, upper = (QuantileEnsemble(q, float(np.quantile(resid, q)), 0.0, (), middle)
                    for q in (quantiles[0], quantiles[2]))
    return QuantileRegressor((lower, middle, upper))


# --- natural gradient boosting ------------------------------------------------------------

NGBOOST_DEFAULTS = {"n_rounds": 500, "learning_rate": 0.01, "max_depth": 3, "min_samples_leaf": 5}
MIN_SIGMA = 1e-6


def gaussian_nll(y, mu, log_sigma) -> np.ndarray:
    return log_sigma + 0.5 * ((y - mu) * np.exp(-log_sigma)) ** 2 + 0.5 * np.log(2 * np.pi)


def natural_gradient(y, mu, log_sigma):
    """Fisher-preconditioned NLL gradient w.r.t. (mu, log sigma)."""
    z2 = ((y - mu) * np.exp(-log_sigma)) ** 2
    return mu - y, 0.5 * (1.0 - z2)


@dataclass(frozen=True)
class NgboostModel:
    mu0: float
    log_sigma0: float
    learning_rate: float
    stages: tuple = ()
    train_nll: tuple = field(default=(), compare=False)

    def predict_params(self, X):
        X = np.asarray(X, dtype=np.float64)
        mu = np.full(X.shape[0], self.mu0)
        s = np.full(X.shape[0], self.log_sigma0)
        for tree_mu, tree_s, scale in self.stages:
            mu -= self.learning_rate * scale * tree_mu.predict(X)
            s -= self.learning_rate * scale * tree_s.predict(X)
        return mu, s

    def predict(self, X, z: float = DEFAULT_Z) -> PredictiveDistribution:
        mu, s = self.predict_params(X)
        return PredictiveDistribution(mu, np.exp(s), z=z)


def _line_search(y, mu, s, d_mu, d_s, max_doublings=8, max_halvings=30) -> float:
    """Largest power-of-two scale of the step that lowers the mean NLL."""
    base = gaussian_nll(y, mu, s).mean()

    def loss(c):
        return gaussian_nll(y, mu - c * d_mu, s - c * d_s).mean()

    scale = 1.0
    for _ in range(max_doublings):
        if not np.isfinite(loss(scale * 2)) or loss(scale * 2) > base:
            break
        scale *= 2
    for _ in range(max_halvings):
        value = loss(scale)
        if np.isfinite(value) and value < base:
            return scale
        scale *= 0.5
    return 0.0


def ngboost_fit(X, y, config: dict | None = None) -> NgboostModel:
    """Gaussian NGBoost with one tree per distribution parameter per round.

    Each round fits trees to the natural gradients, picks a step scale by
    line search and applies ``learning_rate * scale``; the scaled step is
    halved further if it would raise the training NLL.
    """
    cfg = {**NGBOOST_DEFAULTS, **(config or {})}
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.size < 1:
        raise ValueError("NGBoost needs at least one training row")
    mu0 = float(y.mean())
    log_sigma0 = float(np.log(max(float(y.std()), MIN_SIGMA)))
    lr = float(cfg["learning_rate"])
    mu = np.full(y.shape, mu0)
    s = np.full(y.shape, log_sigma0)
    stages, history = [], [float(gaussian_nll(y, mu, s).mean())]
    for _ in range(int(cfg["n_rounds"])):
        g_mu, g_s = natural_gradient(y, mu, s)
        tree_mu = fit_tree(X, g_mu, int(cfg["max_depth"]), int(cfg["min_samples_leaf"]))
        tree_s = fit_tree(X, g_s, int(cfg["max_depth"]), int(cfg["min_samples_leaf"]))
        d_mu, d_s = tree_mu.predict(X), tree_s.predict(X)
        scale = _line_search(y, mu, s, d_mu, d_s)
        while scale > 0:
            new_nll = gaussian_nll(y, mu - lr * scale * d_mu, s - lr * scale * d_s).mean()
            if new_nll <= history[-1]:
                break
            scale *= 0.5
            if scale < 1e-12:
                scale = 0.0
        if scale == 0.0:
            history.append(history[-1])
            continue
        mu = mu - lr * scale * d_mu
        s = s - lr * scale * d_s
        stages.append((tree_mu, tree_s, scale))
        history.append(float(gaussian_nll(y, mu, s).mean()))
    return NgboostModel(mu0, log_sigma0, lr, tuple(stages), tuple(history))
