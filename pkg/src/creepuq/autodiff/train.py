"""Minibatch gradient training over a flat parameter vector."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .optim import make_optimizer
from .tensor import Tape, Tensor, grad

logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainingConfig:
    optimizer: str = "adam"
    lr: float = 0.01
    optimizer_options: dict = field(default_factory=dict)
    epochs: int = 2000
    batch_size: int = 16
    patience: int = 200
    restore_best: bool = True

    @classmethod
    def from_dict(cls, d: dict | None, **defaults) -> "TrainingConfig":
        merged = {**defaults, **(d or {})}
        return cls(**merged)


@dataclass
class TrainingResult:
    params: np.ndarray
    history: list[float]
    epochs_run: int


def train(loss_fn: Callable[[Tensor, np.ndarray, np.random.Generator], Tensor], params0: np.ndarray,
          n_rows: int, config: TrainingConfig, rng: np.random.Generator) -> TrainingResult:
    """Minimize ``loss_fn(params, batch_rows, rng)`` over shuffled minibatches.

    Stops early once the epoch-mean loss has not improved for
    ``config.patience`` consecutive epochs. With ``config.restore_best``
    the parameters from the end of the lowest-loss epoch are returned. With ``n_rows == 0`` every step
    sees an empty batch (useful for prior-only objectives).
    """
    step = make_optimizer(config.optimizer, config.lr, **config.optimizer_options)
    params = np.array(params0, dtype=np.float64)
    state = None
    history: list[float] = []
    best, stale = np.inf, 0
    best_params = params
    batch = max(1, int(config.batch_size))
    epoch = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_rows)
        batches = [order[i:i + batch] for i in range(0, n_rows, batch)] or [order]
        total = 0.0
        for rows in batches:
            leaf = Tensor(params)
            with Tape() as tape:
                loss = loss_fn(leaf, rows, rng)
            if not np.isfinite(loss.value):
                raise TrainingError(f"loss became {float(loss.value)} at epoch {epoch}")
            (g,) = grad(loss, [leaf], tape)
            params, state = step(params, g, state)
            total += float(loss.value)
        mean_loss = total / len(batches)
        history.append(mean_loss)
        if mean_loss < best - 1e-12:
            best, stale, best_params = mean_loss, 0, params
        else:
            stale += 1
            if stale >= config.patience:
                break
    logger.debug("training stopped after %d epochs, loss %.5g", epoch, history[-1] if history else float("nan"))
    return TrainingResult(best_params if config.restore_best else params, history, epoch)
