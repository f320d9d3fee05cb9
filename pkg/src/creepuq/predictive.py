"""The common output of every model: per-point mean, spread and interval."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Two-sided 95% normal quantile; every symmetric interval uses this unless overridden.
DEFAULT_Z = 1.96


@dataclass(frozen=True)
class PredictiveDistribution:
    """Vectorized predictive distribution over ``n`` query points.

    ``std`` is ``None`` for point predictors. ``lower``/``upper`` default to
    ``mean -/+ z * std``; models with asymmetric intervals (quantile
    regression) pass them explicitly.
    """

    mean: np.ndarray
    std: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    z: float = DEFAULT_Z

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "mean", mean)
        if self.std is not None:
            std = np.asarray(self.std, dtype=np.float64).reshape(-1)
            if std.shape != mean.shape:
                raise ValueError("mean and std differ in length")
            if np.any(std < 0):
                raise ValueError("standard deviations must be non-negative")
            object.__setattr__(self, "std", std)
            lower = mean - self.z * std if self.lower is None else np.asarray(self.lower, dtype=np.float64)
            upper = mean + self.z * std if self.upper is None else np.asarray(self.upper, dtype=np.float64)
            if np.any(lower > mean) or np.any(mean > upper):
                raise ValueError("interval must satisfy lower <= mean <= upper")
            object.__setattr__(self, "lower", lower)
            object.__setattr__(self, "upper", upper)

    @property
    def has_uncertainty(self) -> bool:
        return self.std is not None

    def __len__(self):
        return self.mean.shape[0]

    def intervals(self) -> np.ndarray:
        if self.std is None:
            raise ValueError("point predictor has no intervals")
        return np.column_stack([self.lower, self.upper])

    def with_z(self, z: float) -> "PredictiveDistribution":
        """Same mean/std with a symmetric interval at multiplier ``z``."""
        return PredictiveDistribution(self.mean, self.std, z=z)

    def to_dict(self) -> dict:
        out = {"mean": self.mean.tolist(), "z": self.z}
        if self.std is not None:
            out.update(std=self.std.tolist(), lower=self.lower.tolist(), upper=self.upper.tolist())
        return out


def aggregate_draws(draws, z: float = DEFAULT_Z) -> PredictiveDistribution:
    """Mean and population standard deviation (divisor S) over the first axis.

    ``draws`` has shape ``(S, n)``: S sampled predictions at n query points.
    """
    draws = np.asarray(draws, dtype=np.float64)
    if draws.ndim == 1:
        draws = draws[:, None]
    if draws.shape[0] < 2:
        raise ValueError("at least 2 draws are needed to estimate a spread")
    mean = draws.mean(axis=0)
    std = np.sqrt(np.mean((draws - mean) ** 2, axis=0))
    # identical draws give exactly zero spread, free of summation rounding
    same = np.all(draws == draws[0], axis=0)
    mean[same] = draws[0, same]
    std[same] = 0.0
    return PredictiveDistribution(mean, std, z=z)
