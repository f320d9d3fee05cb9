"""Fully connected ReLU networks evaluated from a flat parameter vector."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor import Tensor, dense, relu


@dataclass(frozen=True)
class MlpArchitecture:
    """Layer widths ``(input, hidden..., output)``.

    Hidden layers use ReLU, the output layer is affine. Parameters are laid
    out layer by layer, each layer as its row-major ``(w_in, w_out)`` weight
    matrix followed by its ``w_out`` biases.
    """

    layer_widths: tuple[int, ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 3:
            raise ValueError("an MLP needs an input width, at least one hidden layer and an output width")
        if any(w <= 0 for w in widths):
            raise ValueError(f"layer widths must be positive, got {widths}")

    @classmethod
    def of(cls, input_width: int, hidden: Sequence[int], output_width: int = 1) -> "MlpArchitecture":
        return cls((input_width, *hidden, output_width))

    @property
    def input_width(self) -> int:
        return self.layer_widths[0]

    @property
    def n_layers(self) -> int:
        return len(self.layer_widths) - 1

    @property
    def n_params(self) -> int:
        w = self.layer_widths
        return sum((w[i] + 1) * w[i + 1] for i in range(len(w) - 1))

    def layer_slices(self) -> list[tuple[slice, slice, tuple[int, int]]]:
        """(weight slice, bias slice, weight shape) for every layer."""
        out = []
        start = 0
        w = self.layer_widths
        for i in range(len(w) - 1):
            n_w = w[i] * w[i + 1]
            out.append((slice(start, start + n_w), slice(start + n_w, start + n_w + w[i + 1]),
                        (w[i], w[i + 1])))
            start += n_w + w[i + 1]
        return out

    def __call__(self, params, x, dropout_masks=None):
        return forward(self, params, x, dropout_masks)


def init_params(arch: MlpArchitecture, rng: np.random.Generator) -> np.ndarray:
    """Uniform in ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` for weights and biases."""
    params = np.empty(arch.n_params)
    for w_sl, b_sl, (fan_in, _) in arch.layer_slices():
        bound = 1.0 / np.sqrt(fan_in)
        params[w_sl] = rng.uniform(-bound, bound, w_sl.stop - w_sl.start)
        params[b_sl] = rng.uniform(-bound, bound, b_sl.stop - b_sl.start)
    return params


def forward(arch: MlpArchitecture, params, x, dropout_masks=None):
    """Network output for every row of ``x``, shape ``(n,)``.

    ``params`` may be a plain array (numpy evaluation) or a :class:`Tensor`
    (recorded for differentiation). ``dropout_masks`` holds one already
    rescaled multiplicative mask per hidden layer.
    """
    differentiable = isinstance(params, Tensor)
    if not differentiable:
        params = np.asarray(params, dtype=np.float64)
    if params.shape != (arch.n_params,):
        raise ValueError(f"expected {arch.n_params} parameters, got shape {params.shape}")
    h = x.value if isinstance(x, Tensor) and not differentiable else x
    h = np.asarray(h, dtype=np.float64) if not isinstance(h, Tensor) else h
    if h.ndim != 2 or h.shape[1] != arch.input_width:
        raise ValueError(f"expected input with {arch.input_width} columns, got shape {h.shape}")
    slices = arch.layer_slices()
    last = len(slices) - 1
    for i, (w_sl, b_sl, shape) in enumerate(slices):
        if differentiable:
            h = dense(h, params, w_sl, b_sl, shape)
        else:
            h = h @ params[w_sl].reshape(shape) + params[b_sl]
        if i < last:
            h = relu(h) if differentiable else np.maximum(h, 0.0)
            if dropout_masks is not None:
                h = h * dropout_masks[i]
    return h.reshape(-1) if differentiable else h[:, 0]


def dropout_masks(arch: MlpArchitecture, n_rows: int, rate: float, rng: np.random.Generator) -> list[np.ndarray]:
    """Inverted-dropout masks (kept units scaled by ``1/(1-rate)``)."""
    keep = 1.0 - rate
    return [(rng.random((n_rows, w)) < keep) / keep for w in arch.layer_widths[1:-1]]
