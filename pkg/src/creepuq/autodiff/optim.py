"""First-order optimizers over flat parameter vectors.

Each step function returns ``(new_params, new_state)`` and never mutates its
inputs. States are plain dicts so they serialize trivially.
"""

from __future__ import annotations

import numpy as np


def _check(params, grads):
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise ValueError(f"params shape {params.shape} does not match grads shape {grads.shape}")
    return params, grads


def _zeros_like_state(state, key, like):
    v = None if state is None else state.get(key)
    return np.zeros_like(like) if v is None else v


def sgd_step(params, grads, lr: float, momentum_state=None, nesterov_coeff: float = 0.0):
    """SGD with Nesterov momentum.

    velocity <- mu * velocity + g
    params   <- params - lr * (g + mu * velocity)
    """
    params, grads = _check(params, grads)
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    if not 0.0 <= nesterov_coeff < 1.0:
        raise ValueError("momentum coefficient must lie in [0, 1)")
    velocity = _zeros_like_state(momentum_state, "velocity", params)
    velocity = nesterov_coeff * velocity + grads
    step = grads + nesterov_coeff * velocity
    return params - lr * step, {"velocity": velocity}


def adam_step(params, grads, lr: float, state=None, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8):
    params, grads = _check(params, grads)
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    t = (state or {}).get("t", 0) + 1
    m = beta1 * _zeros_like_state(state, "m", params) + (1 - beta1) * grads
    v = beta2 * _zeros_like_state(state, "v", params) + (1 - beta2) * grads * grads
    m_hat = m / (1 - beta1 ** t)
    v_hat = v / (1 - beta2 ** t)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps), {"t": t, "m": m, "v": v}


def adagrad_step(params, grads, lr: float, state=None, eps: float = 1e-8):
    params, grads = _check(params, grads)
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    acc = _zeros_like_state(state, "sum_sq", params) + grads * grads
    t = (state or {}).get("t", 0) + 1
    return params - lr * grads / (np.sqrt(acc) + eps), {"t": t, "sum_sq": acc}


def rmsprop_step(params, grads, lr: float, state=None, decay: float = 0.9, eps: float = 1e-8):
    params, grads = _check(params, grads)
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    sq = decay * _zeros_like_state(state, "mean_sq", params) + (1 - decay) * grads * grads
    t = (state or {}).get("t", 0) + 1
    return params - lr * grads / (np.sqrt(sq) + eps), {"t": t, "mean_sq": sq}


OPTIMIZERS = {
    "sgd": sgd_step,
    "adam": adam_step,
    "adagrad": adagrad_step,
    "rmsprop": rmsprop_step,
}


def make_optimizer(name: str, lr: float, **options):
    """Return ``step(params, grads, state) -> (params, state)`` for a named rule."""
    try:
        rule = OPTIMIZERS[name]
    except KeyError:
        raise ValueError(f"unknown optimizer {name!r}; choose from {sorted(OPTIMIZERS)}") from None
    if name == "sgd":
        coeff = options.get("nesterov", options.get("momentum", 0.0))
        return lambda p, g, s: rule(p, g, lr, s, coeff)
    return lambda p, g, s: rule(p, g, lr, s, **options)
