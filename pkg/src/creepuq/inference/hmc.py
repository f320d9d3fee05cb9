"""Hamiltonian Monte Carlo with No-U-Turn trajectory building.

Trajectories double until either end starts moving back toward the other
(``p . (theta_plus - theta_minus) < 0``); the next state is drawn from the
trajectory with multinomial weights ``exp(-H)``. During warmup the step
size is tuned by dual averaging toward a target acceptance statistic.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..autodiff.tensor import value_and_grad

logger = logging.getLogger(__name__)

MAX_DELTA_H = 1000.0


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class LogDensityTarget:
    """Unnormalized log density with its gradient.

    ``fn(theta) -> (log_density, gradient)``.
    """

    dim: int
    fn: Callable[[np.ndarray], tuple[float, np.ndarray]]

    @classmethod
    def from_tensor_fn(cls, dim: int, fn) -> "LogDensityTarget":
        """Build from ``fn(theta: Tensor) -> scalar Tensor`` via reverse-mode AD."""
        return cls(dim, value_and_grad(fn))

    def __call__(self, theta):
        # a non-finite density is reported as -inf so the sampler flags a divergence
        with np.errstate(over="ignore", invalid="ignore"):
            try:
                logp, g = self.fn(theta)
            except FloatingPointError:
                return -math.inf, np.zeros(self.dim)
        if not np.isfinite(logp) or not np.all(np.isfinite(g)):
            return -math.inf, np.zeros(self.dim)
        return logp, g


@dataclass(frozen=True)
class PosteriorSamples:
    samples: np.ndarray
    divergent: np.ndarray
    tree_depths: np.ndarray
    accept_stats: np.ndarray
    step_size: float
    inv_mass: np.ndarray
    seed: int
    n_warmup: int
    extra: dict = field(default_factory=dict)

    @property
    def n_divergent(self) -> int:
        return int(self.divergent.sum())

    def diagnostics(self) -> dict:
        return {
            "n_samples": int(self.samples.shape[0]),
            "n_warmup": self.n_warmup,
            "n_divergent": self.n_divergent,
            "mean_tree_depth": float(self.tree_depths.mean()) if self.tree_depths.size else 0.0,
            "max_tree_depth": int(self.tree_depths.max()) if self.tree_depths.size else 0,
            "mean_accept_stat": float(self.accept_stats.mean()) if self.accept_stats.size else 0.0,
            "step_size": self.step_size,
            "seed": self.seed,
        }

    def to_dict(self) -> dict:
        return {"samples": self.samples.tolist(), "inv_mass": self.inv_mass.tolist(), **self.diagnostics()}


@dataclass
class _State:
    theta: np.ndarray
    p: np.ndarray
    logp: float
    grad: np.ndarray


def _step(state: _State, eps: float, target, inv_mass) -> _State:
    p = state.p + 0.5 * eps * state.grad
    theta = state.theta + eps * inv_mass * p
    logp, grad = target(theta)
    p = p + 0.5 * eps * grad
    return _State(theta, p, logp, grad)


def leapfrog(theta, momentum, step_size: float, n_steps: int, target, inv_mass=None):
    """Integrate Hamilton's equations with ``n_steps`` leapfrog steps.

    Returns ``(theta, momentum)``. Volume preserving and reversible: negating
    the final momentum and integrating again returns to the start.
    """
    if step_size <= 0:
        raise ValueError("step size must be positive")
    theta = np.array(theta, dtype=np.float64)
    inv_mass = np.ones_like(theta) if inv_mass is None else inv_mass
    logp, grad = target(theta)
    state = _State(theta, np.array(momentum, dtype=np.float64), logp, grad)
    for _ in range(n_steps):
        state = _step(state, step_size, target, inv_mass)
    return state.theta, state.p


def hamiltonian(logp: float, p: np.ndarray, inv_mass) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        return -logp + 0.5 * float(np.sum(inv_mass * p * p))


@dataclass
class _Tree:
    left: _State
    right: _State
    proposal: _State
    log_weight: float
    stop: bool
    divergent: bool
    sum_accept: float
    n_steps: int


def _u_turn(left: _State, right: _State, inv_mass) -> bool:
    span = right.theta - left.theta
    return float(span @ (inv_mass * left.p)) < 0 or float(span @ (inv_mass * right.p)) < 0


def _build_tree(state: _State, direction: int, depth: int, eps: float, H0: float, target,
                inv_mass, rng) -> _Tree:
    if depth == 0:
        new = _step(state, direction * eps, target, inv_mass)
        H = hamiltonian(new.logp, new.p, inv_mass) if np.isfinite(new.logp) else math.inf
        delta = H - H0
        if not np.isfinite(delta):
            delta = math.inf
        divergent = delta > MAX_DELTA_H
        accept = math.exp(-delta) if delta > 0 else 1.0
        return _Tree(new, new, new, -delta, divergent, divergent, min(1.0, accept), 1)

    first = _build_tree(state, direction, depth - 1, eps, H0, target, inv_mass, rng)
    if first.stop:
        return first
    edge = first.right if direction > 0 else first.left
    second = _build_tree(edge, direction, depth - 1, eps, H0, target, inv_mass, rng)
    n_steps = first.n_steps + second.n_steps
    sum_accept = first.sum_accept + second.sum_accept
    if second.stop:
        return _Tree(first.left, first.right, first.proposal, first.log_weight, True,
                     second.divergent, sum_accept, n_steps)
    log_weight = np.logaddexp(first.log_weight, second.log_weight)
    proposal = first.proposal
    if rng.random() < math.exp(second.log_weight - log_weight):
        proposal = second.proposal
    left, right = (first.left, second.right) if direction > 0 else (second.left, first.right)
    return _Tree(left, right, proposal, log_weight, _u_turn(left, right, inv_mass), False,
                 sum_accept, n_steps)


def _nuts_transition(current: _State, eps: float, target, inv_mass, max_depth: int, rng):
    p0 = rng.standard_normal(current.theta.shape) / np.sqrt(inv_mass)
    start = _State(current.theta, p0, current.logp, current.grad)
    H0 = hamiltonian(start.logp, p0, inv_mass)
    left = right = start
    proposal = current
    log_weight = 0.0
    sum_accept, n_steps, depth, divergent = 0.0, 0, 0, False
    while depth < max_depth:
        direction = 1 if rng.random() < 0.5 else -1
        edge = right if direction > 0 else left
        tree = _build_tree(edge, direction, depth, eps, H0, target, inv_mass, rng)
        sum_accept += tree.sum_accept
        n_steps += tree.n_steps
        depth += 1
        if tree.divergent:
            divergent = True
        if tree.stop:
            break
        if direction > 0:
            right = tree.right
        else:
            left = tree.left
        # biased progressive sampling favours the newer half
        if rng.random() < min(1.0, math.exp(tree.log_weight - log_weight)):
            proposal = tree.proposal
        log_weight = np.logaddexp(log_weight, tree.log_weight)
        if _u_turn(left, right, inv_mass):
            break
    next_state = _State(proposal.theta, proposal.p, proposal.logp, proposal.grad)
    return next_state, sum_accept / max(n_steps, 1), depth, divergent


def find_reasonable_step_size(state: _State, target, inv_mass, rng) -> float:
    """Double or halve a trial step until one-step acceptance crosses 1/2."""
    eps = 1.0
    p = rng.standard_normal(state.theta.shape) / np.sqrt(inv_mass)
    H0 = hamiltonian(state.logp, p, inv_mass)

    def log_accept(e):
        new = _step(_State(state.theta, p, state.logp, state.grad), e, target, inv_mass)
        H = hamiltonian(new.logp, new.p, inv_mass)
        return H0 - H if np.isfinite(H) else -math.inf

    a = log_accept(eps)
    direction = 1.0 if a > math.log(0.5) else -1.0
    for _ in range(100):
        if direction > 0 and not a > math.log(0.5):
            break
        if direction < 0 and not a < math.log(0.5):
            break
        eps = eps * (2.0 ** direction)
        a = log_accept(eps)
    return eps


class DualAveraging:
    """Step-size adaptation (gamma=0.05, t0=10, kappa=0.75)."""

    def __init__(self, eps0: float, target_accept: float, gamma=0.05, t0=10.0, kappa=0.75):
        self.mu = math.log(10.0 * eps0)
        self.target = target_accept
        self.gamma, self.t0, self.kappa = gamma, t0, kappa
        self.h_bar = 0.0
        self.log_eps_bar = 0.0
        self.m = 0

    def update(self, accept_stat: float) -> float:
        self.m += 1
        m = self.m
        w = 1.0 / (m + self.t0)
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_stat)
        log_eps = self.mu - math.sqrt(m) / self.gamma * self.h_bar
        eta = m ** (-self.kappa)
        self.log_eps_bar = eta * log_eps + (1.0 - eta) * self.log_eps_bar
        return math.exp(log_eps)

    @property
    def final_step_size(self) -> float:
        return math.exp(self.log_eps_bar)


def _mass_windows(n_warmup: int, init_buffer=75, term_buffer=50, base_window=25):
    """End indices (exclusive) of slow adaptation windows, Stan layout."""
    if n_warmup < init_buffer + term_buffer + base_window:
        init_buffer = int(0.15 * n_warmup)
        term_buffer = int(0.1 * n_warmup)
        base_window = n_warmup - init_buffer - term_buffer
    ends = []
    start, size = init_buffer, base_window
    last = n_warmup - term_buffer
    while start < last:
        end = start + size
        if end + 2 * size > last:
            end = last
        ends.append((start, end))
        start, size = end, size * 2
    return ends


def nuts_sample(target: LogDensityTarget, n_warmup: int, n_samples: int, seed: int,
                target_accept: float = 0.8, init=None, max_tree_depth: int = 10,
                adapt_mass: bool = False, max_divergent_fraction: float = 0.25,
                step_size: float | None = None) -> PosteriorSamples:
    """Draw ``n_samples`` post-warmup states with NUTS.

    Divergent transitions are flagged and left out of the returned samples;
    more than ``max_divergent_fraction`` of them raises :class:`SamplerError`.
    With ``adapt_mass`` a diagonal inverse mass matrix is estimated over
    doubling warmup windows; otherwise the mass matrix is the identity.
    """
    if n_warmup < 10:
        raise ValueError("n_warmup must be at least 10")
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    theta = np.zeros(target.dim) if init is None else np.array(init, dtype=np.float64)
    logp, grad = target(theta)
    if not np.isfinite(logp):
        raise SamplerError("log density is not finite at the initial point")
    state = _State(theta, np.zeros_like(theta), logp, grad)
    inv_mass = np.ones(target.dim)
    eps = step_size or find_reasonable_step_size(state, target, inv_mass, rng)
    adapter = DualAveraging(eps, target_accept)
    windows = _mass_windows(n_warmup) if adapt_mass else []
    window_draws: list[np.ndarray] = []

    for it in range(n_warmup):
        state, accept, _, _ = _nuts_transition(state, eps, target, inv_mass, max_tree_depth, rng)
        eps = adapter.update(accept)
        if windows and windows[0][0] <= it < windows[0][1]:
            window_draws.append(state.theta)
            if it == windows[0][1] - 1:
                draws = np.array(window_draws)
                n = draws.shape[0]
                var = draws.var(axis=0, ddof=1) if n > 1 else np.ones(target.dim)
                inv_mass = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
                window_draws = []
                windows.pop(0)
                eps = find_reasonable_step_size(state, target, inv_mass, rng)
                adapter = DualAveraging(eps, target_accept)
    eps = adapter.final_step_size

    samples, divergent, depths, accepts = [], [], [], []
    for _ in range(n_samples):
        state, accept, depth, div = _nuts_transition(state, eps, target, inv_mass, max_tree_depth, rng)
        samples.append(state.theta)
        divergent.append(div)
        depths.append(depth)
        accepts.append(accept)
    divergent = np.array(divergent, dtype=bool)
    if divergent.mean() > max_divergent_fraction:
        raise SamplerError(
            f"{divergent.sum()} of {n_samples} transitions diverged; use a smaller step size "
            "or a higher target acceptance")
    samples = np.array(samples)[~divergent]
    return PosteriorSamples(samples, divergent, np.array(depths), np.array(accepts), eps, inv_mass,
                            seed, n_warmup)
