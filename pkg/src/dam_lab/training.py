"""Gradient-descent learning of memory vectors.

The prediction for neuron ``i`` of training state ``a`` is
``tanh(outer * sum_mu [F(inner * on) - F(inner * off)])`` where ``on``/``off``
are the similarity scores with the neuron clamped to +1/-1. The original
formulation uses ``inner = 1, outer = T**-n``; the modified one uses
``inner = 1/(N T), outer = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import _kernels
from .core import (
    Family,
    Formulation,
    InteractionSpec,
    NetworkConfig,
    Precision,
    as_memories,
    as_states,
)
from .dynamics import OverflowStats

# memories per training state when memory_count is not given
DEFAULT_MEMORY_FACTOR = 10

_FAMILY_CODES = {
    Family.POLYNOMIAL: _kernels.POLYNOMIAL,
    Family.RECTIFIED: _kernels.RECTIFIED,
    Family.LEAKY: _kernels.LEAKY,
    Family.EXPONENTIAL: _kernels.EXPONENTIAL,
}

STEP_MODES = ("row_max", "none")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the learning loop.

    ``step_normalization="row_max"`` rescales each memory's velocity so its
    largest entry moves by exactly the current learning rate; ``"none"`` is
    plain heavy-ball gradient descent.
    """

    initial_lr: float
    lr_decay: float = 0.999
    momentum: float = 0.0
    error_exponent: int = 1
    epochs: int = 500
    memory_count: Optional[int] = None
    init_scale: float = 0.1
    seed: int = 0
    step_normalization: str = "row_max"

    def __post_init__(self):
        if not (math.isfinite(self.initial_lr) and self.initial_lr > 0):
            raise ValueError(f"initial_lr must be > 0, got {self.initial_lr!r}")
        if not 0 < self.lr_decay <= 1:
            raise ValueError(f"lr_decay must be in (0, 1], got {self.lr_decay!r}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum!r}")
        if int(self.error_exponent) != self.error_exponent or self.error_exponent < 1:
            raise ValueError(f"error_exponent must be an integer >= 1, got {self.error_exponent!r}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError(f"epochs must be an integer >= 1, got {self.epochs!r}")
        if self.memory_count is not None and (int(self.memory_count) != self.memory_count
                                              or self.memory_count < 1):
            raise ValueError(f"memory_count must be a positive integer, got {self.memory_count!r}")
        if not (math.isfinite(self.init_scale) and self.init_scale > 0):
            raise ValueError(f"init_scale must be > 0, got {self.init_scale!r}")
        if self.step_normalization not in STEP_MODES:
            raise ValueError(f"step_normalization must be one of {STEP_MODES}")
        object.__setattr__(self, "error_exponent", int(self.error_exponent))
        object.__setattr__(self, "epochs", int(self.epochs))

    def effective_lr(self, epoch: int) -> float:
        return self.initial_lr * self.lr_decay ** epoch


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    effective_lr: float
    max_abs_gradient: float
    overflow: OverflowStats


@dataclass
class TrainTrace:
    records: List[EpochRecord] = field(default_factory=list)
    final_loss: float = float("nan")
    overflow: OverflowStats = field(default_factory=OverflowStats)

    def __len__(self):
        return len(self.records)

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])


def learning_scales(config: NetworkConfig):
    """``(inner, outer)`` scale factors for a network configuration."""
    if config.formulation is Formulation.ORIGINAL:
        return 1.0, config.beta
    return config.beta, 1.0


def _run_kernel(memories, states, spec: InteractionSpec, inner, outer, dtype,
                error_exponent=1, want_grad=True):
    dt = np.dtype(dtype)
    xi = np.ascontiguousarray(memories, dtype=dt)
    Z = np.ascontiguousarray(states, dtype=dt)
    if xi.shape[1] != Z.shape[1]:
        raise ValueError(f"memories have dimension {xi.shape[1]}, states {Z.shape[1]}")
    n = spec.vertex if spec.family is not Family.EXPONENTIAL else 1
    c = dt.type
    return _kernels.forward_backward(
        xi, Z, _FAMILY_CODES[spec.family], n, c(n), c(spec.leak), c(inner), c(outer),
        c(1), int(error_exponent), want_grad)


def tanh_arguments(memories, states, spec: InteractionSpec, inner_scale: float,
                   outer_scale: float, precision: Precision = Precision.DOUBLE) -> np.ndarray:
    """Arguments of ``tanh`` for every state and neuron, shape ``(P, N)``.

    Exposes the scale placement directly: ``outer * sum F(inner * x)``.
    """
    states = as_states(states)
    _, _, h, _, _, _ = _run_kernel(memories, states, spec, inner_scale, outer_scale,
                                   Precision(precision).dtype, want_grad=False)
    return h


def _check_trainable(config: NetworkConfig):
    if (config.interaction.family is Family.EXPONENTIAL
            and config.formulation is Formulation.ORIGINAL):
        raise ValueError("exponential interaction is only trainable in the modified formulation")


def predictions(memories, states, config: NetworkConfig,
                stats: Optional[OverflowStats] = None) -> np.ndarray:
    """Predicted neuron values ``C[a, i]`` in ``(-1, 1)``."""
    memories = as_memories(memories, config.dim)
    states = as_states(states, config.dim)
    inner, outer = learning_scales(config)
    _, _, h, max_arg, max_val, bad = _run_kernel(memories, states, config.interaction,
                                                 inner, outer, config.dtype, want_grad=False)
    if stats is not None:
        stats.observe(bad, max_val, max_arg)
    return np.tanh(h)


def predict(memories, state, i: int, config: NetworkConfig) -> float:
    return float(predictions(memories, state, config)[0, i])


def loss(memories, states, config: NetworkConfig, error_exponent: int = 1,
         stats: Optional[OverflowStats] = None) -> float:
    """``sum_a sum_i (zeta_ai - C_ai) ** (2m)`` over the full batch."""
    memories = as_memories(memories, config.dim)
    states = as_states(states, config.dim)
    inner, outer = learning_scales(config)
    value, _, _, max_arg, max_val, bad = _run_kernel(
        memories, states, config.interaction, inner, outer, config.dtype,
        error_exponent, want_grad=False)
    if stats is not None:
        stats.observe(bad, max_val, max_arg)
    return float(value)


def gradient(memories, states, config: NetworkConfig, error_exponent: int = 1,
             stats: Optional[OverflowStats] = None) -> np.ndarray:
    """Analytic ``dL/dxi`` with shape ``(K, N)``."""
    memories = as_memories(memories, config.dim)
    states = as_states(states, config.dim)
    inner, outer = learning_scales(config)
    _, grad, _, max_arg, max_val, bad = _run_kernel(
        memories, states, config.interaction, inner, outer, config.dtype, error_exponent)
    if stats is not None:
        stats.observe(bad + int((~np.isfinite(grad)).sum()), max_val, max_arg)
    return grad


def init_memories(count: int, dim: int, scale: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, size=(count, dim))


def train(states, config: TrainConfig, network: NetworkConfig):
    """Learn memories for ``states``; returns ``(memories, trace)``.

    Non-finite gradient entries are recorded and left out of the step.
    """
    states = as_states(states, network.dim)
    _check_trainable(network)
    dt = network.dtype
    count = config.memory_count or DEFAULT_MEMORY_FACTOR * states.shape[0]
    memories = init_memories(count, network.dim, config.init_scale, config.seed).astype(dt)
    velocity = np.zeros_like(memories)
    inner, outer = learning_scales(network)
    trace = TrainTrace()
    tiny = np.finfo(dt).tiny
    for epoch in range(config.epochs):
        lr = config.effective_lr(epoch)
        value, grad, _, max_arg, max_val, bad = _run_kernel(
            memories, states, network.interaction, inner, outer, dt, config.error_exponent)
        finite = np.isfinite(grad)
        stats = OverflowStats()
        stats.observe(bad + int(grad.size - finite.sum()), max_val, max_arg)
        if not finite.all():
            grad = np.where(finite, grad, 0)
        if config.step_normalization == "row_max":
            velocity = dt.type(config.momentum) * velocity - grad
            peak = np.abs(velocity).max(axis=1, keepdims=True)
            step = dt.type(lr) * velocity / np.maximum(peak, tiny)
        else:
            velocity = dt.type(config.momentum) * velocity - dt.type(lr) * grad
            step = velocity
        with np.errstate(over="ignore", invalid="ignore"):
            memories = np.clip(memories + step, -1, 1).astype(dt)
        trace.records.append(EpochRecord(epoch, float(value), lr,
                                         float(np.abs(grad).max()), stats))
        trace.overflow.merge(stats)
    final = OverflowStats()
    trace.final_loss = loss(memories, states, network, config.error_exponent, final)
    trace.overflow.merge(final)
    return memories.astype(np.float64), trace
