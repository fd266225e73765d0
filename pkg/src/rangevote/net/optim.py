"""Adam optimizer and the training learning-rate schedule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams


@dataclass
class AdamState:
    """First/second moment accumulators, shaped like the trainable tensors."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0


def init_adam(params: ModelParams) -> AdamState:
    names = params.trainable_names()
    return AdamState(m={n: np.zeros_like(params[n]) for n in names},
                     v={n: np.zeros_like(params[n]) for n in names})


def adam_step(params: ModelParams, grads: dict[str, np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    """One bias-corrected Adam update, applied to params in place."""
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise ValueError(f"non-finite gradient for {name}")
    state.step += 1
    bc1 = 1.0 - beta1 ** state.step
    bc2 = 1.0 - beta2 ** state.step
    for name in state.m:
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        params[name] -= (lr * (m / bc1) / (np.sqrt(v / bc2) + eps)).astype(params[name].dtype)
    return state


def lr_schedule(epoch: int, total_epochs: int = 50, base_lr: float = 1e-3,
                final_lr: float = 1e-6, flat_epochs: int | None = None) -> float:
    """Flat learning rate, then geometric decay to final_lr by total_epochs.

    With the defaults: 1e-3 through epoch 39, then decaying by a constant
    factor per epoch to reach 1e-6 at epoch 50. flat_epochs defaults to 80%
    of total_epochs, preserving that shape for compressed schedules.
    """
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    if flat_epochs is None:
        flat_epochs = int(round(0.8 * total_epochs))
    if epoch < flat_epochs or flat_epochs >= total_epochs:
        return base_lr
    frac = min(1.0, (epoch - flat_epochs) / (total_epochs - flat_epochs))
    return base_lr * (final_lr / base_lr) ** frac
