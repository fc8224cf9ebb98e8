"""Adam with a linear-warmup + cosine-decay learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .net import DenoiserParams, TrainConfig

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def cosine_warmup_lr(step: int, cfg: TrainConfig) -> float:
    """lr(step): linear 0 -> learning_rate over warmup_steps, cosine to 0 at total_steps."""
    base = cfg.learning_rate
    if step >= cfg.total_steps:
        return 0.0
    if cfg.warmup_steps > 0 and step < cfg.warmup_steps:
        return base * step / cfg.warmup_steps
    span = cfg.total_steps - cfg.warmup_steps
    if span <= 0:
        return base
    progress = (step - cfg.warmup_steps) / span
    return base * 0.5 * (1.0 + math.cos(math.pi * progress))


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @staticmethod
    def for_params(params: DenoiserParams) -> "AdamState":
        return AdamState(params.zeros_like(), params.zeros_like())


def adam_step(params: DenoiserParams, grads, state: AdamState, step_index: int,
              cfg: TrainConfig) -> DenoiserParams:
    """One in-place Adam update at lr(step_index); returns params."""
    lr = cosine_warmup_lr(step_index, cfg)
    t = step_index + 1
    bc1 = 1.0 - ADAM_BETA1 ** t
    bc2 = 1.0 - ADAM_BETA2 ** t
    for name, p in params.tensors.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    return params
