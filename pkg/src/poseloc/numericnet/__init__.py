from .core import NonFiniteActivationError, loss_and_grad, time_embedding
from .net import (
    POSE_DIM,
    DenoiserParams,
    TrainConfig,
    denoiser_backward,
    denoiser_forward,
    denoiser_forward_batch,
    init_denoiser,
)
from .optim import AdamState, adam_step, cosine_warmup_lr
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .mlp import mlp_backward, mlp_forward, mlp_init

__all__ = [
    "POSE_DIM",
    "DenoiserParams",
    "TrainConfig",
    "AdamState",
    "NonFiniteActivationError",
    "CheckpointError",
    "adam_step",
    "cosine_warmup_lr",
    "denoiser_backward",
    "denoiser_forward",
    "denoiser_forward_batch",
    "init_denoiser",
    "load_checkpoint",
    "loss_and_grad",
    "mlp_backward",
    "mlp_forward",
    "mlp_init",
    "save_checkpoint",
    "time_embedding",
]
