"""DDPM over 7-dim pose vectors: schedule, forward noising, mixup training, sampling.

State layout is (qw,qx,qy,qz,tx,ty,tz) with translations mapped to [-1,1]
by a per-scene normalization, so that the terminal distribution N(0,I) is
meaningful.  The denoiser predicts the clean pose vector by default; noise
prediction is available behind the config flag.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .encoder import ConditionEmbedding
from .geometry import Pose, quat_normalize
from .numericnet import (
    AdamState,
    DenoiserParams,
    TrainConfig,
    adam_step,
    cosine_warmup_lr,
    denoiser_backward,
    denoiser_forward_batch,
    init_denoiser,
)

DEFAULT_T = 100
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.1


class TrainingDivergedError(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"non-finite loss at training step {step}")
        self.step = step


@dataclass
class DiffusionSchedule:
    """Linear beta schedule with cumulative signal-retention products.

    betas[i] is the variance at timestep t = i+1; alpha_bars has length T+1
    with alpha_bars[0] = 1 so the final sampling step is deterministic.
    """

    T: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    def beta(self, t: int) -> float:
        return float(self.betas[t - 1])

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars[t])


def make_schedule(T: int = DEFAULT_T, beta_start: float = DEFAULT_BETA_START,
                  beta_end: float = DEFAULT_BETA_END) -> DiffusionSchedule:
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError("need 0 < beta_start <= beta_end < 1")
    betas = np.linspace(beta_start, beta_end, T)
    alphas = 1.0 - betas
    alpha_bars = np.concatenate([[1.0], np.cumprod(alphas)])
    return DiffusionSchedule(T, betas, alphas, alpha_bars)


def forward_noise(x0, t: int, eps, sched: DiffusionSchedule) -> np.ndarray:
    """Closed-form q(x_t | x_0) sample: sqrt(ab_t) x0 + sqrt(1-ab_t) eps."""
    if not 1 <= t <= sched.T:
        raise ValueError(f"t={t} outside [1, {sched.T}]")
    ab = sched.alpha_bar(t)
    return np.sqrt(ab) * np.asarray(x0, dtype=np.float64) + np.sqrt(1.0 - ab) * np.asarray(eps)


# ---------------------------------------------------------------------------
# scene normalization


@dataclass
class SceneNormalization:
    """Affine map putting training translations into [-1,1]^3."""

    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    scale: float = 1.0

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @staticmethod
    def fit(poses) -> "SceneNormalization":
        t = np.stack([p.translation for p in poses])
        lo, hi = t.min(axis=0), t.max(axis=0)
        half = (hi - lo) / 2.0
        return SceneNormalization((lo + hi) / 2.0, max(float(half.max()), 1e-9))

    def pose_to_vec(self, p: Pose) -> np.ndarray:
        return np.concatenate([p.rotation, (p.translation - self.center) / self.scale])

    def vec_to_pose(self, x) -> Pose:
        x = np.asarray(x, dtype=np.float64)
        return Pose(quat_normalize(x[:4]), x[4:] * self.scale + self.center)

    def to_dict(self) -> dict:
        return {"center": [float(c) for c in self.center], "scale": float(self.scale)}

    @staticmethod
    def from_dict(d) -> "SceneNormalization":
        return SceneNormalization(np.array(d["center"]), float(d["scale"]))


# ---------------------------------------------------------------------------
# training records and mixup conditioning


@dataclass
class TrainRecord:
    """Ground-truth pose with its image embedding and tagged text embeddings."""

    pose: Pose
    image_embedding: ConditionEmbedding
    text_embeddings: list[tuple[str, ConditionEmbedding]] = field(default_factory=list)
    record_id: str = ""


def mixup_select(record: TrainRecord, beta_swap: float, rng) -> ConditionEmbedding:
    """Text embedding (uniform over the record's tags) with probability
    beta_swap, otherwise the image embedding."""
    if record.text_embeddings and rng.random() < beta_swap:
        _, emb = record.text_embeddings[rng.integers(len(record.text_embeddings))]
        return emb
    return record.image_embedding


def _batch_timesteps(cfg: TrainConfig, sched: DiffusionSchedule, size: int, rng) -> np.ndarray:
    if cfg.timestep_mode == "distinct":
        k = min(cfg.distinct_timesteps, sched.T)
        pool = rng.choice(np.arange(1, sched.T + 1), size=k, replace=False)
        return pool[rng.integers(0, k, size)]
    return rng.integers(1, sched.T + 1, size)


# ---------------------------------------------------------------------------
# training


def train(dataset, cfg: TrainConfig, beta_swap: float, sched: DiffusionSchedule,
          norm: SceneNormalization | None = None, params: DenoiserParams | None = None,
          start_step: int = 0):
    """Mixup training loop; returns (params, norm, history).

    history rows are (step, lr, loss).  Deterministic given (cfg.seed, config,
    dataset order); pass params/start_step to resume a checkpoint.
    """
    if not dataset:
        raise ValueError("empty dataset")
    if norm is None:
        norm = SceneNormalization.fit([r.pose for r in dataset])
    if params is None:
        params = init_denoiser(cfg)
    rng = np.random.default_rng([cfg.seed, start_step])
    x0_all = np.stack([norm.pose_to_vec(r.pose) for r in dataset])
    state = AdamState.for_params(params)
    history = []
    for step in range(start_step, cfg.total_steps):
        idx = rng.integers(0, len(dataset), cfg.batch_size)
        cond = np.stack([mixup_select(dataset[i], beta_swap, rng).vector for i in idx])
        t = _batch_timesteps(cfg, sched, cfg.batch_size, rng)
        eps = rng.standard_normal((cfg.batch_size, 7))
        x0 = x0_all[idx]
        ab = sched.alpha_bars[t][:, None]
        x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
        target = x0 if cfg.prediction_target == "x0" else eps
        loss, grads = denoiser_backward(params, (x_t, t, cond), target, cfg.loss_kind)
        if not np.isfinite(loss):
            raise TrainingDivergedError(step)
        adam_step(params, grads, state, step, cfg)
        history.append((step, cosine_warmup_lr(step, cfg), loss))
    return params, norm, history


def write_loss_history(path, history) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step", "lr", "loss"])
        for step, lr, loss in history:
            w.writerow([step, repr(float(lr)), repr(float(loss))])


# ---------------------------------------------------------------------------
# ancestral sampling


def sample(params: DenoiserParams, cond: ConditionEmbedding, M: int,
           sched: DiffusionSchedule, norm: SceneNormalization, rng) -> list[Pose]:
    """Draw M poses from p(P | cond) by conditional ancestral sampling.

    Chains are independent (one child RNG stream per chain); the t=1 update
    is deterministic because alpha_bar(0) = 1.  Quaternion components are
    renormalized after every step and at output.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    streams = rng.spawn(M)
    x = np.stack([s.standard_normal(7) for s in streams])
    cond_b = np.tile(cond.vector, (M, 1))
    for t in range(sched.T, 0, -1):
        pred = denoiser_forward_batch(params, x, np.full(M, t), cond_b)
        ab_prev = sched.alpha_bar(t - 1)
        mu = np.sqrt(ab_prev) * pred
        if t > 1:
            z = np.stack([s.standard_normal(7) for s in streams])
            x = mu + np.sqrt(1.0 - ab_prev) * z
        else:
            x = mu
        qn = np.linalg.norm(x[:, :4], axis=1, keepdims=True)
        x[:, :4] /= np.maximum(qn, 1e-300)
    return [norm.vec_to_pose(row) for row in x]
