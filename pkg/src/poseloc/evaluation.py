"""Relative Distribution Accuracy, the uniform-random baseline, and MC-Dropout.

A sample "hits" when its translation error is within k translation units
(default unit: 10% of the scene scale) AND its rotation error is within
k rotation units (default 1 degree per unit).  RDA is the hit fraction of
the predicted samples divided by the mean hit fraction of uniformly random
poses drawn over the scene bounds.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .diffusion import SceneNormalization, TrainRecord, mixup_select
from .encoder import ConditionEmbedding
from .geometry import Pose, rotation_error_deg, translation_error
from .numericnet import (
    AdamState,
    DenoiserParams,
    TrainConfig,
    adam_step,
    loss_and_grad,
    mlp_backward,
    mlp_forward,
    mlp_init,
)
from .numericnet.optim import cosine_warmup_lr


@dataclass
class RDAConfig:
    k_values: tuple = (5, 10, 15)
    translation_unit: float = 0.10  # fraction of scene scale per unit of k
    rotation_unit: float = 1.0  # degrees per unit of k
    random_trials: int = 20
    require_rotation: bool = True

    def __post_init__(self):
        if any(k <= 0 for k in self.k_values):
            raise ValueError("k values must be positive")
        if self.translation_unit <= 0 or self.rotation_unit <= 0:
            raise ValueError("units must be positive")
        if self.random_trials < 1:
            raise ValueError("random_trials must be >= 1")


@dataclass
class SceneScale:
    """Bounding-box diagonal of the training camera positions."""

    value: float

    def __post_init__(self):
        if not self.value > 0:
            raise ValueError("scene scale must be positive")

    @staticmethod
    def fit(poses) -> "SceneScale":
        t = np.stack([p.translation for p in poses])
        return SceneScale(float(np.linalg.norm(t.max(axis=0) - t.min(axis=0))))


@dataclass
class Bounds:
    """Axis-aligned box for drawing random camera positions."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64).reshape(3)
        self.hi = np.asarray(self.hi, dtype=np.float64).reshape(3)
        if np.any(self.hi < self.lo) or np.all(self.hi == self.lo):
            raise ValueError("degenerate bounds")

    @staticmethod
    def fit(poses) -> "Bounds":
        t = np.stack([p.translation for p in poses])
        return Bounds(t.min(axis=0), t.max(axis=0))


def hit_test(sample: Pose, gt: Pose, k: float, cfg: RDAConfig, scale: SceneScale) -> bool:
    """Closed-ball joint threshold on translation and (optionally) rotation."""
    if translation_error(sample, gt) > k * cfg.translation_unit * scale.value:
        return False
    if cfg.require_rotation and rotation_error_deg(sample, gt) > k * cfg.rotation_unit:
        return False
    return True


def accuracy(samples, gt: Pose, k: float, cfg: RDAConfig, scale: SceneScale) -> float:
    if not samples:
        raise ValueError("empty sample list")
    return sum(hit_test(s, gt, k, cfg, scale) for s in samples) / len(samples)


def random_rotations(rng, m: int) -> np.ndarray:
    """Uniform unit quaternions on SO(3) (subgroup-algorithm construction)."""
    u1, u2, u3 = rng.random(m), rng.random(m), rng.random(m)
    a, b = np.sqrt(1.0 - u1), np.sqrt(u1)
    return np.column_stack(
        [a * np.sin(2 * np.pi * u2), a * np.cos(2 * np.pi * u2),
         b * np.sin(2 * np.pi * u3), b * np.cos(2 * np.pi * u3)]
    )


def random_poses(rng, m: int, bounds: Bounds) -> list[Pose]:
    q = random_rotations(rng, m)
    t = rng.uniform(bounds.lo, bounds.hi, (m, 3))
    return [Pose(q[i], t[i]) for i in range(m)]


def acc_rand(gt: Pose, m: int, k: float, cfg: RDAConfig, scale: SceneScale,
             bounds: Bounds, rng):
    """Mean and std of the hit fraction of `m` uniform poses over random_trials
    fresh trials."""
    if m < 1:
        raise ValueError("m must be >= 1")
    accs = [accuracy(random_poses(rng, m, bounds), gt, k, cfg, scale)
            for _ in range(cfg.random_trials)]
    return float(np.mean(accs)), float(np.std(accs))


@dataclass
class RDAEntry:
    granularity: str
    k: float
    n_samples: int
    acc_pred: float
    acc_rand_mean: float
    acc_rand_std: float
    rda: float | None  # None when acc_rand_mean == 0 (undefined)


def rda(samples, gt: Pose, k: float, cfg: RDAConfig, scale: SceneScale,
        bounds: Bounds, rng, granularity: str = "all") -> RDAEntry:
    acc_pred = accuracy(samples, gt, k, cfg, scale)
    mean_rand, std_rand = acc_rand(gt, len(samples), k, cfg, scale, bounds, rng)
    ratio = acc_pred / mean_rand if mean_rand > 0 else None
    return RDAEntry(granularity, k, len(samples), acc_pred, mean_rand, std_rand, ratio)


def rda_pooled(sample_sets, gts, k: float, cfg: RDAConfig, scale: SceneScale,
               bounds: Bounds, rng, granularity: str = "all") -> RDAEntry:
    """RDA over several (samples, gt) queries: ratio of pooled means, which
    stays defined as long as any random trial hits."""
    if len(sample_sets) != len(gts):
        raise ValueError("sample_sets and gts must align")
    preds, rands = [], []
    n_total = 0
    for samples, gt in zip(sample_sets, gts):
        preds.append(accuracy(samples, gt, k, cfg, scale))
        mean_rand, _ = acc_rand(gt, len(samples), k, cfg, scale, bounds, rng)
        rands.append(mean_rand)
        n_total += len(samples)
    acc_pred = float(np.mean(preds))
    mean_rand = float(np.mean(rands))
    ratio = acc_pred / mean_rand if mean_rand > 0 else None
    return RDAEntry(granularity, k, n_total, acc_pred, mean_rand,
                    float(np.std(rands)), ratio)


# ---------------------------------------------------------------------------
# report emission


def write_report(path, entries) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["granularity", "k", "M", "acc_pred", "acc_rand_mean",
                    "acc_rand_std", "rda"])
        for e in entries:
            w.writerow([e.granularity, repr(float(e.k)), e.n_samples,
                        repr(e.acc_pred), repr(e.acc_rand_mean), repr(e.acc_rand_std),
                        "" if e.rda is None else repr(e.rda)])


def read_report(path) -> list[RDAEntry]:
    out = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            out.append(RDAEntry(
                row["granularity"], float(row["k"]), int(row["M"]),
                float(row["acc_pred"]), float(row["acc_rand_mean"]),
                float(row["acc_rand_std"]),
                None if row["rda"] == "" else float(row["rda"]),
            ))
    return out


# ---------------------------------------------------------------------------
# MC-Dropout baseline: direct embedding -> pose regressor, dropout kept on at
# inference; repeated stochastic passes form the pose distribution.


@dataclass
class MCDropoutModel:
    params: DenoiserParams  # wraps the MLP tensor dict + config echo
    norm: SceneNormalization

    @property
    def config(self) -> TrainConfig:
        return self.params.config


def mcdropout_train(dataset, cfg: TrainConfig, beta_swap: float = 0.0,
                    norm: SceneNormalization | None = None) -> tuple[MCDropoutModel, list]:
    """Same loss/optimizer stack as the denoiser, but a plain regressor with
    dropout active during training."""
    if not dataset:
        raise ValueError("empty dataset")
    if norm is None:
        norm = SceneNormalization.fit([r.pose for r in dataset])
    sizes = [cfg.cond_dim] + [cfg.hidden_dim] * max(cfg.layers, 1) + [7]
    params = DenoiserParams(cfg, mlp_init(sizes, cfg.seed))
    state = AdamState.for_params(params)
    rng = np.random.default_rng([cfg.seed, 1])
    x0_all = np.stack([norm.pose_to_vec(r.pose) for r in dataset])
    history = []
    for step in range(cfg.total_steps):
        idx = rng.integers(0, len(dataset), cfg.batch_size)
        cond = np.stack([mixup_select(dataset[i], beta_swap, rng).vector for i in idx])
        pred, caches = mlp_forward(params.tensors, cond, cfg.dropout_p, rng,
                                   return_cache=True)
        loss, dpred = loss_and_grad(pred, x0_all[idx], cfg.loss_kind)
        grads = mlp_backward(params.tensors, caches, dpred)
        adam_step(params, grads, state, step, cfg)
        history.append((step, cosine_warmup_lr(step, cfg), loss))
    return MCDropoutModel(params, norm), history


def mcdropout_sample(model: MCDropoutModel, cond: ConditionEmbedding, m: int,
                     rng) -> list[Pose]:
    """M stochastic forward passes with dropout active."""
    if m < 1:
        raise ValueError("m must be >= 1")
    cfg = model.config
    x = np.tile(cond.vector, (m, 1))
    out = mlp_forward(model.params.tensors, x, cfg.dropout_p, rng)
    return [model.norm.vec_to_pose(row) for row in out]
