"""Render-and-compare pose refinement: similarity gate, tangent-space ascent, accept/reject.

Each candidate pose is rendered into the Gaussian scene, encoded, and scored
by cosine similarity against the text embedding.  Candidates below tau1 are
rejected outright; survivors are improved by Adam ascent on the 6-dim tangent
(gradient from central finite differences through render+encode, applied via
retraction), keeping the best-scoring iterate; results below tau2 after
ascent are rejected.  Analytic gradients through the rasterizer are out of
scope; finite differences keep the procedure encoder-agnostic.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .encoder import ConditionEmbedding, cosine_similarity, synthetic_encode
from .geometry import Pose, TangentDelta, retract
from .splat import Camera, GaussianScene, soft_landmark_histogram

DEFAULT_TAU1 = 0.17
DEFAULT_TAU2 = 0.2


@dataclass
class CameraIntrinsics:
    """Render geometry shared by every candidate pose."""

    fov_x: float = math.radians(60.0)
    fov_y: float = math.radians(60.0)
    width: int = 224
    height: int = 224

    def camera(self, pose: Pose) -> Camera:
        return Camera(pose, self.fov_x, self.fov_y, self.width, self.height)


@dataclass
class RefineConfig:
    tau1: float = DEFAULT_TAU1
    tau2: float = DEFAULT_TAU2
    iterations: int = 100
    learning_rate: float = 5e-3
    delta_rot: float = math.radians(0.5)
    delta_trans: float = 0.05
    subset_fraction: float = 0.1
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics)

    def __post_init__(self):
        if self.tau1 > self.tau2:
            raise ValueError("tau1 must be <= tau2 (gate before acceptance)")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.delta_rot <= 0 or self.delta_trans <= 0:
            raise ValueError("finite-difference steps must be positive")
        if not 0.0 <= self.subset_fraction <= 1.0:
            raise ValueError("subset_fraction must lie in [0,1]")


@dataclass
class RefineOutcome:
    pose: Pose
    accepted: bool
    initial_similarity: float
    final_similarity: float
    iterations_run: int
    sample_index: int = -1
    similarity_history: list = field(default_factory=list)


def make_histogram_encoder(vocab, near: float = 0.1):
    """Encoder for synthetic scenes: soft class-contribution histogram of the
    render, mapped through the shared embedding projection.  Returns None for
    views that see no landmark mass."""

    def encode(scene: GaussianScene, camera: Camera):
        hist = soft_landmark_histogram(scene, camera, vocab.n_classes, near)
        if not np.any(hist > 0):
            return None
        return synthetic_encode(hist, vocab, "image", "image")

    return encode


def similarity_at(pose: Pose, scene: GaussianScene, intrinsics: CameraIntrinsics,
                  text_emb: ConditionEmbedding, image_encoder) -> float:
    """Cosine similarity between the encoded render at `pose` and the text
    embedding; 0 when the encoder yields nothing (empty view)."""
    emb = image_encoder(scene, intrinsics.camera(pose))
    if emb is None:
        return 0.0
    return cosine_similarity(emb, text_emb)


def refine_pose(coarse: Pose, text_emb: ConditionEmbedding, scene: GaussianScene,
                cfg: RefineConfig, rng=None, image_encoder=None) -> RefineOutcome:
    """Gate + ascent + accept/reject for one candidate (deterministic; the rng
    argument is accepted for interface symmetry and unused)."""
    if image_encoder is None:
        raise ValueError("an image_encoder is required")
    intr = cfg.intrinsics

    def sim(p: Pose) -> float:
        return similarity_at(p, scene, intr, text_emb, image_encoder)

    sim_init = sim(coarse)
    if sim_init < cfg.tau1:
        return RefineOutcome(coarse, False, sim_init, sim_init, 0)

    deltas = np.array([cfg.delta_rot] * 3 + [cfg.delta_trans] * 3)
    m = np.zeros(6)
    v = np.zeros(6)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    pose = coarse
    best_pose, best_sim = coarse, sim_init
    history = []
    for it in range(cfg.iterations):
        grad = np.zeros(6)
        for i in range(6):
            step = np.zeros(6)
            step[i] = deltas[i]
            s_plus = sim(retract(pose, TangentDelta.from_vector(step)))
            s_minus = sim(retract(pose, TangentDelta.from_vector(-step)))
            grad[i] = (s_plus - s_minus) / (2.0 * deltas[i])
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad * grad
        mhat = m / (1 - beta1 ** (it + 1))
        vhat = v / (1 - beta2 ** (it + 1))
        move = cfg.learning_rate * mhat / (np.sqrt(vhat) + eps)
        pose = retract(pose, TangentDelta.from_vector(move))
        s = sim(pose)
        history.append(s)
        if s > best_sim:
            best_sim, best_pose = s, pose
    accepted = best_sim >= cfg.tau2
    return RefineOutcome(best_pose, accepted, sim_init, best_sim, cfg.iterations,
                         similarity_history=history)


@dataclass
class RefineDistributionResult:
    poses: list  # surviving distribution: pass-through + accepted refined
    outcomes: list  # RefineOutcome per refined candidate (sample_index set)
    refined_indices: list


def refine_distribution(samples, text_emb: ConditionEmbedding, scene: GaussianScene,
                        cfg: RefineConfig, rng, image_encoder=None,
                        workers: int = 1) -> RefineDistributionResult:
    """Refine a random subset_fraction of the samples; the rest pass through
    unrefined and ungated.  Rejected candidates are dropped."""
    if not samples:
        raise ValueError("empty sample list")
    n = len(samples)
    n_refine = int(round(cfg.subset_fraction * n))
    chosen = sorted(rng.choice(n, size=n_refine, replace=False).tolist()) if n_refine else []
    chosen_set = set(chosen)

    def run(i):
        out = refine_pose(samples[i], text_emb, scene, cfg, image_encoder=image_encoder)
        out.sample_index = i
        return out

    if workers > 1 and chosen:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, chosen))
    else:
        outcomes = [run(i) for i in chosen]

    by_index = {o.sample_index: o for o in outcomes}
    surviving = []
    for i, p in enumerate(samples):
        if i in chosen_set:
            o = by_index[i]
            if o.accepted:
                surviving.append(o.pose)
        else:
            surviving.append(p)
    return RefineDistributionResult(surviving, outcomes, chosen)
