"""3D Gaussian scene arrays, covariance math, and synthetic scene generation.

Scenes hold activated values: opacities in [0,1], positive world-unit scales,
unit quaternion rotations, and spherical-harmonic colors as (N, 3, K) with
K in {1, 4, 9, 16}.  Synthetic scenes additionally tag every Gaussian with a
landmark class index so that rendered views can be summarized as class-count
histograms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import quat_to_matrix

SH_C0 = 0.28209479177387814


@dataclass
class GaussianScene:
    centroids: np.ndarray  # (N,3)
    opacities: np.ndarray  # (N,)
    scales: np.ndarray  # (N,3)
    rotations: np.ndarray  # (N,4) unit (w,x,y,z)
    sh: np.ndarray  # (N,3,K)
    landmark_class: np.ndarray | None = None  # (N,) int

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64).reshape(-1, 3)
        n = len(self.centroids)
        self.opacities = np.asarray(self.opacities, dtype=np.float64).reshape(n)
        self.scales = np.asarray(self.scales, dtype=np.float64).reshape(n, 3)
        self.rotations = np.asarray(self.rotations, dtype=np.float64).reshape(n, 4)
        self.sh = np.asarray(self.sh, dtype=np.float64).reshape(n, 3, -1)
        if self.sh.shape[2] not in (1, 4, 9, 16):
            raise ValueError(f"unsupported SH coefficient count {self.sh.shape[2]}")
        if np.any(self.opacities < 0) or np.any(self.opacities > 1):
            raise ValueError("opacities must lie in [0,1]")
        if n and np.any(self.scales <= 0):
            raise ValueError("scales must be positive")
        if n:
            norms = np.linalg.norm(self.rotations, axis=1, keepdims=True)
            if np.any(norms == 0):
                raise ValueError("zero-norm rotation row")
            self.rotations = self.rotations / norms
        if self.landmark_class is not None:
            self.landmark_class = np.asarray(self.landmark_class, dtype=np.int64).reshape(n)

    def __len__(self) -> int:
        return len(self.centroids)

    @property
    def sh_degree(self) -> int:
        return {1: 0, 4: 1, 9: 2, 16: 3}[self.sh.shape[2]]


def covariance3d(scale, rot) -> np.ndarray:
    """Sigma = R diag(s) diag(s)^T R^T for one Gaussian; symmetric PD."""
    r = quat_to_matrix(rot)
    m = r * np.asarray(scale, dtype=np.float64)
    return m @ m.T


def covariances3d(scales, rotations) -> np.ndarray:
    """Vectorized covariance3d: (N,3) scales + (N,4) rotations -> (N,3,3)."""
    w, x, y, z = rotations.T
    r = np.empty((len(rotations), 3, 3))
    r[:, 0, 0] = 1 - 2 * (y * y + z * z)
    r[:, 0, 1] = 2 * (x * y - w * z)
    r[:, 0, 2] = 2 * (x * z + w * y)
    r[:, 1, 0] = 2 * (x * y + w * z)
    r[:, 1, 1] = 1 - 2 * (x * x + z * z)
    r[:, 1, 2] = 2 * (y * z - w * x)
    r[:, 2, 0] = 2 * (x * z - w * y)
    r[:, 2, 1] = 2 * (y * z + w * x)
    r[:, 2, 2] = 1 - 2 * (x * x + y * y)
    m = r * scales[:, None, :]
    return m @ m.transpose(0, 2, 1)


def gaussian_influence(q, center, cov_inv, opacity) -> float:
    """Opacity-weighted Mahalanobis falloff h(q); equals opacity at q = center."""
    d = np.asarray(q, dtype=np.float64) - np.asarray(center, dtype=np.float64)
    return float(opacity * np.exp(-0.5 * d @ np.asarray(cov_inv) @ d))


def rgb_to_sh0(rgb) -> np.ndarray:
    return (np.asarray(rgb, dtype=np.float64) - 0.5) / SH_C0


def sh0_to_rgb(sh0) -> np.ndarray:
    return np.asarray(sh0, dtype=np.float64) * SH_C0 + 0.5


# ---------------------------------------------------------------------------
# synthetic landmark scenes

CLASS_PALETTE = np.array(
    [
        [0.85, 0.25, 0.20],
        [0.20, 0.60, 0.85],
        [0.25, 0.75, 0.30],
        [0.90, 0.75, 0.20],
        [0.65, 0.30, 0.80],
        [0.90, 0.45, 0.65],
        [0.35, 0.80, 0.75],
        [0.60, 0.55, 0.35],
    ]
)


@dataclass
class SyntheticSceneSpec:
    """Layout description for a desk-scale landmark scene."""

    classes: list[str]
    instances_per_class: int = 2
    gaussians_per_instance: int = 30
    region: tuple = (-10.0, 10.0, -10.0, 10.0)  # xmin, xmax, ymin, ymax
    z_range: tuple = (0.5, 2.0)
    cluster_radius: float = 0.8
    min_separation: float = 4.0
    scale_range: tuple = (0.12, 0.35)
    opacity_range: tuple = (0.75, 0.95)

    def __post_init__(self):
        if not self.classes:
            raise ValueError("scene spec lists no landmark classes")
        if self.instances_per_class < 1 or self.gaussians_per_instance < 1:
            raise ValueError("instance and gaussian counts must be >= 1")

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "instances_per_class": self.instances_per_class,
            "gaussians_per_instance": self.gaussians_per_instance,
            "region": list(self.region),
            "z_range": list(self.z_range),
            "cluster_radius": self.cluster_radius,
            "min_separation": self.min_separation,
            "scale_range": list(self.scale_range),
            "opacity_range": list(self.opacity_range),
        }

    @staticmethod
    def from_dict(d: dict) -> "SyntheticSceneSpec":
        return SyntheticSceneSpec(
            classes=list(d["classes"]),
            instances_per_class=int(d.get("instances_per_class", 2)),
            gaussians_per_instance=int(d.get("gaussians_per_instance", 30)),
            region=tuple(d.get("region", (-10.0, 10.0, -10.0, 10.0))),
            z_range=tuple(d.get("z_range", (0.5, 2.0))),
            cluster_radius=float(d.get("cluster_radius", 0.8)),
            min_separation=float(d.get("min_separation", 4.0)),
            scale_range=tuple(d.get("scale_range", (0.12, 0.35))),
            opacity_range=tuple(d.get("opacity_range", (0.75, 0.95))),
        )


def place_instance_centers(spec: SyntheticSceneSpec, rng) -> np.ndarray:
    """Rejection-sample instance centers keeping min_separation apart."""
    xmin, xmax, ymin, ymax = spec.region
    total = len(spec.classes) * spec.instances_per_class
    centers = []
    attempts = 0
    while len(centers) < total:
        attempts += 1
        if attempts > 20000:
            raise ValueError("could not place instances; loosen min_separation or grow region")
        c = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax), 0.0])
        if all(np.linalg.norm(c[:2] - p[:2]) >= spec.min_separation for p in centers):
            centers.append(c)
    return np.stack(centers)


def make_synthetic_scene(spec: SyntheticSceneSpec, seed: int):
    """Deterministic clustered landmark scene.

    Returns (scene, instance_centers) where instance_centers is
    (n_classes * instances_per_class, 3) ordered class-major.  Gaussians are
    tagged with the INSTANCE index (instances of one class share a color but
    are distinct landmark channels).
    """
    rng = np.random.default_rng(seed)
    centers = place_instance_centers(spec, rng)
    m = spec.gaussians_per_instance
    cents, opacs, scals, rots, shs, tags = [], [], [], [], [], []
    for inst, center in enumerate(centers):
        cls = inst // spec.instances_per_class
        base = CLASS_PALETTE[cls % len(CLASS_PALETTE)]
        offs = rng.normal(0.0, spec.cluster_radius / 2.0, (m, 3))
        pts = center + offs
        pts[:, 2] = rng.uniform(*spec.z_range, m)
        cents.append(pts)
        opacs.append(rng.uniform(*spec.opacity_range, m))
        scals.append(rng.uniform(*spec.scale_range, (m, 3)))
        q = rng.standard_normal((m, 4))
        rots.append(q / np.linalg.norm(q, axis=1, keepdims=True))
        rgb = np.clip(base + rng.normal(0.0, 0.03, (m, 3)), 0.0, 1.0)
        shs.append(rgb_to_sh0(rgb)[:, :, None])
        tags.append(np.full(m, inst))
    scene = GaussianScene(
        np.concatenate(cents),
        np.concatenate(opacs),
        np.concatenate(scals),
        np.concatenate(rots),
        np.concatenate(shs),
        np.concatenate(tags),
    )
    return scene, centers
