"""CPU forward rasterizer: perspective EWA splatting with depth-sorted alpha blending.

Camera convention: pose.rotation is camera-to-world; in camera space x points
right, y down, z forward.  Projected 2D covariances use the local-affine
(Jacobian) approximation plus a 0.3 px^2 low-pass so sub-pixel Gaussians
stay visible.  Blending follows the influence/alpha-blending formulas with
front-to-back early termination once transmittance drops below 1e-4.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import Pose, quat_from_matrix
from .scene import GaussianScene, covariances3d, SH_C0

LOWPASS_PX2 = 0.3
TRANSMITTANCE_FLOOR = 1e-4
ALPHA_SKIP = 1e-8
CUTOFF_SIGMA = 3.0

SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
         0.3731763325901154, -0.4570457994644658, 1.445305721320277,
         -0.5900435899266435)


@dataclass
class Camera:
    pose: Pose
    fov_x: float
    fov_y: float
    width: int
    height: int

    def __post_init__(self):
        if not (0.0 < self.fov_x < np.pi and 0.0 < self.fov_y < np.pi):
            raise ValueError("fov must lie in (0, pi)")
        if self.width < 1 or self.height < 1:
            raise ValueError("image must be at least 1x1")

    @property
    def fx(self) -> float:
        return self.width / (2.0 * np.tan(self.fov_x / 2.0))

    @property
    def fy(self) -> float:
        return self.height / (2.0 * np.tan(self.fov_y / 2.0))


def look_at(position, target, up=(0.0, 0.0, 1.0)) -> Pose:
    """Camera-to-world pose with +z toward target and image-up against `up`."""
    position = np.asarray(position, dtype=np.float64)
    f = np.asarray(target, dtype=np.float64) - position
    n = np.linalg.norm(f)
    if n == 0:
        raise ValueError("look_at target coincides with position")
    f = f / n
    upv = np.asarray(up, dtype=np.float64)
    x = np.cross(f, upv)
    if np.linalg.norm(x) < 1e-9:
        x = np.cross(f, np.array([0.0, 1.0, 0.0]))
    x = x / np.linalg.norm(x)
    y = np.cross(f, x)
    r = np.column_stack([x, y, f])
    return Pose(quat_from_matrix(r), position)


@dataclass
class RenderedImage:
    pixels: np.ndarray  # (H,W,3) in [0,1]
    alpha: np.ndarray  # (H,W) accumulated opacity in [0,1]


def eval_sh(sh: np.ndarray, dirs: np.ndarray, degree: int) -> np.ndarray:
    """Spherical-harmonic color: sh (N,3,K), dirs (N,3) unit -> (N,3) RGB."""
    c = SH_C0 * sh[:, :, 0]
    if degree >= 1:
        x, y, z = dirs[:, 0:1], dirs[:, 1:2], dirs[:, 2:3]
        c = c - SH_C1 * y * sh[:, :, 1] + SH_C1 * z * sh[:, :, 2] - SH_C1 * x * sh[:, :, 3]
        if degree >= 2:
            xx, yy, zz = x * x, y * y, z * z
            xy, yz, xz = x * y, y * z, x * z
            c = (c + SH_C2[0] * xy * sh[:, :, 4]
                 + SH_C2[1] * yz * sh[:, :, 5]
                 + SH_C2[2] * (2.0 * zz - xx - yy) * sh[:, :, 6]
                 + SH_C2[3] * xz * sh[:, :, 7]
                 + SH_C2[4] * (xx - yy) * sh[:, :, 8])
            if degree >= 3:
                c = (c + SH_C3[0] * y * (3 * xx - yy) * sh[:, :, 9]
                     + SH_C3[1] * xy * z * sh[:, :, 10]
                     + SH_C3[2] * y * (4 * zz - xx - yy) * sh[:, :, 11]
                     + SH_C3[3] * z * (2 * zz - 3 * xx - 3 * yy) * sh[:, :, 12]
                     + SH_C3[4] * x * (4 * zz - xx - yy) * sh[:, :, 13]
                     + SH_C3[5] * z * (xx - yy) * sh[:, :, 14]
                     + SH_C3[6] * x * (xx - 3 * yy) * sh[:, :, 15])
    return c + 0.5


@dataclass
class Projection:
    """Per-Gaussian screen-space quantities for the Gaussians that survive culling."""

    index: np.ndarray  # indices into the scene arrays, sorted front-to-back
    mean2d: np.ndarray  # (M,2) pixel coordinates
    cov2d: np.ndarray  # (M,2,2)
    cov2d_inv: np.ndarray  # (M,2,2)
    depth: np.ndarray  # (M,)
    color: np.ndarray  # (M,3) clamped to [0,1]
    opacity: np.ndarray  # (M,)
    radius: np.ndarray  # (M,) cutoff radius in pixels


def project_scene(scene: GaussianScene, camera: Camera, near: float = 0.1,
                  sh_degree: int = 0) -> Projection:
    """Cull, project, and depth-sort the scene for one camera."""
    n = len(scene)
    if n == 0:
        e = np.empty(0)
        return Projection(e.astype(int), e.reshape(0, 2), e.reshape(0, 2, 2),
                          e.reshape(0, 2, 2), e, e.reshape(0, 3), e, e)
    r_wc = camera.pose.rotation_matrix().T  # world -> camera
    p_cam = (scene.centroids - camera.pose.translation) @ r_wc.T
    keep = p_cam[:, 2] > near
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        e = np.empty(0)
        return Projection(e.astype(int), e.reshape(0, 2), e.reshape(0, 2, 2),
                          e.reshape(0, 2, 2), e, e.reshape(0, 3), e, e)
    p = p_cam[idx]
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    fx, fy = camera.fx, camera.fy
    u = fx * x / z + camera.width / 2.0
    v = fy * y / z + camera.height / 2.0

    cov_world = covariances3d(scene.scales[idx], scene.rotations[idx])
    cov_cam = r_wc @ cov_world @ r_wc.T
    jac = np.zeros((idx.size, 2, 3))
    jac[:, 0, 0] = fx / z
    jac[:, 0, 2] = -fx * x / (z * z)
    jac[:, 1, 1] = fy / z
    jac[:, 1, 2] = -fy * y / (z * z)
    cov2d = jac @ cov_cam @ jac.transpose(0, 2, 1)
    cov2d[:, 0, 0] += LOWPASS_PX2
    cov2d[:, 1, 1] += LOWPASS_PX2

    a, b, d = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
    det = a * d - b * b
    mid = 0.5 * (a + d)
    lam_max = mid + np.sqrt(np.maximum(mid * mid - det, 0.0))
    radius = CUTOFF_SIGMA * np.sqrt(lam_max)

    inside = ((u + radius > 0) & (u - radius < camera.width)
              & (v + radius > 0) & (v - radius < camera.height) & (det > 0))
    idx, u, v, z = idx[inside], u[inside], v[inside], z[inside]
    cov2d, det, radius = cov2d[inside], det[inside], radius[inside]

    inv = np.empty_like(cov2d)
    inv[:, 0, 0] = cov2d[:, 1, 1] / det
    inv[:, 1, 1] = cov2d[:, 0, 0] / det
    inv[:, 0, 1] = inv[:, 1, 0] = -cov2d[:, 0, 1] / det

    if sh_degree > 0:
        dirs = scene.centroids[idx] - camera.pose.translation
        dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    else:
        dirs = np.zeros((idx.size, 3))
    deg = min(sh_degree, scene.sh_degree)
    color = np.clip(eval_sh(scene.sh[idx], dirs, deg), 0.0, 1.0)

    order = np.argsort(z, kind="stable")
    return Projection(idx[order], np.column_stack([u, v])[order], cov2d[order],
                      inv[order], z[order], color[order],
                      scene.opacities[idx][order], radius[order])


def render(scene: GaussianScene, camera: Camera, background=(0.0, 0.0, 0.0),
           sh_degree: int = 0, near: float = 0.1) -> RenderedImage:
    """Rasterize a scene; pure function of (scene, camera, options)."""
    h, w = camera.height, camera.width
    proj = project_scene(scene, camera, near, sh_degree)
    color = np.zeros((h, w, 3))
    transmittance = np.ones((h, w))
    for g in range(len(proj.index)):
        cx, cy = proj.mean2d[g]
        r = proj.radius[g]
        x0, x1 = max(int(np.floor(cx - r)), 0), min(int(np.ceil(cx + r)) + 1, w)
        y0, y1 = max(int(np.floor(cy - r)), 0), min(int(np.ceil(cy + r)) + 1, h)
        if x0 >= x1 or y0 >= y1:
            continue
        xs = np.arange(x0, x1) + 0.5 - cx
        ys = np.arange(y0, y1) + 0.5 - cy
        dx = np.broadcast_to(xs[None, :], (y1 - y0, x1 - x0))
        dy = np.broadcast_to(ys[:, None], (y1 - y0, x1 - x0))
        q = (proj.cov2d_inv[g, 0, 0] * dx * dx
             + 2.0 * proj.cov2d_inv[g, 0, 1] * dx * dy
             + proj.cov2d_inv[g, 1, 1] * dy * dy)
        alpha = proj.opacity[g] * np.exp(-0.5 * q)
        t_patch = transmittance[y0:y1, x0:x1]
        alpha = np.where((alpha < ALPHA_SKIP) | (t_patch < TRANSMITTANCE_FLOOR), 0.0, alpha)
        weight = alpha * t_patch
        color[y0:y1, x0:x1] += weight[:, :, None] * proj.color[g]
        transmittance[y0:y1, x0:x1] = t_patch * (1.0 - alpha)
        if transmittance.max() < TRANSMITTANCE_FLOOR:
            break
    bg = np.asarray(background, dtype=np.float64)
    pixels = np.clip(color + transmittance[:, :, None] * bg, 0.0, 1.0)
    return RenderedImage(pixels, 1.0 - transmittance)


# ---------------------------------------------------------------------------
# landmark visibility


class UntaggedSceneError(ValueError):
    pass


def _center_contributions(scene: GaussianScene, camera: Camera, near: float):
    """For each projected Gaussian: blended contribution at its own center pixel.

    Returns (scene indices, contribution values); order follows depth sorting.
    The contribution of Gaussian i is opacity_i times the transmittance left
    by all closer Gaussians at i's projected center.
    """
    proj = project_scene(scene, camera, near)
    m = len(proj.index)
    if m == 0:
        return proj.index, np.zeros(0)
    keep = ((proj.mean2d[:, 0] >= 0) & (proj.mean2d[:, 0] < camera.width)
            & (proj.mean2d[:, 1] >= 0) & (proj.mean2d[:, 1] < camera.height))
    # h_ij = influence of (closer) Gaussian j at the center pixel of Gaussian i
    d = proj.mean2d[:, None, :] - proj.mean2d[None, :, :]
    q = (proj.cov2d_inv[None, :, 0, 0] * d[:, :, 0] ** 2
         + 2.0 * proj.cov2d_inv[None, :, 0, 1] * d[:, :, 0] * d[:, :, 1]
         + proj.cov2d_inv[None, :, 1, 1] * d[:, :, 1] ** 2)
    h = proj.opacity[None, :] * np.exp(-0.5 * q)
    occluders = np.minimum(np.tril(h, k=-1), 1.0 - 1e-15)
    t = np.exp(np.log1p(-occluders).sum(axis=1))
    contrib = proj.opacity * t
    return proj.index[keep], contrib[keep]


def visible_landmark_histogram(scene: GaussianScene, camera: Camera,
                               n_classes: int | None = None, near: float = 0.1,
                               threshold: float = 0.01) -> np.ndarray:
    """Count tagged Gaussians whose projected center lands inside the image
    with blended contribution above `threshold`."""
    if scene.landmark_class is None:
        raise UntaggedSceneError("scene has no landmark_class tags")
    if n_classes is None:
        n_classes = int(scene.landmark_class.max()) + 1 if len(scene) else 0
    idx, contrib = _center_contributions(scene, camera, near)
    hist = np.zeros(n_classes)
    for i, c in zip(idx, contrib):
        if c > threshold:
            hist[scene.landmark_class[i]] += 1
    return hist


def soft_landmark_histogram(scene: GaussianScene, camera: Camera,
                            n_classes: int | None = None, near: float = 0.1) -> np.ndarray:
    """Contribution-weighted class histogram: smooth in the camera pose,
    which makes it usable as a finite-difference refinement signal."""
    if scene.landmark_class is None:
        raise UntaggedSceneError("scene has no landmark_class tags")
    if n_classes is None:
        n_classes = int(scene.landmark_class.max()) + 1 if len(scene) else 0
    idx, contrib = _center_contributions(scene, camera, near)
    hist = np.zeros(n_classes)
    for i, c in zip(idx, contrib):
        hist[scene.landmark_class[i]] += c
    return hist
