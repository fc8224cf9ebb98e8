"""SE(3) camera poses: quaternion algebra, error metrics, tangent-space retraction.

Quaternions are (w, x, y, z) everywhere, kept on the canonical hemisphere
(w >= 0; ties broken by the first nonzero of x, y, z).  All functions are
pure and operate on float64 numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DegenerateQuaternionError(ValueError):
    pass


def quat_normalize(q) -> np.ndarray:
    """Unit-normalize a (w,x,y,z) quaternion and map it to the canonical hemisphere."""
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n == 0.0 or not np.isfinite(n):
        raise DegenerateQuaternionError("degenerate quaternion: zero or non-finite norm")
    q = q / n
    # canonical hemisphere: flip sign so w > 0; if w == 0, first nonzero of x,y,z > 0
    for c in q:
        if c > 0.0:
            break
        if c < 0.0:
            q = -q
            break
    return q


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product a*b for (w,x,y,z) quaternions (not normalized)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_from_axis_angle(omega) -> np.ndarray:
    """Exponential map: axis-angle 3-vector (radians) -> unit quaternion."""
    omega = np.asarray(omega, dtype=np.float64)
    theta = np.linalg.norm(omega)
    if theta < 1e-12:
        return np.array([1.0, 0.0, 0.0, 0.0])
    axis = omega / theta
    half = 0.5 * theta
    return np.concatenate([[math.cos(half)], math.sin(half) * axis])


def quat_from_matrix(m) -> np.ndarray:
    """3x3 rotation matrix -> canonical unit quaternion (Shepperd's method)."""
    m = np.asarray(m, dtype=np.float64)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s,
             (m[1, 0] - m[0, 1]) / s]
        )
    else:
        i = int(np.argmax([m[0, 0], m[1, 1], m[2, 2]]))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(m[i, i] - m[j, j] - m[k, k] + 1.0, 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    return quat_normalize(q)


def quat_to_matrix(q) -> np.ndarray:
    """Unit (w,x,y,z) quaternion -> 3x3 rotation matrix."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass
class Pose:
    """Rigid camera placement: unit quaternion rotation + world translation.

    The rotation is camera-to-world; ``translation`` is the camera center in
    world coordinates.  Both are normalized/canonicalized on construction.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = quat_normalize(self.rotation)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3).copy()

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def copy(self) -> "Pose":
        return Pose(self.rotation.copy(), self.translation.copy())


@dataclass
class TangentDelta:
    """Local 6-dim perturbation: axis-angle rotation (radians) + translation shift."""

    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=np.float64).reshape(3)
        self.v = np.asarray(self.v, dtype=np.float64).reshape(3)

    @staticmethod
    def from_vector(x) -> "TangentDelta":
        x = np.asarray(x, dtype=np.float64).reshape(6)
        return TangentDelta(x[:3], x[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.omega, self.v])


def rotation_error_deg(a: Pose, b: Pose) -> float:
    """Geodesic rotation distance in degrees, invariant to quaternion sign."""
    d = abs(float(np.dot(a.rotation, b.rotation)))
    d = min(d, 1.0)
    return math.degrees(2.0 * math.acos(d))


def translation_error(a: Pose, b: Pose) -> float:
    """Euclidean camera-center distance in world units."""
    return float(np.linalg.norm(a.translation - b.translation))


def retract(p: Pose, d: TangentDelta) -> Pose:
    """Apply a tangent perturbation: left-multiply exp(omega), shift translation."""
    if d.omega.any() or d.v.any():
        q = quat_multiply(quat_from_axis_angle(d.omega), p.rotation)
        return Pose(q, p.translation + d.v)
    return p.copy()
