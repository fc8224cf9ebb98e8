"""Binary little-endian PLY interchange using the common 3DGS property layout.

Stored opacities are pre-sigmoid and scales pre-exp, matching what splat
training pipelines export; activations are applied on load and inverted on
save.  Synthetic scenes carry an extra float property `landmark_class`.
"""

from __future__ import annotations

import numpy as np

from .scene import GaussianScene

_REQUIRED = ("x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
             "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3")

_PLY_TYPES = {"float": "<f4", "float32": "<f4", "double": "<f8",
              "int": "<i4", "int32": "<i4", "uint": "<u4",
              "uchar": "u1", "uint8": "u1", "short": "<i2", "ushort": "<u2"}


class PlyError(ValueError):
    pass


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _logit(p):
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return np.log(p / (1.0 - p))


def _parse_header(f, path):
    line = f.readline().decode("ascii", errors="replace").strip()
    if line != "ply":
        raise PlyError(f"{path}:1: not a PLY file (got {line!r})")
    fmt = None
    count = None
    props = []
    line_no = 1
    while True:
        raw = f.readline()
        if not raw:
            raise PlyError(f"{path}:{line_no}: unexpected end of header")
        line_no += 1
        line = raw.decode("ascii", errors="replace").strip()
        if line == "end_header":
            break
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if len(parts) < 2 or parts[1] != "binary_little_endian":
                raise PlyError(f"{path}:{line_no}: only binary_little_endian supported")
            fmt = parts[1]
        elif parts[0] == "element":
            if len(parts) != 3 or parts[1] != "vertex":
                raise PlyError(f"{path}:{line_no}: only a single vertex element is supported")
            count = int(parts[2])
        elif parts[0] == "property":
            if len(parts) != 3:
                raise PlyError(f"{path}:{line_no}: malformed property line {line!r}")
            if parts[1] not in _PLY_TYPES:
                raise PlyError(f"{path}:{line_no}: unsupported property type {parts[1]!r}")
            props.append((parts[2], _PLY_TYPES[parts[1]]))
        else:
            raise PlyError(f"{path}:{line_no}: unrecognized header line {line!r}")
    if fmt is None:
        raise PlyError(f"{path}: header missing format line")
    if count is None:
        raise PlyError(f"{path}: header missing vertex element")
    return count, props


def load_ply(path) -> GaussianScene:
    with open(path, "rb") as f:
        count, props = _parse_header(f, path)
        names = [n for n, _ in props]
        for req in _REQUIRED:
            if req not in names:
                raise PlyError(f"{path}: missing required property {req!r}")
        dtype = np.dtype([(n, t) for n, t in props])
        data = np.frombuffer(f.read(), dtype=dtype, count=count)
    if len(data) != count:
        raise PlyError(f"{path}: vertex data truncated ({len(data)} of {count})")

    def col(name):
        return data[name].astype(np.float64)

    centroids = np.column_stack([col("x"), col("y"), col("z")])
    opacities = _sigmoid(col("opacity"))
    scales = np.exp(np.column_stack([col(f"scale_{i}") for i in range(3)]))
    rotations = np.column_stack([col(f"rot_{i}") for i in range(4)])
    f_dc = np.column_stack([col(f"f_dc_{i}") for i in range(3)])

    rest_names = sorted((n for n in names if n.startswith("f_rest_")),
                        key=lambda n: int(n.split("_")[-1]))
    if rest_names:
        n_rest = len(rest_names)
        if n_rest % 3 != 0:
            raise PlyError(f"{path}: f_rest_* count {n_rest} not divisible by 3")
        per_ch = n_rest // 3
        if per_ch not in (3, 8, 15):
            raise PlyError(f"{path}: unsupported SH coefficient count {per_ch + 1}")
        rest = np.column_stack([col(n) for n in rest_names]).reshape(count, 3, per_ch)
        sh = np.concatenate([f_dc[:, :, None], rest], axis=2)
    else:
        sh = f_dc[:, :, None]

    tags = None
    if "landmark_class" in names:
        tags = np.rint(col("landmark_class")).astype(np.int64)
    return GaussianScene(centroids, opacities, scales, rotations, sh, tags)


def save_ply(scene: GaussianScene, path) -> None:
    n = len(scene)
    k = scene.sh.shape[2]
    names = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    names += [f"f_rest_{i}" for i in range(3 * (k - 1))]
    names += ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
    if scene.landmark_class is not None:
        names.append("landmark_class")

    cols = {}
    cols["x"], cols["y"], cols["z"] = scene.centroids.T
    cols["nx"] = cols["ny"] = cols["nz"] = np.zeros(n)
    for c in range(3):
        cols[f"f_dc_{c}"] = scene.sh[:, c, 0]
    for c in range(3):
        for i in range(k - 1):
            cols[f"f_rest_{c * (k - 1) + i}"] = scene.sh[:, c, i + 1]
    cols["opacity"] = _logit(scene.opacities)
    for i in range(3):
        cols[f"scale_{i}"] = np.log(scene.scales[:, i])
    for i in range(4):
        cols[f"rot_{i}"] = scene.rotations[:, i]
    if scene.landmark_class is not None:
        cols["landmark_class"] = scene.landmark_class.astype(np.float64)

    out = np.empty(n, dtype=np.dtype([(nm, "<f4") for nm in names]))
    for nm in names:
        out[nm] = cols[nm].astype("<f4")
    with open(path, "wb") as f:
        f.write(b"ply\n")
        f.write(b"format binary_little_endian 1.0\n")
        f.write(f"element vertex {n}\n".encode("ascii"))
        for nm in names:
            f.write(f"property float {nm}\n".encode("ascii"))
        f.write(b"end_header\n")
        f.write(out.tobytes())
