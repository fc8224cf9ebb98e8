"""File interchange: pose tables, images, heatmaps, config files.

Float cells are written with repr() so that re-running a command with the
same seed reproduces every output byte-for-byte.
"""

from __future__ import annotations

import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .geometry import Pose

POSE_HEADER = ["id", "qw", "qx", "qy", "qz", "tx", "ty", "tz"]


class DataError(ValueError):
    """File-level problem: missing/misaligned/malformed data."""


def save_pose_table(path, ids, poses) -> None:
    if len(ids) != len(poses):
        raise DataError("ids and poses differ in length")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(POSE_HEADER)
        for rid, p in zip(ids, poses):
            row = [rid] + [repr(float(v)) for v in p.rotation] \
                + [repr(float(v)) for v in p.translation]
            w.writerow(row)


def load_pose_table(path):
    """Returns (ids, poses); quaternions are renormalized on load."""
    ids, poses = [], []
    try:
        f = open(path, newline="")
    except OSError as e:
        raise DataError(f"cannot open pose table {path}: {e}") from None
    with f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != POSE_HEADER:
            raise DataError(f"{path}: bad pose table header {header!r}")
        for line_no, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 8:
                raise DataError(f"{path}:{line_no}: expected 8 columns, got {len(row)}")
            try:
                vals = [float(v) for v in row[1:]]
            except ValueError:
                raise DataError(f"{path}:{line_no}: non-numeric pose entry") from None
            ids.append(row[0])
            poses.append(Pose(np.array(vals[:4]), np.array(vals[4:])))
    return ids, poses


# ---------------------------------------------------------------------------
# images


def to_u8(pixels: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(pixels) * 255.0), 0, 255).astype(np.uint8)


def write_ppm(path, pixels) -> None:
    """P6 binary PPM; fully deterministic bytes."""
    u8 = to_u8(pixels)
    h, w = u8.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(u8.tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6" or len(parts) < 4:
        raise DataError(f"{path}: not a P6 PPM")
    w, h = (int(v) for v in parts[1].split())
    pix = np.frombuffer(parts[3], dtype=np.uint8, count=w * h * 3)
    return pix.reshape(h, w, 3).astype(np.float64) / 255.0


def write_image(path, pixels) -> None:
    """PPM or PNG depending on the file suffix."""
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        write_ppm(path, pixels)
        return
    if path.suffix.lower() == ".png":
        from PIL import Image

        Image.fromarray(to_u8(pixels), mode="RGB").save(path, format="PNG")
        return
    raise DataError(f"unsupported image suffix {path.suffix!r} (use .ppm or .png)")


_HEAT_STOPS = np.array(
    [[0.0, 0.0, 0.05], [0.25, 0.0, 0.4], [0.8, 0.2, 0.2], [1.0, 0.8, 0.1], [1.0, 1.0, 0.9]]
)


def heat_colormap(v: np.ndarray) -> np.ndarray:
    """Map values in [0,1] to a dark-to-hot RGB ramp."""
    v = np.clip(v, 0.0, 1.0)
    pos = v * (len(_HEAT_STOPS) - 1)
    i = np.minimum(pos.astype(int), len(_HEAT_STOPS) - 2)
    frac = (pos - i)[..., None]
    return _HEAT_STOPS[i] * (1 - frac) + _HEAT_STOPS[i + 1] * frac


def write_heatmap(path, positions, lo, hi, size: int = 128) -> None:
    """Top-down (x,y) density of sample positions over [lo,hi] bounds."""
    positions = np.asarray(positions, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)[:2]
    hi = np.asarray(hi, dtype=np.float64)[:2]
    span = np.where(hi > lo, hi - lo, 1.0)
    ij = np.clip(((positions[:, :2] - lo) / span * size).astype(int), 0, size - 1)
    grid = np.zeros((size, size))
    for x, y in ij:
        grid[size - 1 - y, x] += 1.0  # y up in world -> row 0 at top
    if grid.max() > 0:
        grid = grid / grid.max()
    write_image(path, heat_colormap(np.sqrt(grid)))


# ---------------------------------------------------------------------------
# configs


def read_config_file(path) -> dict:
    """TOML (.toml) or JSON (.json) config file -> dict."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"config file not found: {path}")
    if path.suffix.lower() == ".toml":
        if sys.version_info >= (3, 11):
            import tomllib
        else:
            import tomli as tomllib
        try:
            return tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as e:
            raise DataError(f"{path}: bad TOML ({e})") from None
    if path.suffix.lower() == ".json":
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: bad JSON ({e})") from None
    raise DataError(f"unsupported config suffix {path.suffix!r} (use .toml or .json)")


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: bad JSON ({e})") from None


def output_root() -> Path:
    return Path(os.environ.get("POSELOC_OUTPUT_ROOT", "."))


def resolve_out(path) -> Path:
    """Relative outputs land under POSELOC_OUTPUT_ROOT (default cwd)."""
    p = Path(path)
    return p if p.is_absolute() else output_root() / p
