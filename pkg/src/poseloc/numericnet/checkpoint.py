"""Checkpoint file: magic + version + JSON header + little-endian f32 blob.

Header carries the config echo, the scene-normalization transform, the step
counter and the parameter manifest (names and shapes, in declaration order).
Saving a just-loaded checkpoint reproduces the file byte-for-byte.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .net import DenoiserParams, TrainConfig

MAGIC = b"PLCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: DenoiserParams, normalization=None, step: int = 0,
                    extra: dict | None = None) -> None:
    """normalization: None or an object with .center (3,) and .scale fields;
    extra holds run metadata needed downstream (schedule parameters etc.)."""
    header = {
        "config": params.config.to_dict(),
        "normalization": None
        if normalization is None
        else {"center": [float(c) for c in normalization.center],
              "scale": float(normalization.scale)},
        "params": [[name, list(arr.shape)] for name, arr in params.tensors.items()],
        "step": int(step),
        "extra": extra or {},
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blob = b"".join(
        np.ascontiguousarray(arr, dtype="<f4").tobytes() for arr in params.tensors.values()
    )
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HI", VERSION, len(head)))
        f.write(head)
        f.write(blob)


def load_checkpoint(path):
    """Returns (params, normalization dict or None, step, extra dict)."""
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    off = len(MAGIC)
    version, head_len = struct.unpack_from("<HI", data, off)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    off += struct.calcsize("<HI")
    header = json.loads(data[off:off + head_len].decode("utf-8"))
    off += head_len
    cfg = TrainConfig.from_dict(header["config"])
    tensors = {}
    for name, shape in header["params"]:
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=off)
        off += 4 * n
        tensors[name] = arr.astype(np.float64).reshape(shape)
    if off != len(data):
        raise CheckpointError(f"{path}: trailing bytes after parameter blob")
    return (DenoiserParams(cfg, tensors), header["normalization"], header["step"],
            header.get("extra", {}))
