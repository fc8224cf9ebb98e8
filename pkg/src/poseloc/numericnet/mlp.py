"""Generic GELU feedforward regressor with optional inverted dropout.

Used by the MC-dropout pose-regression baseline; shares the loss and Adam
machinery of the denoiser.
"""

from __future__ import annotations

import numpy as np

from . import core


def mlp_init(sizes, seed: int) -> dict[str, np.ndarray]:
    """sizes = [in, hidden..., out]; weights N(0, 1/sqrt(fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for i, (fi, fo) in enumerate(zip(sizes[:-1], sizes[1:])):
        scale = 0.1 if i == len(sizes) - 2 else 1.0
        params[f"lin.{i}.w"] = rng.standard_normal((fi, fo)) * (scale / np.sqrt(fi))
        params[f"lin.{i}.b"] = np.zeros(fo)
    return params


def mlp_layer_count(params) -> int:
    return sum(1 for k in params if k.endswith(".w"))


def mlp_forward(params, x, dropout_p: float = 0.0, rng=None, return_cache=False):
    """Hidden layers use GELU then dropout; output layer is linear."""
    if dropout_p > 0.0 and rng is None:
        raise ValueError("dropout requires an rng")
    n = mlp_layer_count(params)
    z = np.asarray(x, dtype=np.float64)
    caches = []
    for i in range(n):
        a, c_lin = core.linear_forward(z, params[f"lin.{i}.w"], params[f"lin.{i}.b"])
        if i == n - 1:
            caches.append((c_lin, None, None))
            z = a
            break
        g, c_g = core.gelu_forward(a)
        z, mask = core.dropout_forward(g, dropout_p, rng)
        caches.append((c_lin, c_g, mask))
    core.check_finite(z, "mlp.out")
    return (z, caches) if return_cache else z


def mlp_backward(params, caches, dout) -> dict[str, np.ndarray]:
    n = mlp_layer_count(params)
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    dz = dout
    for i in range(n - 1, -1, -1):
        c_lin, c_g, mask = caches[i]
        if c_g is not None:
            dz = core.dropout_backward(mask, dz)
            dz = core.gelu_backward(c_g, dz)
        dz, dw, db = core.linear_backward(c_lin, params[f"lin.{i}.w"], dz)
        grads[f"lin.{i}.w"] += dw
        grads[f"lin.{i}.b"] += db
    return grads
