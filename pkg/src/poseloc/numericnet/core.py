"""Forward/backward primitives for the fixed denoiser architectures.

Every forward returns (output, cache); the matching backward consumes the
cache and the upstream gradient.  Gradients are exact for the implemented
ops and are validated against central finite differences in the tests.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

_LN_EPS = 1e-5
_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class NonFiniteActivationError(RuntimeError):
    """Raised when a forward pass produces NaN/inf, tagged with the layer."""

    def __init__(self, layer: str):
        super().__init__(f"non-finite activations in layer {layer}")
        self.layer = layer


def check_finite(x: np.ndarray, layer: str) -> None:
    if not np.all(np.isfinite(x)):
        raise NonFiniteActivationError(layer)


# ---------------------------------------------------------------------------
# linear


def linear_forward(x, w, b):
    return x @ w + b, x


def linear_backward(cache_x, w, dy):
    x2 = cache_x.reshape(-1, cache_x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    dw = x2.T @ dy2
    db = dy2.sum(axis=0)
    dx = dy @ w.T
    return dx, dw, db


# ---------------------------------------------------------------------------
# layer norm (last axis)


def layernorm_forward(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = xc * inv_std
    return g * xhat + b, (xhat, inv_std)


def layernorm_backward(cache, g, dy):
    xhat, inv_std = cache
    axes = tuple(range(dy.ndim - 1))
    dg = (dy * xhat).sum(axis=axes)
    db = dy.sum(axis=axes)
    dxhat = dy * g
    dx = inv_std * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


# ---------------------------------------------------------------------------
# GELU (exact erf form)


def gelu_forward(x):
    phi = 0.5 * (1.0 + erf(x / _SQRT2))
    return x * phi, (x, phi)


def gelu_backward(cache, dy):
    x, phi = cache
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return dy * (phi + x * pdf)


# ---------------------------------------------------------------------------
# softmax (last axis)


def softmax_forward(s):
    s = s - s.max(axis=-1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(y, dy):
    return y * (dy - (dy * y).sum(axis=-1, keepdims=True))


# ---------------------------------------------------------------------------
# inverted dropout


def dropout_forward(x, p, rng):
    if p <= 0.0:
        return x, None
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask, mask


def dropout_backward(mask, dy):
    if mask is None:
        return dy
    return dy * mask


# ---------------------------------------------------------------------------
# sinusoidal timestep embedding


def time_embedding(t, width: int) -> np.ndarray:
    """Encode integer timesteps (B,) into (B, width) sin/cos features.

    Distinct integers in [1, T] map to distinct vectors for any T, because
    the base frequency is 1 rad/step and integers never alias modulo 2*pi.
    """
    if width % 2 != 0:
        raise ValueError("time embedding width must be even")
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = width // 2
    if half == 1:
        freqs = np.ones(1)
    else:
        freqs = np.exp(-math.log(10000.0) * np.arange(half) / (half - 1))
    ang = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)


# ---------------------------------------------------------------------------
# regression losses


def loss_and_grad(pred, target, kind: str):
    """Mean-over-batch loss and its gradient w.r.t. pred.

    "l1": per-sample sum of absolute errors; "l2": per-sample sum of squares.
    """
    d = pred - target
    n = pred.shape[0]
    if kind == "l1":
        return float(np.abs(d).sum() / n), np.sign(d) / n
    if kind == "l2":
        return float((d * d).sum() / n), 2.0 * d / n
    raise ValueError(f"unknown loss kind: {kind!r}")
