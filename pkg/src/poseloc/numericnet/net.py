"""Denoiser network: config, parameter init, forward and hand-derived backward.

Two architectures share one parameter-dict interface:

* "transformer": tokens [pose, time, condition] through pre-norm
  self-attention blocks; the pose token feeds a linear head -> 7 values.
* "mlp": concat(pose, time embedding, projected condition) through a stack
  of GELU hidden layers (fast fallback for desk-scale training).

Parameters live in an ordered dict of float64 arrays; the dict order is the
checkpoint blob order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import core
from .core import check_finite

POSE_DIM = 7


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    warmup_steps: int = 500
    total_steps: int = 30_000
    batch_size: int = 64
    layers: int = 8
    hidden_dim: int = 128
    d_psi: int = 64
    cond_dim: int = 64
    loss_kind: str = "l1"  # "l1" | "l2"
    prediction_target: str = "x0"  # "x0" | "noise"
    seed: int = 0
    arch: str = "transformer"  # "transformer" | "mlp"
    heads: int = 4
    time_width: int = 32
    mlp_ratio: int = 4
    dropout_p: float = 0.0
    # per-batch timestep selection: "iid" uniform draws, or "distinct"
    # (sample `distinct_timesteps` values without replacement, spread over
    # the batch)
    timestep_mode: str = "iid"
    distinct_timesteps: int = 90

    def __post_init__(self):
        if self.warmup_steps > self.total_steps:
            raise ValueError("warmup_steps must be <= total_steps")
        for name in ("batch_size", "layers", "hidden_dim", "d_psi", "cond_dim",
                     "heads", "time_width", "mlp_ratio", "total_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.loss_kind not in ("l1", "l2"):
            raise ValueError(f"unknown loss_kind {self.loss_kind!r}")
        if self.prediction_target not in ("x0", "noise"):
            raise ValueError(f"unknown prediction_target {self.prediction_target!r}")
        if self.arch not in ("transformer", "mlp"):
            raise ValueError(f"unknown arch {self.arch!r}")
        if self.arch == "transformer" and self.hidden_dim % self.heads != 0:
            raise ValueError("hidden_dim must be divisible by heads")
        if self.time_width % 2 != 0:
            raise ValueError("time_width must be even")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        return TrainConfig(**d)


@dataclass
class DenoiserParams:
    """Trainable weights plus the config that fixes their shapes."""

    config: TrainConfig
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def names(self) -> list[str]:
        return list(self.tensors.keys())

    def copy(self) -> "DenoiserParams":
        return DenoiserParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.tensors.values())


def _init_linear(rng, fan_in, fan_out, scale=1.0):
    w = rng.standard_normal((fan_in, fan_out)) * (scale / np.sqrt(fan_in))
    return w, np.zeros(fan_out)


def init_denoiser(cfg: TrainConfig) -> DenoiserParams:
    """Deterministic parameter init from cfg.seed, in declaration order."""
    rng = np.random.default_rng(cfg.seed)
    h, t = {}, cfg

    def lin(name, fi, fo, scale=1.0):
        h[f"{name}.w"], h[f"{name}.b"] = _init_linear(rng, fi, fo, scale)

    lin("psi", t.cond_dim, t.d_psi)
    if cfg.arch == "transformer":
        lin("pose_in", POSE_DIM, t.hidden_dim)
        lin("time_in", t.time_width, t.hidden_dim)
        lin("cond_in", t.d_psi, t.hidden_dim)
        h["token_pos"] = rng.standard_normal((3, t.hidden_dim)) * 0.02
        for i in range(t.layers):
            p = f"blocks.{i}"
            h[f"{p}.ln1.g"] = np.ones(t.hidden_dim)
            h[f"{p}.ln1.b"] = np.zeros(t.hidden_dim)
            for nm in ("wq", "wk", "wv", "wo"):
                lin(f"{p}.attn.{nm[1]}", t.hidden_dim, t.hidden_dim)
            h[f"{p}.ln2.g"] = np.ones(t.hidden_dim)
            h[f"{p}.ln2.b"] = np.zeros(t.hidden_dim)
            lin(f"{p}.mlp.1", t.hidden_dim, t.mlp_ratio * t.hidden_dim)
            lin(f"{p}.mlp.2", t.mlp_ratio * t.hidden_dim, t.hidden_dim)
        h["ln_f.g"] = np.ones(t.hidden_dim)
        h["ln_f.b"] = np.zeros(t.hidden_dim)
        lin("head", t.hidden_dim, POSE_DIM, scale=0.1)
    else:
        in_dim = POSE_DIM + t.time_width + t.d_psi
        lin("mlp.0", in_dim, t.hidden_dim)
        for i in range(1, t.layers):
            lin(f"mlp.{i}", t.hidden_dim, t.hidden_dim)
        lin("head", t.hidden_dim, POSE_DIM, scale=0.1)
    return DenoiserParams(cfg, h)


# ---------------------------------------------------------------------------
# forward


def _tokens_forward(p: DenoiserParams, x, temb, cond):
    h = p.tensors
    psi, c_psi = core.linear_forward(cond, h["psi.w"], h["psi.b"])
    tok_p, c_p = core.linear_forward(x, h["pose_in.w"], h["pose_in.b"])
    tok_t, c_t = core.linear_forward(temb, h["time_in.w"], h["time_in.b"])
    tok_c, c_c = core.linear_forward(psi, h["cond_in.w"], h["cond_in.b"])
    seq = np.stack([tok_p, tok_t, tok_c], axis=1) + h["token_pos"]
    return seq, (c_psi, c_p, c_t, c_c)


def _attention_forward(h, prefix, u, heads):
    hd = u.shape[-1] // heads
    q, cq = core.linear_forward(u, h[f"{prefix}.q.w"], h[f"{prefix}.q.b"])
    k, ck = core.linear_forward(u, h[f"{prefix}.k.w"], h[f"{prefix}.k.b"])
    v, cv = core.linear_forward(u, h[f"{prefix}.v.w"], h[f"{prefix}.v.b"])

    def split(z):  # (B,S,H) -> (B,heads,S,hd)
        b, s, _ = z.shape
        return z.reshape(b, s, heads, hd).transpose(0, 2, 1, 3)

    qh, kh, vh = split(q), split(k), split(v)
    scores = qh @ kh.transpose(0, 1, 3, 2) / np.sqrt(hd)
    att = core.softmax_forward(scores)
    oh = att @ vh
    b, _, s, _ = oh.shape
    o = oh.transpose(0, 2, 1, 3).reshape(b, s, heads * hd)
    out, co = core.linear_forward(o, h[f"{prefix}.o.w"], h[f"{prefix}.o.b"])
    return out, (cq, ck, cv, co, qh, kh, vh, att, hd)


def _attention_backward(h, prefix, cache, dout, grads):
    cq, ck, cv, co, qh, kh, vh, att, hd = cache
    heads = qh.shape[1]
    do, dwo, dbo = core.linear_backward(co, h[f"{prefix}.o.w"], dout)
    grads[f"{prefix}.o.w"] += dwo
    grads[f"{prefix}.o.b"] += dbo
    b, s, _ = do.shape
    doh = do.reshape(b, s, heads, hd).transpose(0, 2, 1, 3)
    datt = doh @ vh.transpose(0, 1, 3, 2)
    dvh = att.transpose(0, 1, 3, 2) @ doh
    dscores = core.softmax_backward(att, datt) / np.sqrt(hd)
    dqh = dscores @ kh
    dkh = dscores.transpose(0, 1, 3, 2) @ qh

    def merge(z):  # (B,heads,S,hd) -> (B,S,H)
        return z.transpose(0, 2, 1, 3).reshape(b, s, heads * hd)

    du = np.zeros_like(do)
    for name, dz, c in (("q", dqh, cq), ("k", dkh, ck), ("v", dvh, cv)):
        dzu, dw, db = core.linear_backward(c, h[f"{prefix}.{name}.w"], merge(dz))
        grads[f"{prefix}.{name}.w"] += dw
        grads[f"{prefix}.{name}.b"] += db
        du += dzu
    return du


def _transformer_forward(p: DenoiserParams, x, temb, cond):
    h, cfg = p.tensors, p.config
    seq, tok_cache = _tokens_forward(p, x, temb, cond)
    check_finite(seq, "tokens")
    blocks = []
    for i in range(cfg.layers):
        pre = f"blocks.{i}"
        u, c_ln1 = core.layernorm_forward(seq, h[f"{pre}.ln1.g"], h[f"{pre}.ln1.b"])
        a, c_att = _attention_forward(h, f"{pre}.attn", u, cfg.heads)
        seq = seq + a
        w, c_ln2 = core.layernorm_forward(seq, h[f"{pre}.ln2.g"], h[f"{pre}.ln2.b"])
        h1, c_l1 = core.linear_forward(w, h[f"{pre}.mlp.1.w"], h[f"{pre}.mlp.1.b"])
        z, c_g = core.gelu_forward(h1)
        m, c_l2 = core.linear_forward(z, h[f"{pre}.mlp.2.w"], h[f"{pre}.mlp.2.b"])
        seq = seq + m
        check_finite(seq, pre)
        blocks.append((c_ln1, c_att, c_ln2, c_l1, c_g, c_l2))
    y, c_lnf = core.layernorm_forward(seq, h["ln_f.g"], h["ln_f.b"])
    pose_tok = y[:, 0, :]
    out, c_head = core.linear_forward(pose_tok, h["head.w"], h["head.b"])
    check_finite(out, "head")
    return out, (tok_cache, blocks, c_lnf, y.shape, c_head)


def _transformer_backward(p: DenoiserParams, cache, dout, grads):
    h, cfg = p.tensors, p.config
    tok_cache, blocks, c_lnf, y_shape, c_head = cache
    dpose_tok, dwh, dbh = core.linear_backward(c_head, h["head.w"], dout)
    grads["head.w"] += dwh
    grads["head.b"] += dbh
    dy = np.zeros(y_shape)
    dy[:, 0, :] = dpose_tok
    dseq, dgf, dbf = core.layernorm_backward(c_lnf, h["ln_f.g"], dy)
    grads["ln_f.g"] += dgf
    grads["ln_f.b"] += dbf
    for i in range(cfg.layers - 1, -1, -1):
        pre = f"blocks.{i}"
        c_ln1, c_att, c_ln2, c_l1, c_g, c_l2 = blocks[i]
        dz, dw2, db2 = core.linear_backward(c_l2, h[f"{pre}.mlp.2.w"], dseq)
        grads[f"{pre}.mlp.2.w"] += dw2
        grads[f"{pre}.mlp.2.b"] += db2
        dh1 = core.gelu_backward(c_g, dz)
        dw_, dw1, db1 = core.linear_backward(c_l1, h[f"{pre}.mlp.1.w"], dh1)
        grads[f"{pre}.mlp.1.w"] += dw1
        grads[f"{pre}.mlp.1.b"] += db1
        dx_ln2, dg2, dbg2 = core.layernorm_backward(c_ln2, h[f"{pre}.ln2.g"], dw_)
        grads[f"{pre}.ln2.g"] += dg2
        grads[f"{pre}.ln2.b"] += dbg2
        dseq = dseq + dx_ln2
        da = _attention_backward(h, f"{pre}.attn", c_att, dseq, grads)
        dx_ln1, dg1, dbg1 = core.layernorm_backward(c_ln1, h[f"{pre}.ln1.g"], da)
        grads[f"{pre}.ln1.g"] += dg1
        grads[f"{pre}.ln1.b"] += dbg1
        dseq = dseq + dx_ln1
    # token embeddings
    c_psi, c_p, c_t, c_c = tok_cache
    grads["token_pos"] += dseq.sum(axis=0)
    _, dwp, dbp = core.linear_backward(c_p, h["pose_in.w"], dseq[:, 0, :])
    grads["pose_in.w"] += dwp
    grads["pose_in.b"] += dbp
    _, dwt, dbt = core.linear_backward(c_t, h["time_in.w"], dseq[:, 1, :])
    grads["time_in.w"] += dwt
    grads["time_in.b"] += dbt
    dpsi, dwc, dbc = core.linear_backward(c_c, h["cond_in.w"], dseq[:, 2, :])
    grads["cond_in.w"] += dwc
    grads["cond_in.b"] += dbc
    _, dwpsi, dbpsi = core.linear_backward(c_psi, h["psi.w"], dpsi)
    grads["psi.w"] += dwpsi
    grads["psi.b"] += dbpsi


def _mlp_forward(p: DenoiserParams, x, temb, cond):
    h, cfg = p.tensors, p.config
    psi, c_psi = core.linear_forward(cond, h["psi.w"], h["psi.b"])
    feat = np.concatenate([x, temb, psi], axis=-1)
    caches = []
    z = feat
    for i in range(cfg.layers):
        a, c_lin = core.linear_forward(z, h[f"mlp.{i}.w"], h[f"mlp.{i}.b"])
        z, c_g = core.gelu_forward(a)
        check_finite(z, f"mlp.{i}")
        caches.append((c_lin, c_g))
    out, c_head = core.linear_forward(z, h["head.w"], h["head.b"])
    check_finite(out, "head")
    return out, (c_psi, caches, c_head)


def _mlp_backward(p: DenoiserParams, cache, dout, grads):
    h, cfg = p.tensors, p.config
    c_psi, caches, c_head = cache
    dz, dwh, dbh = core.linear_backward(c_head, h["head.w"], dout)
    grads["head.w"] += dwh
    grads["head.b"] += dbh
    for i in range(cfg.layers - 1, -1, -1):
        c_lin, c_g = caches[i]
        da = core.gelu_backward(c_g, dz)
        dz, dw, db = core.linear_backward(c_lin, h[f"mlp.{i}.w"], da)
        grads[f"mlp.{i}.w"] += dw
        grads[f"mlp.{i}.b"] += db
    dfeat = dz
    dpsi = dfeat[:, POSE_DIM + cfg.time_width:]
    _, dwpsi, dbpsi = core.linear_backward(c_psi, h["psi.w"], dpsi)
    grads["psi.w"] += dwpsi
    grads["psi.b"] += dbpsi


def denoiser_forward_batch(p: DenoiserParams, x, t, cond, return_cache=False):
    """Batched forward: x (B,7), t (B,) int, cond (B,cond_dim) -> (B,7)."""
    x = np.asarray(x, dtype=np.float64)
    cond = np.asarray(cond, dtype=np.float64)
    if cond.shape[-1] != p.config.cond_dim:
        raise ValueError(
            f"condition dim {cond.shape[-1]} does not match configured "
            f"cond_dim {p.config.cond_dim}"
        )
    temb = core.time_embedding(t, p.config.time_width)
    fwd = _transformer_forward if p.config.arch == "transformer" else _mlp_forward
    out, cache = fwd(p, x, temb, cond)
    return (out, cache) if return_cache else out


def denoiser_forward(p: DenoiserParams, pose_t, t: int, cond) -> np.ndarray:
    """Single-sample forward: predicted clean pose vector (7,)."""
    out = denoiser_forward_batch(p, np.asarray(pose_t)[None, :], [t], np.asarray(cond)[None, :])
    return out[0]


def denoiser_backward(p: DenoiserParams, batch, targets, loss_kind: str):
    """Loss + exact parameter gradients for one batch.

    batch is (x, t, cond) arrays; targets (B,7).  Returns (loss, grads dict
    shaped like p.tensors).
    """
    x, t, cond = batch
    if len(np.atleast_2d(x)) == 0:
        raise ValueError("empty batch")
    pred, cache = denoiser_forward_batch(p, x, t, cond, return_cache=True)
    loss, dpred = core.loss_and_grad(pred, np.asarray(targets, dtype=np.float64), loss_kind)
    grads = p.zeros_like()
    bwd = _transformer_backward if p.config.arch == "transformer" else _mlp_backward
    bwd(p, cache, dpred, grads)
    return loss, grads
