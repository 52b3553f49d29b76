"""Transformer encoder building blocks.

Patch embedding with a class token and learned positional table,
multi-head self-attention, GELU MLP, layer normalization, and the
pre-norm residual block. Everything works on a single sequence (T, D)
or on stacked batches (..., T, D).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as tz
from .tensor import Tensor, ShapeError

LN_EPS = 1e-5
INIT_STD = 0.02  # cls token / positional table init


def glorot(shape, rng: np.random.Generator) -> Tensor:
    fan_in, fan_out = shape[0], shape[1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True)


@dataclass
class EmbeddingParams:
    """Patch projection, class token, and positional table for one site."""

    w: Tensor          # (in_dim, width)
    cls: Tensor        # (width,)
    pos: Tensor        # (patches + 1, width)

    @classmethod
    def init(cls, in_dim: int, width: int, patches: int, rng: np.random.Generator):
        return cls(
            w=glorot((in_dim, width), rng),
            cls=Tensor.randn((width,), rng, std=INIT_STD, requires_grad=True),
            pos=Tensor.randn((patches + 1, width), rng, std=INIT_STD, requires_grad=True),
        )

    def named(self, prefix: str):
        yield f"{prefix}.w", self.w
        yield f"{prefix}.cls", self.cls
        yield f"{prefix}.pos", self.pos


@dataclass
class EncoderLayerParams:
    """One pre-norm block: LN1, fused-head Q/K/V/output projections, LN2, MLP."""

    ln1_scale: Tensor
    ln1_shift: Tensor
    wq: Tensor         # (D, D), heads split by reshape
    wk: Tensor
    wv: Tensor
    wo: Tensor
    ln2_scale: Tensor
    ln2_shift: Tensor
    mlp_w1: Tensor     # (D, 4D)
    mlp_b1: Tensor
    mlp_w2: Tensor     # (4D, D)
    mlp_b2: Tensor

    @classmethod
    def init(cls, width: int, rng: np.random.Generator):
        hidden = 4 * width
        return cls(
            ln1_scale=Tensor.ones((width,), requires_grad=True),
            ln1_shift=Tensor.zeros((width,), requires_grad=True),
            wq=glorot((width, width), rng),
            wk=glorot((width, width), rng),
            wv=glorot((width, width), rng),
            wo=glorot((width, width), rng),
            ln2_scale=Tensor.ones((width,), requires_grad=True),
            ln2_shift=Tensor.zeros((width,), requires_grad=True),
            mlp_w1=glorot((width, hidden), rng),
            mlp_b1=Tensor.zeros((hidden,), requires_grad=True),
            mlp_w2=glorot((hidden, width), rng),
            mlp_b2=Tensor.zeros((width,), requires_grad=True),
        )

    def named(self, prefix: str):
        for name in ("ln1_scale", "ln1_shift", "wq", "wk", "wv", "wo",
                     "ln2_scale", "ln2_shift", "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2"):
            yield f"{prefix}.{name}", getattr(self, name)


@dataclass
class EncoderParams:
    """A stack of encoder blocks sharing one width and head count."""

    width: int
    heads: int
    layers: list[EncoderLayerParams] = field(default_factory=list)

    @classmethod
    def init(cls, width: int, depth: int, heads: int, rng: np.random.Generator):
        if width % heads:
            raise ShapeError(f"width {width} not divisible by {heads} heads")
        return cls(width=width, heads=heads,
                   layers=[EncoderLayerParams.init(width, rng) for _ in range(depth)])

    def named(self, prefix: str):
        for i, layer in enumerate(self.layers):
            yield from layer.named(f"{prefix}.{i}")


def patchify(signal: Tensor, k: int) -> Tensor:
    """Split the last axis into k contiguous patches: (..., d) -> (..., k, d/k)."""
    d = signal.shape[-1]
    if d % k:
        raise ShapeError(f"signal length {d} not divisible into {k} patches")
    return signal.reshape(signal.shape[:-1] + (k, d // k))


def embed(patches: Tensor, emb: EmbeddingParams) -> Tensor:
    """Project patches, prepend the class token, add positions.

    (..., P, in_dim) -> (..., P+1, width); row 0 is cls + pos[0], row i>=1
    is patches[i-1] @ w + pos[i].
    """
    p = patches.shape[-2]
    if patches.shape[-1] != emb.w.shape[0]:
        raise ShapeError(f"patch dim {patches.shape[-1]} != projection in_dim {emb.w.shape[0]}")
    if emb.pos.shape[0] != p + 1:
        raise ShapeError(f"positional table has {emb.pos.shape[0]} rows, need {p + 1}")
    proj = patches @ emb.w
    width = emb.w.shape[1]
    cls_row = emb.cls.reshape(1, width)
    if proj.ndim > 2:
        lead = proj.shape[:-2]
        tiled = tz.add(cls_row, Tensor.zeros(lead + (1, width)))  # broadcast cls over batch
        tokens = tz.concat([tiled, proj], axis=-2)
    else:
        tokens = tz.concat([cls_row, proj], axis=-2)
    return tokens + emb.pos


def layer_norm(x: Tensor, scale: Tensor, shift: Tensor, eps: float = LN_EPS) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = tz.mul(centered, centered).mean(axis=-1, keepdims=True)
    normed = centered / tz.sqrt(var + eps)
    return normed * scale + shift


def msa(z: Tensor, layer: EncoderLayerParams, heads: int,
        attn_sink: list | None = None) -> Tensor:
    """Multi-head self-attention over (..., T, D).

    Per head: softmax(Q K^T / sqrt(D/heads)) V; heads concatenated and
    output-projected. Every attention row sums to 1. ``attn_sink``, when
    given, collects the (..., heads, T, T) attention tensor.
    """
    t, d = z.shape[-2], z.shape[-1]
    if d % heads:
        raise ShapeError(f"model width {d} not divisible by {heads} heads")
    hd = d // heads
    lead = z.shape[:-2]
    nlead = len(lead)

    def split_heads(m: Tensor) -> Tensor:
        m = m.reshape(lead + (t, heads, hd))
        axes = tuple(range(nlead)) + (nlead + 1, nlead, nlead + 2)
        return m.transpose(axes)  # (..., heads, T, hd)

    q = split_heads(z @ layer.wq)
    k = split_heads(z @ layer.wk)
    v = split_heads(z @ layer.wv)

    kt_axes = tuple(range(nlead + 1)) + (nlead + 2, nlead + 1)
    scores = (q @ k.transpose(kt_axes)) * (1.0 / np.sqrt(hd))
    attn = tz.softmax(scores, axis=-1)
    if attn_sink is not None:
        attn_sink.append(attn)

    mixed = attn @ v  # (..., heads, T, hd)
    axes = tuple(range(nlead)) + (nlead + 1, nlead, nlead + 2)
    merged = mixed.transpose(axes).reshape(lead + (t, d))
    return merged @ layer.wo


def mlp(z: Tensor, layer: EncoderLayerParams) -> Tensor:
    """Position-wise linear -> GELU -> linear, hidden width 4D."""
    h = tz.gelu(z @ layer.mlp_w1 + layer.mlp_b1)
    return h @ layer.mlp_w2 + layer.mlp_b2


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity when rate is 0 or no rng is supplied."""
    if rate <= 0.0 or rng is None:
        return x
    keep = 1.0 - rate
    mask = Tensor((rng.random(x.shape) < keep) / keep)
    return tz.mul(x, mask)


def encoder_block(z: Tensor, layer: EncoderLayerParams, heads: int,
                  drop: float = 0.0, rng: np.random.Generator | None = None,
                  attn_sink: list | None = None) -> Tensor:
    """Pre-norm residual block; output shape equals input shape."""
    attended = msa(layer_norm(z, layer.ln1_scale, layer.ln1_shift), layer, heads, attn_sink)
    z = z + dropout(attended, drop, rng)
    fed = mlp(layer_norm(z, layer.ln2_scale, layer.ln2_shift), layer)
    return z + dropout(fed, drop, rng)


def encode(z: Tensor, enc: EncoderParams, drop: float = 0.0,
           rng: np.random.Generator | None = None,
           attn_sink: list | None = None) -> Tensor:
    """Run the full block stack; shape-preserving for any depth."""
    for layer in enc.layers:
        z = encoder_block(z, layer, enc.heads, drop, rng, attn_sink)
    return z
