"""Finite-difference verification of every differentiable building block.

Each check compares the analytic gradient against central differences
(64-bit, eps=1e-5) and reports the max relative error
|analytic - fd| / max(1, |fd|). The suite backs the ``gradcheck`` CLI
subcommand; the build is healthy when every entry is below 1e-4.
"""

from __future__ import annotations

import numpy as np

from . import nn, tensor as tz
from .model import ModelConfig, build_variant, forward
from .montage import RegionPartition
from .tensor import Tensor, gradcheck
from .train import bce_loss

GRAD_TOL = 1e-4


def _proj(shape, rng) -> Tensor:
    """Fixed random projection so scalar losses see every output entry."""
    return Tensor(rng.standard_normal(shape))


def _run(checks) -> list[tuple[str, float]]:
    return [(name, gradcheck(f, np.asarray(x, dtype=np.float64))) for name, f, x in checks]


def primitive_checks(seed: int = 0) -> list[tuple[str, float]]:
    """Element-wise, linear-algebra, shape, and reduction primitives."""
    rng = np.random.default_rng(seed)
    x23 = rng.standard_normal((2, 3))
    x31 = rng.standard_normal((3, 1))
    x34 = rng.standard_normal((3, 4))
    x42 = rng.standard_normal((4, 2))
    bat = rng.standard_normal((2, 3, 4))
    pos = np.abs(rng.standard_normal((2, 3))) + 0.5
    c34 = Tensor(rng.standard_normal((3, 4)))
    c42 = Tensor(rng.standard_normal((4, 2)))
    denom_shift = Tensor(np.full((3, 1), 3.0))

    r23 = _proj((2, 3), rng)
    r34 = _proj((3, 4), rng)
    r32 = _proj((3, 2), rng)
    r242 = _proj((2, 3, 2), rng)
    r324 = _proj((3, 2, 4), rng)
    r61 = _proj((6, 1), rng)
    r22 = _proj((2, 2), rng)
    r64 = _proj((6, 4), rng)
    r3 = _proj((3,), rng)
    r2 = _proj((2,), rng)

    checks = [
        ("add broadcast", lambda t: tz.mul(tz.add(t, c34), r34).sum(), x31),
        ("sub broadcast", lambda t: tz.mul(tz.sub(c34, t), r34).sum(), x31),
        ("mul broadcast", lambda t: tz.mul(tz.mul(t, c34), r34).sum(), x31),
        ("div numerator", lambda t: tz.mul(tz.div(t, c34), r34).sum(), x31),
        ("div denominator",
         lambda t: tz.mul(tz.div(c34, tz.add(t, denom_shift)), r34).sum(), x31),
        ("scale", lambda t: tz.mul(tz.scale(t, -2.5), r23).sum(), x23),
        ("matmul left", lambda t: tz.mul(t @ c42, r32).sum(), x34),
        ("matmul right", lambda t: tz.mul(Tensor(x34) @ t, r32).sum(), x42),
        ("matmul batched", lambda t: tz.mul(t @ c42, r242).sum(), bat),
        ("transpose", lambda t: tz.mul(t.transpose((1, 0, 2)), r324).sum(), bat),
        ("reshape", lambda t: tz.mul(t.reshape(6, 1), r61).sum(), x23),
        ("slice", lambda t: tz.mul(t[0:2, 1:3], r22).sum(), x34),
        ("concat", lambda t: tz.mul(tz.concat([t, c34], axis=0), r64).sum(), x34),
        ("sum axis", lambda t: tz.mul(t.sum(axis=0), r3).sum(), x23),
        ("mean axis", lambda t: tz.mul(t.mean(axis=1), r2).sum(), x23),
        ("mean all", lambda t: t.mean(), bat),
        ("softmax", lambda t: tz.mul(tz.softmax(t, axis=-1), r23).sum(), x23),
        ("sigmoid", lambda t: tz.mul(tz.sigmoid(t), r23).sum(), x23),
        ("gelu", lambda t: tz.mul(tz.gelu(t), r23).sum(), 2.0 * x23),
        ("exp", lambda t: tz.mul(tz.exp(t), r23).sum(), x23),
        ("log", lambda t: tz.mul(tz.log(t), r23).sum(), pos),
        ("sqrt", lambda t: tz.mul(tz.sqrt(t), r23).sum(), pos),
        ("clip interior", lambda t: tz.mul(tz.clip(t, -10.0, 10.0), r23).sum(), x23),
    ]
    return _run(checks)


def block_checks(seed: int = 1) -> list[tuple[str, float]]:
    """Layer norm, embedding, attention, MLP, and one full encoder block."""
    rng = np.random.default_rng(seed)
    width, patches, heads = 8, 3, 2
    emb = nn.EmbeddingParams.init(in_dim=5, width=width, patches=patches, rng=rng)
    layer = nn.EncoderLayerParams.init(width, rng)
    ln_scale = Tensor(rng.standard_normal((width,)) * 0.3 + 1.0)
    ln_shift = Tensor(rng.standard_normal((width,)) * 0.1)
    r_tok = _proj((patches + 1, width), rng)
    r_seq = _proj((4, width), rng)
    x_seq = rng.standard_normal((4, width))
    x_pat = rng.standard_normal((patches, 5))

    checks = [
        ("layer norm", lambda t: tz.mul(nn.layer_norm(t, ln_scale, ln_shift), r_seq).sum(),
         x_seq),
        ("embed", lambda t: tz.mul(nn.embed(t, emb), r_tok).sum(), x_pat),
        ("attention", lambda t: tz.mul(nn.msa(t, layer, heads), r_seq).sum(), x_seq),
        ("mlp", lambda t: tz.mul(nn.mlp(t, layer), r_seq).sum(), x_seq),
        ("encoder block", lambda t: tz.mul(nn.encoder_block(t, layer, heads), r_seq).sum(),
         x_seq),
        ("bce", lambda t: bce_loss(tz.sigmoid(t), np.array([1.0, 0.0, 1.0])),
         rng.standard_normal((3,))),
    ]
    return _run(checks)


def reduced_model_config() -> ModelConfig:
    """Small full-pipeline model: N=4, d=32, K=4, all widths 8, 4 regions."""
    return ModelConfig(n_channels=4, signal_len=32, patches=4, d_t=8, d_e=8, d_b=8,
                       l_t=1, l_e=1, l_b=1, heads=4,
                       partition=RegionPartition.contiguous(4, 4))


def model_checks(seed: int = 2) -> list[tuple[str, float]]:
    """End-to-end gradients through the reduced-size full model."""
    rng = np.random.default_rng(seed)
    config = reduced_model_config()
    model = build_variant(config, seed=seed)
    x_fixed = rng.standard_normal((config.n_channels, config.signal_len))
    y = np.array(1.0)

    def loss_for_input(t: Tensor) -> Tensor:
        return bce_loss(forward(t, model), y)

    def loss_with_param(setter):
        def f(t: Tensor) -> Tensor:
            setter(model, t)
            return bce_loss(forward(Tensor(x_fixed), model), y)
        return f

    slots = [
        ("model d/d input", loss_for_input, x_fixed),
        ("model d/d head.w", loss_with_param(lambda m, t: setattr(m, "head_w", t)),
         model.head_w.data.copy()),
        ("model d/d temporal emb.w",
         loss_with_param(lambda m, t: setattr(m.temporal.emb, "w", t)),
         model.temporal.emb.w.data.copy()),
        ("model d/d temporal emb.pos",
         loss_with_param(lambda m, t: setattr(m.temporal.emb, "pos", t)),
         model.temporal.emb.pos.data.copy()),
        ("model d/d electrode wq",
         loss_with_param(lambda m, t: setattr(m.electrode[0].enc.layers[0], "wq", t)),
         model.electrode[0].enc.layers[0].wq.data.copy()),
        ("model d/d brain emb.w",
         loss_with_param(lambda m, t: setattr(m.brain.emb, "w", t)),
         model.brain.emb.w.data.copy()),
    ]
    return _run(slots)


def gradcheck_suite() -> list[tuple[str, float]]:
    """All finite-difference checks; every entry should be < GRAD_TOL."""
    return primitive_checks() + block_checks() + model_checks()
