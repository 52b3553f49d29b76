"""Hierarchical temporal-spatial EEG classifier and its ablations.

The full model (variant ``tsert``) runs, per 6 s window:

  1. temporal stage: each channel's signal is split into K patches and
     encoded by one weight-shared transformer; token average -> one
     feature vector per channel,
  2. electrode stage: channels are grouped into brain regions; each
     region has its own small encoder over its electrodes' features,
     read at the class token,
  3. brain stage: one encoder over the region vectors, read at the
     class token,
  4. head: linear -> sigmoid -> probability of the "high" class.

Ablations keep subsets of the stages (``sert``, ``tert``, ``stert``) or
swap raw slices for band-power features (``tsert-psd``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn, tensor as tz
from .montage import RegionPartition
from .tensor import ShapeError, Tensor

VARIANTS = ("tsert", "sert", "tert", "stert", "tsert-psd")
TARGETS = ("arousal", "valence")


def normalize_variant(name: str) -> str:
    key = name.strip().lower().replace("_", "-")
    if key not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; choose from {', '.join(VARIANTS)}")
    return key


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters; defaults are the full-size profile."""

    n_channels: int = 32
    signal_len: int = 768
    patches: int = 6
    d_t: int = 64
    d_e: int = 32
    d_b: int = 64
    l_t: int = 1
    l_e: int = 2
    l_b: int = 2
    heads: int = 4
    variant: str = "tsert"
    target: str = "arousal"
    partition: RegionPartition = field(default_factory=RegionPartition.default_32)
    n_bands: int = 4

    def __post_init__(self):
        object.__setattr__(self, "variant", normalize_variant(self.variant))
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}; choose from {TARGETS}")
        if self.signal_len % self.patches:
            raise ShapeError(
                f"signal_len {self.signal_len} not divisible into {self.patches} patches")
        for label, width in (("d_t", self.d_t), ("d_e", self.d_e), ("d_b", self.d_b)):
            if width % self.heads:
                raise ShapeError(f"{label}={width} not divisible by {self.heads} heads")
        if self.partition.n_channels != self.n_channels:
            raise ShapeError(
                f"partition covers {self.partition.n_channels} channels, "
                f"config has {self.n_channels}")

    @property
    def patch_len(self) -> int:
        return self.signal_len // self.patches

    @property
    def n_regions(self) -> int:
        return self.partition.n_regions


@dataclass
class SiteParams:
    """Embedding plus encoder stack for one site of the hierarchy."""

    emb: nn.EmbeddingParams
    enc: nn.EncoderParams

    @classmethod
    def init(cls, in_dim: int, width: int, patches: int, depth: int, heads: int,
             rng: np.random.Generator) -> "SiteParams":
        return cls(emb=nn.EmbeddingParams.init(in_dim, width, patches, rng),
                   enc=nn.EncoderParams.init(width, depth, heads, rng))

    def named(self, prefix: str):
        yield from self.emb.named(f"{prefix}.emb")
        yield from self.enc.named(f"{prefix}.enc")


@dataclass
class TsertModel:
    """Parameter groups for one variant; unused stages stay None."""

    config: ModelConfig
    temporal: SiteParams | None = None
    proj: Tensor | None = None                       # sert: shared d -> D_T map
    electrode: list[SiteParams] = field(default_factory=list)
    brain: SiteParams | None = None
    head_w: Tensor = None
    head_b: Tensor = None

    def named_params(self):
        """(name, tensor) pairs in a stable order; drives optimizer/checkpoints."""
        if self.temporal is not None:
            yield from self.temporal.named("temporal")
        if self.proj is not None:
            yield "proj.w", self.proj
        for r, site in enumerate(self.electrode):
            yield from site.named(f"electrode.{r}")
        if self.brain is not None:
            yield from self.brain.named("brain")
        yield "head.w", self.head_w
        yield "head.b", self.head_b

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_params()]

    def forward(self, x: Tensor) -> Tensor:
        return forward(x, self)

    def __call__(self, x: Tensor) -> Tensor:
        return forward(x, self)


def build_variant(config: ModelConfig, seed: int = 0,
                  rng: np.random.Generator | None = None) -> TsertModel:
    """Allocate and initialize the parameter groups a variant needs."""
    rng = np.random.default_rng(seed) if rng is None else rng
    c = config
    model = TsertModel(config=c)

    if c.variant in ("tsert", "tert", "tsert-psd"):
        in_dim = c.n_bands if c.variant == "tsert-psd" else c.patch_len
        model.temporal = SiteParams.init(in_dim, c.d_t, c.patches, c.l_t, c.heads, rng)
    if c.variant == "sert":
        model.proj = nn.glorot((c.signal_len, c.d_t), rng)

    if c.variant != "tert":
        elec_in = c.patch_len if c.variant == "stert" else c.d_t
        model.electrode = [
            SiteParams.init(elec_in, c.d_e, m_r, c.l_e, c.heads, rng)
            for m_r in c.partition.sizes()]
        model.brain = SiteParams.init(c.d_e, c.d_b, c.n_regions, c.l_b, c.heads, rng)
    if c.variant == "stert":
        model.temporal = SiteParams.init(c.d_b, c.d_t, c.patches, c.l_t, c.heads, rng)

    head_in = {"tsert": c.d_b, "sert": c.d_b, "tsert-psd": c.d_b,
               "tert": c.n_channels * c.d_t, "stert": c.d_t}[c.variant]
    model.head_w = nn.glorot((head_in, 1), rng)
    model.head_b = Tensor.zeros((1,), requires_grad=True)
    return model


def param_count(model: TsertModel) -> int:
    """Number of trainable scalars."""
    return sum(t.size for _, t in model.named_params())


# -- stage ops ----------------------------------------------------------------


def temporal_extract(x: Tensor, model: TsertModel) -> Tensor:
    """Per-channel patch encoding with shared weights.

    (..., N, d) -> (..., N, D_T): patchify each channel, run the shared
    encoder, average all K+1 token rows.
    """
    c = model.config
    if x.shape[-1] != c.signal_len or x.shape[-2] != c.n_channels:
        raise ShapeError(f"expected (..., {c.n_channels}, {c.signal_len}), got {x.shape}")
    patches = nn.patchify(x, c.patches)
    return _encode_patches(patches, model)


def _encode_patches(patches: Tensor, model: TsertModel) -> Tensor:
    """(..., N, K, in_dim) -> (..., N, D_T) through the shared temporal site."""
    c = model.config
    tokens = nn.embed(patches, model.temporal.emb)
    assert tokens.shape[-2:] == (c.patches + 1, c.d_t)
    encoded = nn.encode(tokens, model.temporal.enc)
    return tz.mean(encoded, axis=-2)


def _gather_rows(z: Tensor, idx: tuple[int, ...]) -> Tensor:
    """Select rows of the second-to-last axis in the given order."""
    parts = [z[(Ellipsis, slice(i, i + 1), slice(None))] for i in idx]
    return parts[0] if len(parts) == 1 else tz.concat(parts, axis=-2)


def region_readout(z_t: Tensor, model: TsertModel) -> Tensor:
    """Per-region class-token features, before the brain-level encoder.

    (..., N, F) -> (..., R, D_E); F must match the electrode embeddings'
    input dim (D_T for the full model). Region r's row depends only on
    the channels the partition assigns to region r, which makes this the
    natural probe for which regions drive a prediction.
    """
    c = model.config
    if z_t.shape[-2] != c.n_channels:
        raise ShapeError(f"expected {c.n_channels} channel rows, got {z_t.shape}")
    region_vecs = []
    for site, idx in zip(model.electrode, c.partition.indices):
        rows = _gather_rows(z_t, idx)
        tokens = nn.embed(rows, site.emb)
        assert tokens.shape[-2:] == (len(idx) + 1, c.d_e)
        encoded = nn.encode(tokens, site.enc)
        region_vecs.append(encoded[(Ellipsis, slice(0, 1), slice(None))])
    return tz.concat(region_vecs, axis=-2)


def spatial_hierarchy(z_t: Tensor, model: TsertModel) -> Tensor:
    """Region encoders over electrode features, then one brain-level encoder.

    (..., N, F) -> (..., D_B); both levels read the class token.
    """
    c = model.config
    stacked = region_readout(z_t, model)
    tokens = nn.embed(stacked, model.brain.emb)
    assert tokens.shape[-2:] == (c.n_regions + 1, c.d_b)
    encoded = nn.encode(tokens, model.brain.enc)
    return encoded[(Ellipsis, 0, slice(None))]


def classify(z: Tensor, model: TsertModel) -> Tensor:
    """(..., F) feature -> (...) probability via the linear head."""
    if z.shape[-1] != model.head_w.shape[0]:
        raise ShapeError(f"head expects width {model.head_w.shape[0]}, got {z.shape}")
    lead = z.shape[:-1]
    logit = z.reshape(lead + (1, z.shape[-1])) @ model.head_w + model.head_b
    return tz.sigmoid(logit.reshape(lead))


# -- full forward -------------------------------------------------------------


def forward(x: Tensor, model: TsertModel) -> Tensor:
    """Probability of the high class; single sample or leading batch axes.

    Raw-signal variants take (..., N, d); the band-power variant takes
    (..., N, K, n_bands).
    """
    c = model.config
    single_ndim = 3 if c.variant == "tsert-psd" else 2
    single = x.ndim == single_ndim
    if single:
        x = x.reshape((1,) + x.shape)

    if c.variant == "tsert":
        p = classify(spatial_hierarchy(temporal_extract(x, model), model), model)
    elif c.variant == "tsert-psd":
        if x.shape[-3:] != (c.n_channels, c.patches, c.n_bands):
            raise ShapeError(
                f"expected (..., {c.n_channels}, {c.patches}, {c.n_bands}), got {x.shape}")
        p = classify(spatial_hierarchy(_encode_patches(x, model), model), model)
    elif c.variant == "sert":
        if x.shape[-1] != c.signal_len or x.shape[-2] != c.n_channels:
            raise ShapeError(f"expected (..., {c.n_channels}, {c.signal_len}), got {x.shape}")
        p = classify(spatial_hierarchy(x @ model.proj, model), model)
    elif c.variant == "tert":
        z_t = temporal_extract(x, model)
        flat = z_t.reshape(z_t.shape[:-2] + (c.n_channels * c.d_t,))
        p = classify(flat, model)
    elif c.variant == "stert":
        patches = nn.patchify(x, c.patches)  # (..., N, K, d')
        slice_vecs = []
        for k in range(c.patches):
            pk = patches[(Ellipsis, slice(None), k, slice(None))]
            z_k = spatial_hierarchy(pk, model)
            slice_vecs.append(z_k.reshape(z_k.shape[:-1] + (1, z_k.shape[-1])))
        seq = tz.concat(slice_vecs, axis=-2)  # (..., K, D_B)
        tokens = nn.embed(seq, model.temporal.emb)
        encoded = nn.encode(tokens, model.temporal.enc)
        p = classify(encoded[(Ellipsis, 0, slice(None))], model)
    else:  # pragma: no cover - normalize_variant guards this
        raise ValueError(f"unknown variant {c.variant!r}")

    return p.reshape(()) if single else p
