"""Saliency-fused spatio-temporal quality regressor.

Each frame is blended with its saliency map, encoded by a small residual CNN
and globally pooled. Sinusoidal position codes are added and a post-norm
transformer (no norm after attention, norm after the feed-forward residual)
mixes the frame features. Time-averaged spatial and temporal features are
concatenated and mapped to a score by one affine layer.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import functional as F
from .nn import Conv2d, Linear, Module
from .rng import RngState
from .tensor import Tensor, as_tensor, no_grad


@dataclass
class SpatialEncoderConfig:
    stem_channels: int = 8
    stage_channels: tuple = (8, 16, 16, 32)
    stage_strides: tuple = (1, 2, 2, 2)
    bias: bool = True

    def __post_init__(self):
        self.stage_channels = tuple(int(c) for c in self.stage_channels)
        self.stage_strides = tuple(int(s) for s in self.stage_strides)
        if len(self.stage_channels) < 2:
            raise ValueError("spatial encoder needs at least two stages")
        if len(self.stage_strides) != len(self.stage_channels):
            raise ValueError("one stride per stage")
        if self.feature_dim < 8:
            raise ValueError(f"feature dim must be >= 8, got {self.feature_dim}")

    @property
    def feature_dim(self) -> int:
        return self.stage_channels[-1]


@dataclass
class TemporalEncoderConfig:
    layers: int = 2
    heads: int = 2
    ffn_dim: int = 64
    eps: float = 1e-5


@dataclass
class VQALossConfig:
    beta: float = 0.1
    temperature: float = 0.5

    def __post_init__(self):
        if self.beta < 0 or self.temperature <= 0:
            raise ValueError("need beta >= 0 and temperature > 0")


@dataclass
class VQAConfig:
    spatial: SpatialEncoderConfig = field(default_factory=SpatialEncoderConfig)
    temporal: TemporalEncoderConfig = field(default_factory=TemporalEncoderConfig)
    alpha: float = 0.5
    use_spatial: bool = True
    use_temporal: bool = True

    def __post_init__(self):
        if isinstance(self.spatial, dict):
            self.spatial = SpatialEncoderConfig(**self.spatial)
        if isinstance(self.temporal, dict):
            self.temporal = TemporalEncoderConfig(**self.temporal)
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not (self.use_spatial or self.use_temporal):
            raise ValueError("at least one of the spatial/temporal branches must be used")
        d = self.spatial.feature_dim
        if d % self.temporal.heads:
            raise ValueError(f"feature dim {d} not divisible by {self.temporal.heads} heads")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# saliency inference and fusion
# ---------------------------------------------------------------------------

def infer_saliency_for_vqa(clip, saliency_model) -> list[np.ndarray]:
    """One ``[H, W]`` map per frame from the frozen saliency net."""
    frames = getattr(clip, "frames", clip)
    frames = np.asarray(frames)
    with no_grad():
        maps = saliency_model(frames).data[0, 0]
    return [maps[t] for t in range(maps.shape[0])]


def fuse_frame(frame, saliency, alpha: float):
    """``(1 - alpha) * I + alpha * (I * S)`` with ``S`` broadcast over channels."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if np.shape(frame)[-2:] != np.shape(saliency)[-2:]:
        raise ValueError(f"extent mismatch: {np.shape(frame)} vs {np.shape(saliency)}")
    if isinstance(frame, Tensor) or isinstance(saliency, Tensor):
        frame, saliency = as_tensor(frame), as_tensor(saliency)
        return frame * (1.0 - alpha) + (frame * saliency) * alpha
    frame = np.asarray(frame, dtype=np.float64)
    return (1.0 - alpha) * frame + alpha * (frame * np.asarray(saliency, dtype=np.float64))


def fuse_clip(frames: np.ndarray, maps, alpha: float) -> np.ndarray:
    """``frames[3,T,H,W]`` and ``maps[T,H,W]`` (or None) -> fused ``[T,3,H,W]``."""
    per_frame = np.moveaxis(np.asarray(frames, dtype=np.float64), 1, 0)
    if maps is None:
        return per_frame.copy()
    maps = np.asarray(maps)
    return np.stack([fuse_frame(per_frame[t], maps[t][None], alpha) for t in range(len(per_frame))])


# ---------------------------------------------------------------------------
# spatial encoder
# ---------------------------------------------------------------------------

class ResidualBlock(Module):
    def __init__(self, c_in: int, c_out: int, stride: int, bias: bool, rng: RngState):
        self.conv1 = Conv2d(c_in, c_out, 3, stride=stride, bias=bias, rng=rng)
        self.conv2 = Conv2d(c_out, c_out, 3, bias=bias, rng=rng)
        needs_proj = stride != 1 or c_in != c_out
        self.shortcut = Conv2d(c_in, c_out, 1, stride=stride, bias=bias, rng=rng) if needs_proj else None

    def forward(self, x: Tensor) -> Tensor:
        h = self.conv2(self.conv1(x).relu())
        skip = x if self.shortcut is None else self.shortcut(x)
        return (h + skip).relu()


class SpatialEncoder(Module):
    """Stem conv, residual stages, global average pool -> ``[N, d_f]``."""

    def __init__(self, cfg: SpatialEncoderConfig, rng: RngState):
        self.cfg = cfg
        self.stem = Conv2d(3, cfg.stem_channels, 3, bias=cfg.bias, rng=rng)
        blocks = []
        c_in = cfg.stem_channels
        for c_out, stride in zip(cfg.stage_channels, cfg.stage_strides):
            blocks.append(ResidualBlock(c_in, c_out, stride, cfg.bias, rng))
            c_in = c_out
        self.blocks = blocks

    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        if x.ndim == 3:
            x = x.reshape((1,) + x.shape)
        h = self.stem(x).relu()
        for block in self.blocks:
            h = block(h)
        pooled = F.global_avg_pool(h, 2)
        return pooled.reshape(pooled.shape[0], pooled.shape[1])


def spatial_features(fused, encoder: SpatialEncoder) -> Tensor:
    """``[3,H,W]`` -> ``[d_f]``; ``[N,3,H,W]`` -> ``[N,d_f]``."""
    fused = as_tensor(fused)
    out = encoder(fused)
    return out.reshape(out.shape[1]) if fused.ndim == 3 else out


# ---------------------------------------------------------------------------
# temporal encoder
# ---------------------------------------------------------------------------

def positional_encoding(t: int, d: int) -> np.ndarray:
    """``P[2i] = sin(t / 10000^(2i/d))``, ``P[2i+1] = cos(t / 10000^(2i/d))``."""
    if t < 0:
        raise ValueError("time index must be >= 0")
    p = np.zeros(d)
    even = np.arange(0, d, 2)
    angle = t / np.power(10000.0, even / d)
    p[0::2] = np.sin(angle)
    p[1::2] = np.cos(angle[: d // 2])
    return p


def positional_table(T: int, d: int) -> np.ndarray:
    return np.stack([positional_encoding(t, d) for t in range(T)])


class MultiHeadSelfAttention(Module):
    def __init__(self, d: int, heads: int, rng: RngState):
        if d % heads:
            raise ValueError(f"dim {d} not divisible by {heads} heads")
        self.heads = heads
        self.q = Linear(d, d, rng=rng)
        # a key bias only shifts every score in a row equally, which softmax ignores
        self.k = Linear(d, d, bias=False, rng=rng)
        self.v = Linear(d, d, rng=rng)
        self.o = Linear(d, d, rng=rng)

    def forward(self, x: Tensor) -> Tensor:
        B, T, d = x.shape
        h, dh = self.heads, d // self.heads

        def split(t: Tensor) -> Tensor:
            return t.reshape(B, T, h, dh).transpose(0, 2, 1, 3)

        q, k, v = split(self.q(x)), split(self.k(x)), split(self.v(x))
        scores = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(dh))
        attn = F.softmax(scores, axis=-1)
        ctx = (attn @ v).transpose(0, 2, 1, 3).reshape(B, T, d)
        return self.o(ctx)


class TemporalLayer(Module):
    def __init__(self, d: int, cfg: TemporalEncoderConfig, rng: RngState):
        self.eps = cfg.eps
        self.mhsa = MultiHeadSelfAttention(d, cfg.heads, rng)
        self.ffn1 = Linear(d, cfg.ffn_dim, rng=rng)
        self.ffn2 = Linear(cfg.ffn_dim, d, rng=rng)

    def forward(self, x: Tensor) -> Tensor:
        z = self.mhsa(x) + x
        return F.layernorm(self.ffn2(self.ffn1(z).relu()) + z, axis=-1, eps=self.eps)


class TemporalEncoder(Module):
    def __init__(self, d: int, cfg: TemporalEncoderConfig, rng: RngState):
        if d % cfg.heads:
            raise ValueError(f"dim {d} not divisible by {cfg.heads} heads")
        self.layers = [TemporalLayer(d, cfg, rng) for _ in range(cfg.layers)]

    def forward(self, x: Tensor) -> Tensor:
        squeeze = x.ndim == 2
        if squeeze:
            x = x.reshape((1,) + x.shape)
        if x.shape[1] < 1:
            raise ValueError("need at least one frame")
        for layer in self.layers:
            x = layer(x)
        return x.reshape(x.shape[1:]) if squeeze else x


def temporal_encode(f_tilde, encoder: TemporalEncoder) -> Tensor:
    return encoder(as_tensor(f_tilde))


# ---------------------------------------------------------------------------
# regression
# ---------------------------------------------------------------------------

def predict_quality(features: Tensor, encoded: Tensor, regressor: Linear,
                    use_spatial: bool = True, use_temporal: bool = True) -> Tensor:
    """Affine map of ``[mean_t F_t ; mean_t Y_t]``; inputs ``[T,d]`` or ``[B,T,d]``."""
    if features.shape[-2] == 0:
        raise ValueError("need at least one frame")
    if features.shape != encoded.shape:
        raise ValueError(f"shape mismatch {features.shape} vs {encoded.shape}")
    parts = []
    if use_spatial:
        parts.append(features.mean(axis=-2))
    if use_temporal:
        parts.append(encoded.mean(axis=-2))
    pooled = parts[0] if len(parts) == 1 else F.concat(parts, axis=-1)
    if pooled.ndim == 1:
        return regressor(pooled.reshape(1, -1)).reshape(())
    out = regressor(pooled)
    return out.reshape(out.shape[:-1])


class VQAModel(Module):
    def __init__(self, cfg: VQAConfig, rng: RngState):
        self.cfg = cfg
        d = cfg.spatial.feature_dim
        self.encoder = SpatialEncoder(cfg.spatial, rng)
        self.temporal = TemporalEncoder(d, cfg.temporal, rng)
        n_branches = int(cfg.use_spatial) + int(cfg.use_temporal)
        self.regressor = Linear(n_branches * d, 1, rng=rng)

    def named_parameters(self, prefix: str = ""):
        for name, p in super().named_parameters():
            yield "vqa." + name, p

    def features(self, fused) -> tuple[Tensor, Tensor]:
        """Spatial features ``F`` and transformer outputs ``Y``, both ``[B,T,d]``."""
        fused = as_tensor(fused)
        if fused.ndim == 4:
            fused = fused.reshape((1,) + fused.shape)
        B, T = fused.shape[:2]
        d = self.cfg.spatial.feature_dim
        feats = self.encoder(fused.reshape((B * T,) + fused.shape[2:])).reshape(B, T, d)
        encoded = self.temporal(feats + positional_table(T, d))
        return feats, encoded

    def forward(self, fused) -> Tensor:
        """Scores ``[B]`` for fused clips ``[B,T,3,H,W]``."""
        feats, encoded = self.features(fused)
        return predict_quality(feats, encoded, self.regressor, self.cfg.use_spatial, self.cfg.use_temporal)


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

def soft_rank(x: Tensor, temperature: float) -> Tensor:
    """``r_i = sum_j sigmoid((x_i - x_j) / temperature)``."""
    x = as_tensor(x)
    diff = x.reshape(-1, 1) - x.reshape(1, -1)
    return (diff * (1.0 / temperature)).sigmoid().sum(axis=1)


def pearson(a: Tensor, b: Tensor) -> Tensor:
    ac = a - a.mean()
    bc = b - b.mean()
    return (ac * bc).sum() / ((ac * ac).sum() * (bc * bc).sum()).sqrt()


def soft_spearman(pred, target, temperature: float) -> Tensor:
    return pearson(soft_rank(pred, temperature), soft_rank(as_tensor(np.asarray(getattr(target, "data", target))), temperature))


def vqa_loss(pred, target, cfg: VQALossConfig | None = None) -> Tensor:
    """``mean|pred - target| + beta * (1 - soft Spearman(pred, target))``."""
    cfg = cfg or VQALossConfig()
    pred = as_tensor(pred).reshape(-1)
    target = np.asarray(getattr(target, "data", target), dtype=np.float64).reshape(-1)
    if pred.shape[0] != target.shape[0]:
        raise ValueError("prediction and label batches differ in length")
    loss = (pred - target).abs().mean()
    if cfg.beta == 0:
        return loss
    if len(target) < 2:
        warnings.warn("batch of one: correlation term skipped", RuntimeWarning, stacklevel=2)
        return loss
    r_pred = soft_rank(pred, cfg.temperature)
    r_true = soft_rank(Tensor(target), cfg.temperature)
    if np.ptp(r_pred.data) == 0 or np.ptp(r_true.data) == 0:
        warnings.warn("constant ranks in batch: correlation term skipped", RuntimeWarning, stacklevel=2)
        return loss
    return loss + (1.0 - pearson(r_pred, r_true)) * cfg.beta
