"""3D U-Net saliency predictor with register tokens and bottleneck gating."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from . import functional as F
from .nn import Conv3d, Module
from .registers import RegisterTokens, augment_input
from .rng import RngState
from .tensor import Tensor, as_tensor


@dataclass
class SaliencyNetConfig:
    video_channels: int = 3
    n_tokens: int = 4
    token_dim: int = 8
    stage_channels: tuple = (16, 32)
    bottleneck_channels: int = 64
    attention_kernel: tuple = (1, 1, 1)
    skip_connections: bool = True
    pool_window: tuple = (1, 2, 2)

    def __post_init__(self):
        self.stage_channels = tuple(int(c) for c in self.stage_channels)
        self.attention_kernel = tuple(int(k) for k in self.attention_kernel)
        self.pool_window = tuple(int(k) for k in self.pool_window)
        if len(self.stage_channels) < 2:
            raise ValueError("need at least two encoder stages")
        if any(b <= a for a, b in zip(self.stage_channels, self.stage_channels[1:])):
            raise ValueError(f"stage_channels must be strictly increasing: {self.stage_channels}")
        if self.n_tokens < 0 or self.token_dim < 1:
            raise ValueError("n_tokens must be >= 0 and token_dim >= 1")

    @property
    def in_channels(self) -> int:
        return self.video_channels + self.n_tokens

    @property
    def reduction(self) -> tuple:
        """Cumulative pooling factor per (T, H, W) axis."""
        return tuple(w ** len(self.stage_channels) for w in self.pool_window)

    def to_dict(self) -> dict:
        return asdict(self)


class SaliencyNet(Module):
    """Encoder, gated bottleneck and decoder; outputs ``[B,1,T,H,W]`` in (0,1)."""

    def __init__(self, cfg: SaliencyNetConfig, rng: RngState):
        self.cfg = cfg
        self.reg = RegisterTokens(cfg.n_tokens, cfg.token_dim, rng) if cfg.n_tokens > 0 else None
        chans = cfg.stage_channels
        ins = (cfg.in_channels,) + chans[:-1]
        self.enc = [Conv3d(ci, co, 3, rng=rng) for ci, co in zip(ins, chans)]
        self.bottleneck = Conv3d(chans[-1], cfg.bottleneck_channels, 3, rng=rng)
        self.attention = Conv3d(chans[-1], cfg.bottleneck_channels, cfg.attention_kernel, rng=rng)
        dec = []
        prev = cfg.bottleneck_channels
        for co in reversed(chans):
            c_in = prev + co if cfg.skip_connections else prev
            dec.append(Conv3d(c_in, co, 3, rng=rng))
            prev = co
        self.dec = dec
        self.head = Conv3d(chans[0], 1, 1, rng=rng)

    # Checkpoint names: register tokens under "reg.", the rest under "sal.".
    def named_parameters(self, prefix: str = ""):
        for name, p in super().named_parameters():
            yield (name if name.startswith("reg.") else "sal." + name), p

    def tokens_field(self, T: int, H: int, W: int) -> Tensor | None:
        return None if self.reg is None else self.reg.project(T, H, W)

    def augment(self, video: Tensor) -> Tensor:
        return augment_input(video, self.tokens_field(*video.shape[-3:]))

    def encode(self, x: Tensor) -> tuple[Tensor, list[Tensor]]:
        red = self.cfg.reduction
        if any(s % r for s, r in zip(x.shape[2:], red)):
            raise ValueError(f"extents {x.shape[2:]} not divisible by pooling factors {red}")
        skips = []
        h = x
        for conv in self.enc:
            h = conv(h).relu()
            skips.append(h)
            h = F.max_pool(h, self.cfg.pool_window)
        return h, skips

    def bottleneck_attention(self, z: Tensor) -> tuple[Tensor, Tensor]:
        mask = self.attention(z).sigmoid()
        return self.bottleneck(z).relu() * mask, mask

    def decode(self, zp: Tensor, skips: list[Tensor]) -> Tensor:
        if len(skips) != len(self.dec):
            raise ValueError(f"expected {len(self.dec)} skip tensors, got {len(skips)}")
        h = zp
        for conv, skip in zip(self.dec, reversed(skips)):
            h = F.upsample_trilinear(h, skip.shape[2:])
            if self.cfg.skip_connections:
                h = F.concat([h, skip], axis=1)
            h = conv(h).relu()
        return self.head(h).sigmoid()

    def forward(self, video) -> Tensor:
        """Saliency for ``video[B,C,T,H,W]`` (or ``[C,T,H,W]``).

        Spatial extents that do not divide the pooling factors are zero-padded
        at the bottom/right and the prediction is cropped back.
        """
        video = as_tensor(video)
        if video.ndim == 4:
            video = video.reshape((1,) + video.shape)
        if video.shape[1] != self.cfg.video_channels:
            raise ValueError(f"expected {self.cfg.video_channels} video channels, got {video.shape[1]}")
        T, H, W = video.shape[2:]
        red = self.cfg.reduction
        padded = [(-s) % r for s, r in zip((T, H, W), red)]
        if any(padded):
            video = F.pad(video, [(0, p) for p in padded])
        z, skips = self.encode(self.augment(video))
        zp, _ = self.bottleneck_attention(z)
        out = self.decode(zp, skips)
        if any(padded):
            out = out[:, :, :T, :H, :W]
        return out


def forward_saliency(net: SaliencyNet, video) -> Tensor:
    """Per-frame saliency ``[B,1,T,H,W]`` for a clip array, Tensor or VideoClip."""
    frames = getattr(video, "frames", video)
    return net(frames)


def parameter_names(cfg: SaliencyNetConfig) -> list[str]:
    return [name for name, _ in SaliencyNet(cfg, RngState(0)).named_parameters()]


__all__ = ["SaliencyNet", "SaliencyNetConfig", "forward_saliency", "parameter_names"]
