"""Learnable register tokens used as extra input channels for the saliency net.

A token tensor ``R[1, N, d, 1, 1]`` is drawn from a standard normal. A grouped
1x1x1 convolution collapses each token's ``d`` entries to one value, which is
broadcast over the clip's ``T x H x W`` grid; the resulting ``N`` constant
fields are appended to the video channels.
"""

from __future__ import annotations

import numpy as np

from . import functional as F
from .nn import Module
from .rng import RngState
from .tensor import Tensor, parameter


class RegisterTokens(Module):
    def __init__(self, n_tokens: int, dim: int, rng: RngState):
        if n_tokens < 1 or dim < 1:
            raise ValueError(f"need n_tokens >= 1 and dim >= 1, got {n_tokens}, {dim}")
        self.n_tokens = n_tokens
        self.dim = dim
        self.R = parameter(rng.normal((1, n_tokens, dim, 1, 1)))
        # grouped conv weight: one d -> 1 kernel per token
        self.proj_w = parameter(rng.normal((n_tokens, dim, 1, 1, 1)) * np.sqrt(1.0 / dim))
        self.proj_b = parameter(np.zeros(n_tokens))

    def token_values(self) -> Tensor:
        """Per-token scalar after the grouped projection, shape ``[N]``."""
        n, d = self.n_tokens, self.dim
        return (self.R.reshape(n, d) * self.proj_w.reshape(n, d)).sum(axis=1) + self.proj_b

    def project(self, T: int, H: int, W: int) -> Tensor:
        if min(T, H, W) < 1:
            raise ValueError(f"target extents must be positive, got {(T, H, W)}")
        values = self.token_values().reshape(self.n_tokens, 1, 1, 1)
        return values.broadcast_to((self.n_tokens, T, H, W))


def init_tokens(n_tokens: int, dim: int, rng: RngState) -> RegisterTokens:
    return RegisterTokens(n_tokens, dim, rng)


def project_tokens(tokens: RegisterTokens, T: int, H: int, W: int) -> Tensor:
    return tokens.project(T, H, W)


def augment_input(video: Tensor, projected: Tensor | None) -> Tensor:
    """Append token fields to ``video`` along the channel axis.

    ``video`` is ``[C,T,H,W]`` or ``[B,C,T,H,W]``; ``projected`` is
    ``[N,T,H,W]`` and is shared across the batch. ``None`` or ``N == 0``
    returns ``video`` itself.
    """
    if projected is None or projected.shape[0] == 0:
        return video
    if video.shape[-3:] != projected.shape[-3:]:
        raise ValueError(f"extent mismatch: video {video.shape} vs tokens {projected.shape}")
    if video.ndim == 4:
        return F.concat([video, projected], axis=0)
    if video.ndim == 5:
        batch = video.shape[0]
        fields = projected.reshape((1,) + projected.shape).broadcast_to((batch,) + projected.shape)
        return F.concat([video, fields], axis=1)
    raise ValueError(f"video must be 4-D or 5-D, got shape {video.shape}")
