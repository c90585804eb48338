"""Training loops for the saliency net and the quality head."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .nn import Adam, CosineAnnealing
from .objectives import SaliencyLossConfig, saliency_loss_terms
from .rng import RngState
from .saliency import SaliencyNet
from .tensor import Tensor, no_grad

log = logging.getLogger(__name__)


@dataclass
class SaliencyTrainConfig:
    lr: float = 5e-3
    batch_size: int = 4
    epochs: int = 180
    gamma: float = 0.01
    seed: int = 0
    warmup_steps: int = 20  # linear ramp of the step size over the first updates
    stop_below: float | None = None  # stop once the epoch's mean total loss drops below this

    def to_dict(self) -> dict:
        return asdict(self)


def _batches(n: int, batch_size: int, rng: RngState) -> list[np.ndarray]:
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def train_saliency(net: SaliencyNet, clips, cfg: SaliencyTrainConfig) -> list[dict]:
    """Adam on ``gamma * KL + CC``; returns one ``{epoch, kl, cc, total}`` row per epoch.

    Without normalisation layers a full-size first Adam step grows every
    conv's output at once and can saturate the output sigmoid, so the step
    size ramps up linearly over ``warmup_steps`` updates.
    """
    frames = np.stack([c.frames for c in clips])
    targets = np.stack([c.saliency for c in clips])[:, None]
    loss_cfg = SaliencyLossConfig(gamma=cfg.gamma)
    opt = Adam(net.parameters(), lr=cfg.lr)
    rng = RngState(cfg.seed)
    history = []
    step = 0
    for epoch in range(cfg.epochs):
        sums = np.zeros(3)
        batches = _batches(len(clips), cfg.batch_size, rng)
        for idx in batches:
            step += 1
            opt.lr = cfg.lr * min(1.0, step / cfg.warmup_steps) if cfg.warmup_steps > 0 else cfg.lr
            opt.zero_grad()
            pred = net(frames[idx])
            kl, cc, total = saliency_loss_terms(Tensor(targets[idx]), pred, loss_cfg)
            total.backward()
            opt.step()
            sums += [kl.item(), cc.item(), total.item()]
        row = {"epoch": epoch, **{k: float(v) for k, v in zip(("kl", "cc", "total"), sums / len(batches))}}
        history.append(row)
        log.debug("saliency epoch %d: %s", epoch, row)
        if cfg.stop_below is not None and row["total"] < cfg.stop_below:
            break
    return history


def predict_saliency(net: SaliencyNet, clip_frames: np.ndarray) -> np.ndarray:
    """Frozen inference: ``[C,T,H,W]`` -> ``[T,H,W]``."""
    with no_grad():
        return net(clip_frames).data[0, 0]


@dataclass
class VQATrainConfig:
    lr: float = 1e-5
    batch_size: int = 5
    epochs: int = 300
    beta: float = 0.1
    temperature: float = 0.5
    lr_min: float = 0.0
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def train_vqa(model, fused: np.ndarray, mos: np.ndarray, cfg: VQATrainConfig) -> list[dict]:
    """Adam + cosine annealing on ``L1 + beta * (1 - soft Spearman)``.

    ``fused`` holds pre-fused frames ``[V, T, 3, H, W]``; the saliency net is
    not involved, so nothing upstream receives gradients.
    """
    from .vqa import VQALossConfig, vqa_loss

    loss_cfg = VQALossConfig(beta=cfg.beta, temperature=cfg.temperature)
    opt = Adam(model.parameters(), lr=cfg.lr)
    steps_per_epoch = -(-len(fused) // cfg.batch_size)
    sched = CosineAnnealing(opt, cfg.epochs * steps_per_epoch, cfg.lr_min)
    rng = RngState(cfg.seed)
    history = []
    for epoch in range(cfg.epochs):
        total = 0.0
        batches = _batches(len(fused), cfg.batch_size, rng)
        for idx in batches:
            opt.zero_grad()
            pred = model(fused[idx])
            loss = vqa_loss(pred, mos[idx], loss_cfg)
            loss.backward()
            opt.step()
            sched.step()
            total += loss.item()
        history.append({"epoch": epoch, "loss": total / len(batches), "lr": opt.lr})
    return history


def fused_inputs(clips, saliency_net: SaliencyNet | None, alpha: float) -> np.ndarray:
    """Stack of saliency-fused frames ``[V, T, 3, H, W]``.

    Maps come from the frozen net; with no net (or ``alpha == 0``) the raw
    frames are returned unchanged.
    """
    from .vqa import fuse_clip

    out = []
    for clip in clips:
        maps = None
        if saliency_net is not None and alpha != 0:
            maps = predict_saliency(saliency_net, clip.frames)
        out.append(fuse_clip(clip.frames, maps, alpha))
    return np.stack(out)


def predict_vqa(model, fused: np.ndarray) -> np.ndarray:
    with no_grad():
        return model(fused).data.copy()
