"""Saliency training losses and fixation-based evaluation metrics.

Maps are arrays whose last two axes are pixels; every leading index is one
frame. Losses operate on :class:`Tensor` inputs and average per-frame values
uniformly. Metrics take numpy arrays and use population standard deviations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, as_tensor


@dataclass
class SaliencyLossConfig:
    gamma: float = 0.01
    eps: float = 1e-8

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.eps <= 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")


_PIX = (-2, -1)


def normalize_map(s, eps: float = 1e-8):
    """Per-frame ``(v + eps) / sum(v + eps)``; Tensor in, Tensor out."""
    is_tensor = isinstance(s, Tensor)
    s = as_tensor(s)
    if (s.data < 0).any():
        raise ValueError("saliency map has negative values")
    shifted = s + eps if eps else s
    total = shifted.sum(axis=_PIX, keepdims=True)
    if (total.data <= 0).any():
        raise ValueError("cannot normalise a frame with zero total mass")
    out = shifted / total
    return out if is_tensor else out.data


def _check_same(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"extent mismatch: {a.shape} vs {b.shape}")
    if a.ndim < 2:
        raise ValueError("maps need at least two (pixel) axes")


def kl_loss(s, s_hat) -> Tensor:
    """Mean over frames of ``(1/N_pix) * sum_j S_j log(S_j / S_hat_j)``.

    Both inputs must already be per-frame distributions; only ``s_hat``
    carries a gradient. Zero entries of ``s`` contribute zero.
    """
    s, s_hat = as_tensor(s), as_tensor(s_hat)
    _check_same(s, s_hat)
    target = s.data
    n_pix = target.shape[-1] * target.shape[-2]
    safe = np.where(target > 0, target, 1.0)
    log_target = Tensor(np.where(target > 0, np.log(safe), 0.0))
    weights = Tensor(target)
    per_frame = (weights * (log_target - s_hat.log())).sum(axis=_PIX) * (1.0 / n_pix)
    return per_frame.mean()


def _frame_pearson(a: Tensor, b: Tensor) -> Tensor:
    ac = a - a.mean(axis=_PIX, keepdims=True)
    bc = b - b.mean(axis=_PIX, keepdims=True)
    var_a = (ac * ac).sum(axis=_PIX)
    var_b = (bc * bc).sum(axis=_PIX)
    if (var_a.data == 0).any() or (var_b.data == 0).any():
        raise ValueError("zero-variance saliency frame; correlation undefined")
    return (ac * bc).sum(axis=_PIX) / (var_a * var_b).sqrt()


def cc_loss(s, s_hat) -> Tensor:
    """Negative per-frame Pearson correlation, averaged over frames."""
    s, s_hat = as_tensor(s), as_tensor(s_hat)
    _check_same(s, s_hat)
    return -_frame_pearson(s_hat, s).mean()


def saliency_loss(s, s_hat, cfg: SaliencyLossConfig | None = None) -> Tensor:
    """``gamma * KL(norm(S) || norm(S_hat)) + CC(S, S_hat)``."""
    cfg = cfg or SaliencyLossConfig()
    s, s_hat = as_tensor(s), as_tensor(s_hat)
    cc = cc_loss(s, s_hat)
    kl = kl_loss(normalize_map(s, cfg.eps), normalize_map(s_hat, cfg.eps))
    return kl * cfg.gamma + cc


def saliency_loss_terms(s, s_hat, cfg: SaliencyLossConfig | None = None) -> tuple[Tensor, Tensor, Tensor]:
    """``(kl, cc, total)`` sharing one graph."""
    cfg = cfg or SaliencyLossConfig()
    s, s_hat = as_tensor(s), as_tensor(s_hat)
    cc = cc_loss(s, s_hat)
    kl = kl_loss(normalize_map(s, cfg.eps), normalize_map(s_hat, cfg.eps))
    return kl, cc, kl * cfg.gamma + cc


# ---------------------------------------------------------------------------
# evaluation metrics (numpy)
# ---------------------------------------------------------------------------

def _frames(*maps) -> list[np.ndarray]:
    arrays = [np.asarray(m, dtype=np.float64) for m in maps]
    shape = arrays[0].shape
    if any(a.shape != shape for a in arrays):
        raise ValueError(f"extent mismatch: {[a.shape for a in arrays]}")
    if len(shape) < 2:
        raise ValueError("maps need at least two (pixel) axes")
    return [a.reshape(-1, shape[-2] * shape[-1]) for a in arrays]


def nss(s_hat, fixations) -> float:
    """Mean standardised saliency at fixated pixels, averaged over frames."""
    sal, fix = _frames(s_hat, fixations)
    scores = []
    for m, f in zip(sal, fix):
        mask = f > 0
        if not mask.any():
            raise ValueError("frame without fixations")
        std = m.std()
        if std == 0:
            raise ValueError("zero-variance saliency map")
        scores.append(((m - m.mean()) / std)[mask].mean())
    return float(np.mean(scores))


def cc_metric(s, s_hat) -> float:
    """Pearson correlation between maps, averaged over frames."""
    a, b = _frames(s, s_hat)
    scores = []
    for x, y in zip(a, b):
        xc, yc = x - x.mean(), y - y.mean()
        denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
        if denom == 0:
            raise ValueError("zero-variance saliency map")
        scores.append((xc * yc).sum() / denom)
    return float(np.mean(scores))


def _auc_judd_frame(m: np.ndarray, mask: np.ndarray) -> float:
    n_fix = int(mask.sum())
    n_other = mask.size - n_fix
    if n_fix == 0 or n_other == 0:
        raise ValueError("AUC-Judd needs at least one fixated and one non-fixated pixel")
    fix_vals = np.sort(m[mask])[::-1]
    other_vals = np.sort(m[~mask])
    thresholds = np.unique(fix_vals)[::-1]
    # counts of values >= threshold
    tp = n_fix - np.searchsorted(np.sort(fix_vals), thresholds, side="left")
    fp = n_other - np.searchsorted(other_vals, thresholds, side="left")
    tpr = np.concatenate([[0.0], tp / n_fix, [1.0]])
    fpr = np.concatenate([[0.0], fp / n_other, [1.0]])
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))


def auc_judd(s_hat, fixations) -> float:
    """ROC area with thresholds at fixated saliency values, averaged over frames."""
    sal, fix = _frames(s_hat, fixations)
    return float(np.mean([_auc_judd_frame(m, f > 0) for m, f in zip(sal, fix)]))
