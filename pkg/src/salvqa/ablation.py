"""Ablation sweeps over token count, fusion weight and model components, plus
register-token embedding export."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import SyntheticSpec, generate_synthetic, split_ids
from .rng import RngState
from .saliency import SaliencyNet, SaliencyNetConfig
from .stats import plcc, srcc
from .tensor import Tensor, no_grad
from .training import (
    SaliencyTrainConfig,
    VQATrainConfig,
    fused_inputs,
    predict_vqa,
    train_saliency,
    train_vqa,
)
from .vqa import VQAConfig, VQAModel

N_TOK_GRID = (2, 4, 8, 16)
ALPHA_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
# (use_spatial, use_temporal, use_saliency)
COMPONENTS = {
    "spatial-only": (True, False, False),
    "temporal-only": (False, True, False),
    "spatial+saliency": (True, False, True),
    "full": (True, True, True),
}
AXES = {"n_tok": N_TOK_GRID, "alpha": ALPHA_GRID, "components": tuple(COMPONENTS)}


class SweepError(RuntimeError):
    def __init__(self, config: dict, cause: Exception):
        super().__init__(f"run failed for {config}: {cause}")
        self.config = config


def sweep_ablation(axis: str, runner, values=None) -> list[dict]:
    """Run ``runner({axis: v})`` for each value; rows in value order.

    ``runner`` returns a mapping with at least ``srcc`` and ``plcc``.
    """
    if axis not in AXES:
        raise ValueError(f"unknown axis {axis!r}; choose from {sorted(AXES)}")
    values = AXES[axis] if values is None else tuple(values)
    rows = []
    for v in values:
        config = {axis: v}
        try:
            result = runner(config)
        except Exception as exc:
            raise SweepError(config, exc) from exc
        rows.append({"axis": axis, "value": v, "srcc": float(result["srcc"]), "plcc": float(result["plcc"])})
    return rows


@dataclass
class SyntheticRunner:
    """Trains and scores one configuration on a seeded synthetic dataset.

    The quality model is fit on the train split and scored on ``eval_split``
    (``"heldout"`` pools val and test, ``"all"`` scores every video).
    """

    data: SyntheticSpec = field(default_factory=SyntheticSpec)
    saliency: SaliencyNetConfig = field(default_factory=SaliencyNetConfig)
    saliency_train: SaliencyTrainConfig = field(default_factory=lambda: SaliencyTrainConfig(epochs=30))
    vqa: VQAConfig = field(default_factory=VQAConfig)
    vqa_train: VQATrainConfig = field(default_factory=lambda: VQATrainConfig(lr=3e-3, epochs=40, batch_size=8))
    seed: int = 0
    eval_split: str = "heldout"

    def __post_init__(self):
        self._nets: dict[int, SaliencyNet] = {}
        self._sal, self._qual = generate_synthetic(self.data)
        parts = split_ids([c.source_id for c in self._qual], self.seed)
        by_id = {c.source_id: c for c in self._qual}
        self._train = [by_id[i] for i in parts["train"]]
        if self.eval_split == "all":
            self._eval = list(self._qual)
        elif self.eval_split == "heldout":
            self._eval = [by_id[i] for i in parts["val"] + parts["test"]]
        else:
            raise ValueError(f"eval_split must be 'heldout' or 'all', got {self.eval_split!r}")

    def saliency_net(self, n_tok: int) -> SaliencyNet:
        if n_tok not in self._nets:
            cfg = replace(self.saliency, n_tokens=n_tok)
            net = SaliencyNet(cfg, RngState(self.seed).spawn(1))
            train_saliency(net, self._sal, self.saliency_train)
            self._nets[n_tok] = net
        return self._nets[n_tok]

    def __call__(self, config: dict) -> dict:
        n_tok = int(config.get("n_tok", self.saliency.n_tokens))
        alpha = float(config.get("alpha", self.vqa.alpha))
        use_spatial, use_temporal, use_sal = COMPONENTS[config.get("components", "full")]
        vqa_cfg = replace(self.vqa, alpha=alpha, use_spatial=use_spatial, use_temporal=use_temporal)
        net = self.saliency_net(n_tok) if use_sal and alpha != 0 else None
        model = VQAModel(vqa_cfg, RngState(self.seed).spawn(2))
        train_x = fused_inputs(self._train, net, alpha)
        train_y = np.array([c.mos for c in self._train])
        train_vqa(model, train_x, train_y, self.vqa_train)
        pred = predict_vqa(model, fused_inputs(self._eval, net, alpha))
        truth = np.array([c.mos for c in self._eval])
        return {
            "srcc": srcc(pred, truth),
            "plcc": plcc(pred, truth),
            "predictions": [(c.source_id, float(t), float(p)) for c, t, p in zip(self._eval, truth, pred)],
        }

    def to_dict(self) -> dict:
        return {
            "data": self.data.to_dict(),
            "saliency": self.saliency.to_dict(),
            "saliency_train": self.saliency_train.to_dict(),
            "vqa": self.vqa.to_dict(),
            "vqa_train": self.vqa_train.to_dict(),
            "seed": self.seed,
            "eval_split": self.eval_split,
        }


# ---------------------------------------------------------------------------
# register-token embeddings
# ---------------------------------------------------------------------------

def token_embeddings(net: SaliencyNet, frames: np.ndarray) -> np.ndarray:
    """Clip-conditioned token rows ``[N, d]``.

    Row ``n`` is ``R_n + c_n * w_n`` where ``w_n`` is the token's projection
    kernel and ``c_n`` is the mean first-stage activation weighted by the
    summed first-conv kernel of token channel ``n`` (divided by the number of
    first-stage channels). A fixed clip gives fixed rows; the static token
    parameters alone would give the same rows for every video.
    """
    if net.reg is None:
        raise ValueError("saliency net has no register tokens")
    reg, cfg = net.reg, net.cfg
    n, d = reg.n_tokens, reg.dim
    video = Tensor(np.asarray(frames, dtype=np.float64)[None])
    with no_grad():
        act = net.enc[0](net.augment(video)).relu().data
    mean_act = act.mean(axis=(0, 2, 3, 4))  # [O1]
    w = net.enc[0].weight.data[:, cfg.video_channels :]  # [O1, N, k, k, k]
    u = w.sum(axis=(2, 3, 4)).T  # [N, O1]
    c = u @ mean_act / mean_act.size
    return reg.R.data.reshape(n, d) + c[:, None] * reg.proj_w.data.reshape(n, d)


def export_register_embeddings(net: SaliencyNet, clips) -> list[tuple[str, np.ndarray]]:
    """``(video_id, mean over tokens of the clip-conditioned rows)`` per clip."""
    return [(c.source_id, token_embeddings(net, c.frames).mean(axis=0)) for c in clips]


# ---------------------------------------------------------------------------
# CSV writers
# ---------------------------------------------------------------------------

def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_sweep_csv(path, rows: list[dict]) -> Path:
    return write_csv(path, ["axis", "value", "srcc", "plcc"], [[r["axis"], r["value"], r["srcc"], r["plcc"]] for r in rows])


def write_predictions_csv(path, predictions) -> Path:
    return write_csv(path, ["video_id", "mos_true", "mos_pred"], predictions)


def write_embeddings_csv(path, embeddings) -> Path:
    dim = len(embeddings[0][1]) if embeddings else 0
    header = ["video_id"] + [f"e{i}" for i in range(dim)]
    return write_csv(path, header, [[vid, *map(float, vec)] for vid, vec in embeddings])


__all__ = [
    "ALPHA_GRID",
    "COMPONENTS",
    "N_TOK_GRID",
    "SweepError",
    "SyntheticRunner",
    "export_register_embeddings",
    "sweep_ablation",
    "token_embeddings",
]
