"""Closed-form compute estimates for the quality model and two reference designs.

Counts are multiply-accumulates (one MAC per FLOP by default, set
``flop_per_mac=2`` for the multiply-plus-add convention). Each model is a
leading-order monomial in its complexity class times one per-model constant:

* ``dagr``: ``kappa_sp * T * N * d`` for the convolutional backbone plus
  ``layers * 2 * T^2 * d`` for the frame-level attention (QK^T and AV).
  ``N = H * W`` input pixels and ``kappa_sp = 40``, the ResNet-50 cost of
  about 4.1 GMAC at 224x224 spread over its 2048-wide output.
* ``vivit``: ``kappa_v * (T * N)^2 * d`` with ``N = 196`` patches of 16x16
  on a 224x224 frame and ``d = 768``.
* ``fastvqa``: ``kappa_f * T * G_f^2 * P * d`` with ``P = 64`` patch tokens
  per 32x32 fragment and ``d = 768``.
* ``fastvqa_m``: the same expression on half the frames with ``G_f = 4``.

``kappa_v`` and ``kappa_f`` are fitted once to the published ViViT and
FAST-VQA totals; the remaining rows are predictions of the model.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

MODELS = ("dagr", "vivit", "fastvqa", "fastvqa_m")

KAPPA_SPATIAL = 40.0
KAPPA_VIVIT = 75.0
KAPPA_FASTVQA = 14_480.0
FRAGMENT_TOKENS = 64


@dataclass(frozen=True)
class CostModelConfig:
    T: int = 8
    N: int = 224 * 398  # spatial tokens per frame (pixels for dagr, patches for vivit)
    d: int = 2048
    G_f: int = 7
    layers: int = 2
    flop_per_mac: float = 1.0

    def __post_init__(self):
        for name in ("T", "N", "d", "G_f", "layers"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.flop_per_mac <= 0:
            raise ValueError("flop_per_mac must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


DEFAULT_CONFIGS = {
    "dagr": CostModelConfig(T=8, N=224 * 398, d=2048),
    "vivit": CostModelConfig(T=8, N=(224 // 16) ** 2, d=768),
    "fastvqa": CostModelConfig(T=8, d=768, G_f=7),
    "fastvqa_m": CostModelConfig(T=8, d=768, G_f=4),
}


def dagr_terms(cfg: CostModelConfig) -> tuple[float, float]:
    """(spatial, attention) MACs."""
    spatial = KAPPA_SPATIAL * cfg.T * cfg.N * cfg.d
    attention = cfg.layers * 2.0 * cfg.T**2 * cfg.d
    return spatial, attention


def flops_estimate(model: str, cfg: CostModelConfig | None = None) -> float:
    """GFLOPs of ``model`` under ``cfg`` (per-model defaults when omitted)."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {MODELS}")
    cfg = cfg or DEFAULT_CONFIGS[model]
    if model == "dagr":
        macs = sum(dagr_terms(cfg))
    elif model == "vivit":
        macs = KAPPA_VIVIT * (cfg.T * cfg.N) ** 2 * cfg.d
    else:
        frames = cfg.T / 2 if model == "fastvqa_m" else cfg.T
        macs = KAPPA_FASTVQA * frames * cfg.G_f**2 * FRAGMENT_TOKENS * cfg.d
    return macs * cfg.flop_per_mac / 1e9


def flops_table(flop_per_mac: float = 1.0) -> list[dict]:
    rows = []
    for model in MODELS:
        cfg = replace(DEFAULT_CONFIGS[model], flop_per_mac=flop_per_mac)
        rows.append({"model": model, "gflops": flops_estimate(model, cfg), **cfg.to_dict()})
    return rows


def vivit_dagr_ratio() -> float:
    return flops_estimate("vivit") / flops_estimate("dagr")
