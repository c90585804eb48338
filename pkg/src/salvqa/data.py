"""Clips, frame sampling, resizing, synthetic data and the on-disk dataset layout.

Dataset layout::

    root/
      synthetic_spec.json            (synthetic datasets only)
      saliency/<video_id>/           tensor container: frames, saliency, fixations, frame_indices
      saliency/{train,val,test}.txt
      quality/<video_id>/            tensor container: frames, frame_indices
      quality/labels.csv             video_id,mos
      quality/{train,val,test}.txt
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import functional as F
from .rng import RngState
from .serialize import load_tensors, save_tensors
from .tensor import Tensor, no_grad

SALIENCY_FRAMES = 60
VQA_FRAMES = 8
FRAME_SIZE = (224, 398)
SPLIT_FRACTIONS = (0.8, 0.1, 0.1)


@dataclass
class VideoClip:
    frames: np.ndarray  # [C, T, H, W] in [0, 1]
    source_id: str
    frame_indices: list
    mos: float | None = None
    saliency: np.ndarray | None = None  # [T, H, W]
    fixations: np.ndarray | None = None  # [T, H, W] binary

    def __post_init__(self):
        if self.frames.ndim != 4:
            raise ValueError(f"frames must be [C,T,H,W], got {self.frames.shape}")
        if self.frames.shape[1] != len(self.frame_indices):
            raise ValueError("frame count does not match frame_indices")
        if self.frames.min() < 0 or self.frames.max() > 1:
            raise ValueError("frame values must lie in [0, 1]")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[1]


def sample_frames(length: int, n_frames: int) -> list[int]:
    """Centre frame of each of ``n_frames`` equal segments of a ``length``-frame video.

    ``round((i + 0.5) * L / N - 0.5)`` with halves rounded up, which reduces to
    ``floor((2i + 1) * L / (2N))`` in integer arithmetic.
    """
    if length < 1 or n_frames < 1:
        raise ValueError(f"need length >= 1 and n_frames >= 1, got {length}, {n_frames}")
    return [min(max(((2 * i + 1) * length) // (2 * n_frames), 0), length - 1) for i in range(n_frames)]


def resize_frame(frame: np.ndarray, size=FRAME_SIZE) -> np.ndarray:
    """Bilinear resize (half-pixel centres) of the last two axes."""
    with no_grad():
        return F.resize_bilinear(Tensor(frame), size).data


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------

@dataclass
class SyntheticSpec:
    seed: int = 0
    num_saliency_videos: int = 4
    num_quality_videos: int = 16
    frames_per_video: int = 8
    source_length: int = 32
    height: int = 16
    width: int = 16
    blob_sigma: float = 2.0
    max_speed: float = 1.5
    noise_levels: list | None = None
    max_noise: float = 0.3
    mos_range: tuple = (1.0, 5.0)

    def __post_init__(self):
        if self.frames_per_video < 1 or self.source_length < 1:
            raise ValueError("synthetic videos need at least one frame")
        if min(self.height, self.width) < 1 or self.blob_sigma <= 0:
            raise ValueError("invalid synthetic geometry")
        if self.num_saliency_videos < 0 or self.num_quality_videos < 0:
            raise ValueError("video counts must be non-negative")

    def sigmas(self) -> list[float]:
        n = self.num_quality_videos
        if self.noise_levels is None:
            return list(np.linspace(0.0, self.max_noise, n)) if n > 1 else [0.0] * n
        levels = [float(s) for s in self.noise_levels]
        return [levels[i % len(levels)] for i in range(n)]

    def to_dict(self) -> dict:
        return asdict(self)


def mos_from_sigma(sigma: float, sigma_max: float, mos_range=(1.0, 5.0)) -> float:
    lo, hi = mos_range
    if sigma_max <= 0:
        return hi
    return hi - (hi - lo) * sigma / sigma_max


def _trajectory(rng: RngState, spec: SyntheticSpec) -> np.ndarray:
    """Blob centres ``[L, 2]`` bouncing inside the frame."""
    h, w = spec.height, spec.width
    start = rng.uniform(2) * np.array([h - 1, w - 1])
    angle = 2 * np.pi * rng.uniform(1)[0]
    speed = spec.max_speed * (0.5 + 0.5 * rng.uniform(1)[0])
    vel = speed * np.array([np.sin(angle), np.cos(angle)])
    pos = start.copy()
    out = np.zeros((spec.source_length, 2))
    limits = np.array([h - 1, w - 1], dtype=float)
    for t in range(spec.source_length):
        out[t] = pos
        pos = pos + vel
        for a in range(2):
            if pos[a] < 0:
                pos[a], vel[a] = -pos[a], -vel[a]
            elif pos[a] > limits[a]:
                pos[a], vel[a] = 2 * limits[a] - pos[a], -vel[a]
        pos = np.clip(pos, 0, limits)
    return out


def _render(rng: RngState, spec: SyntheticSpec, centres: np.ndarray):
    """Frames ``[3, L, H, W]`` and blob density ``[L, H, W]`` (peak 1)."""
    h, w = spec.height, spec.width
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    d2 = (yy[None] - centres[:, 0, None, None]) ** 2 + (xx[None] - centres[:, 1, None, None]) ** 2
    density = np.exp(-d2 / (2 * spec.blob_sigma**2))
    base = 0.15 + 0.2 * rng.uniform(3)
    colour = 0.5 + 0.5 * rng.uniform(3)
    tilt = 0.1 * (rng.uniform(3) - 0.5)
    ramp = (xx / max(w - 1, 1))[None, None] * tilt[:, None, None, None]
    frames = base[:, None, None, None] + ramp + (colour - base)[:, None, None, None] * density[None]
    return np.clip(frames, 0.0, 1.0), density


def generate_synthetic(spec: SyntheticSpec) -> tuple[list[VideoClip], list[VideoClip]]:
    """Saliency clips (with density maps and blob-centre fixations) and MOS-labelled clips."""
    root = RngState(spec.seed)
    idx = sample_frames(spec.source_length, spec.frames_per_video)
    saliency_clips = []
    for v in range(spec.num_saliency_videos):
        rng = root.spawn(v)
        centres = _trajectory(rng, spec)
        frames, density = _render(rng, spec, centres)
        fix = np.zeros_like(density)
        cy = np.clip(np.floor(centres[:, 0] + 0.5).astype(int), 0, spec.height - 1)
        cx = np.clip(np.floor(centres[:, 1] + 0.5).astype(int), 0, spec.width - 1)
        fix[np.arange(spec.source_length), cy, cx] = 1.0
        saliency_clips.append(
            VideoClip(frames[:, idx], f"sal{v:04d}", list(idx), None, density[idx], fix[idx])
        )

    sigmas = spec.sigmas()
    sigma_max = max(sigmas) if sigmas else 0.0
    quality_clips = []
    for v, sigma in enumerate(sigmas):
        rng = root.spawn(100_000 + v)
        centres = _trajectory(rng, spec)
        frames, _ = _render(rng, spec, centres)
        frames = frames[:, idx]
        if sigma > 0:
            frames = np.clip(frames + sigma * rng.normal(frames.shape), 0.0, 1.0)
        mos = mos_from_sigma(sigma, sigma_max, spec.mos_range)
        quality_clips.append(VideoClip(frames, f"vqa{v:04d}", list(idx), float(mos)))
    return saliency_clips, quality_clips


# ---------------------------------------------------------------------------
# on-disk datasets
# ---------------------------------------------------------------------------

def split_ids(ids: list[str], seed: int, fractions=SPLIT_FRACTIONS) -> dict[str, list[str]]:
    order = [ids[i] for i in RngState(seed).permutation(len(ids))]
    n_train = int(round(fractions[0] * len(ids)))
    n_val = int(round(fractions[1] * len(ids)))
    return {
        "train": order[:n_train],
        "val": order[n_train : n_train + n_val],
        "test": order[n_train + n_val :],
    }


def _clip_tensors(clip: VideoClip) -> dict[str, np.ndarray]:
    out = {"frames": clip.frames, "frame_indices": np.asarray(clip.frame_indices, dtype=float)}
    if clip.saliency is not None:
        out["saliency"] = clip.saliency
    if clip.fixations is not None:
        out["fixations"] = clip.fixations
    return out


def write_dataset(root, saliency_clips, quality_clips, seed: int = 0, spec: SyntheticSpec | None = None) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    if spec is not None:
        (root / "synthetic_spec.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    for kind, clips in (("saliency", saliency_clips), ("quality", quality_clips)):
        kdir = root / kind
        kdir.mkdir(exist_ok=True)
        for clip in clips:
            save_tensors(_clip_tensors(clip), kdir / clip.source_id)
        for name, ids in split_ids([c.source_id for c in clips], seed).items():
            (kdir / f"{name}.txt").write_text("".join(f"{i}\n" for i in ids))
        if kind == "quality":
            with open(kdir / "labels.csv", "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["video_id", "mos"])
                for clip in clips:
                    writer.writerow([clip.source_id, repr(float(clip.mos))])
    return root


def read_labels(path) -> dict[str, float]:
    with open(path, newline="") as fh:
        return {row["video_id"]: float(row["mos"]) for row in csv.DictReader(fh)}


def read_split(root, kind: str, split: str) -> list[str]:
    kdir = Path(root) / kind
    if split == "all":
        return [line.strip() for s in ("train", "val", "test") for line in (kdir / f"{s}.txt").read_text().splitlines() if line.strip()]
    path = kdir / f"{split}.txt"
    if not path.exists():
        raise FileNotFoundError(f"no split file {path}")
    return [line.strip() for line in path.read_text().splitlines() if line.strip()]


def load_clip(root, kind: str, video_id: str, labels: dict | None = None) -> VideoClip:
    t = load_tensors(Path(root) / kind / video_id)
    mos = None if labels is None else labels.get(video_id)
    return VideoClip(
        t["frames"],
        video_id,
        [int(i) for i in t["frame_indices"]],
        mos,
        t.get("saliency"),
        t.get("fixations"),
    )


def load_dataset(root, kind: str, split: str = "all") -> list[VideoClip]:
    """Clips of one split, in split-file order."""
    root = Path(root)
    labels = read_labels(root / kind / "labels.csv") if kind == "quality" else None
    return [load_clip(root, kind, vid, labels) for vid in read_split(root, kind, split)]


__all__ = [
    "FRAME_SIZE",
    "SALIENCY_FRAMES",
    "VQA_FRAMES",
    "SyntheticSpec",
    "VideoClip",
    "generate_synthetic",
    "load_dataset",
    "resize_frame",
    "sample_frames",
    "split_ids",
    "write_dataset",
]
