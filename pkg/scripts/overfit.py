"""Overfit checks: the saliency net on four synthetic clips, then the quality
model on sixteen synthetic videos scored on its own training set.

    python3 scripts/overfit.py --out results/overfit
"""

import argparse
import time
from pathlib import Path

import numpy as np

from salvqa.ablation import write_csv
from salvqa.data import SyntheticSpec, generate_synthetic
from salvqa.rng import RngState
from salvqa.saliency import SaliencyNet, SaliencyNetConfig
from salvqa.stats import plcc, srcc
from salvqa.training import (
    SaliencyTrainConfig,
    VQATrainConfig,
    fused_inputs,
    predict_vqa,
    train_saliency,
    train_vqa,
)
from salvqa.vqa import VQAConfig, VQAModel


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/overfit")
    ap.add_argument("--saliency-iterations", type=int, default=500)
    ap.add_argument("--target", type=float, default=-0.95)
    ap.add_argument("--vqa-epochs", type=int, default=40)
    ap.add_argument("--vqa-lr", type=float, default=3e-3)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    sal, qual = generate_synthetic(SyntheticSpec(seed=args.seed, num_saliency_videos=4, num_quality_videos=16))
    net = SaliencyNet(SaliencyNetConfig(n_tokens=4), RngState(args.seed).spawn(1))
    start = time.perf_counter()
    # four clips in one batch of four: one update per epoch
    history = train_saliency(net, sal, SaliencyTrainConfig(epochs=args.saliency_iterations, seed=args.seed,
                                                           stop_below=args.target))
    write_csv(out / "saliency_loss.csv", ["epoch", "kl", "cc", "total"],
              [[r["epoch"], r["kl"], r["cc"], r["total"]] for r in history])
    print(f"saliency: total {history[-1]['total']:+.4f} after {len(history)} iterations "
          f"({time.perf_counter() - start:.1f} s)")

    start = time.perf_counter()
    x = fused_inputs(qual, net, 0.5)
    y = np.array([c.mos for c in qual])
    model = VQAModel(VQAConfig(), RngState(args.seed).spawn(2))
    history = train_vqa(model, x, y, VQATrainConfig(lr=args.vqa_lr, epochs=args.vqa_epochs, batch_size=8,
                                                    seed=args.seed))
    write_csv(out / "vqa_loss.csv", ["epoch", "loss", "lr"], [[r["epoch"], r["loss"], r["lr"]] for r in history])
    pred = predict_vqa(model, x)
    write_csv(out / "vqa_predictions.csv", ["video_id", "mos_true", "mos_pred"],
              [[c.source_id, c.mos, p] for c, p in zip(qual, pred)])
    print(f"vqa: train SRCC {srcc(pred, y):.4f}  PLCC {plcc(pred, y):.4f} "
          f"({time.perf_counter() - start:.1f} s)")


if __name__ == "__main__":
    main()
