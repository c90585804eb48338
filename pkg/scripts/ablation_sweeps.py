"""Token-count, fusion-weight and component sweeps on synthetic data.

Writes ``sweep_<axis>.csv`` (axis, value, srcc, plcc) per axis.

    python3 scripts/ablation_sweeps.py --axes n_tok,alpha --out results/sweeps
"""

import argparse
from pathlib import Path

from salvqa.ablation import AXES, SyntheticRunner, sweep_ablation, write_sweep_csv
from salvqa.data import SyntheticSpec
from salvqa.saliency import SaliencyNetConfig
from salvqa.training import SaliencyTrainConfig, VQATrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--axes", default="n_tok,alpha,components")
    ap.add_argument("--out", default="results/sweeps")
    ap.add_argument("--quality-videos", type=int, default=24)
    ap.add_argument("--saliency-epochs", type=int, default=30)
    ap.add_argument("--vqa-epochs", type=int, default=40)
    ap.add_argument("--eval-split", default="heldout", choices=["heldout", "all"])
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    runner = SyntheticRunner(
        data=SyntheticSpec(seed=args.seed, num_quality_videos=args.quality_videos),
        saliency=SaliencyNetConfig(),
        saliency_train=SaliencyTrainConfig(epochs=args.saliency_epochs, seed=args.seed),
        vqa_train=VQATrainConfig(lr=3e-3, epochs=args.vqa_epochs, batch_size=8, seed=args.seed),
        seed=args.seed,
        eval_split=args.eval_split,
    )
    for axis in args.axes.split(","):
        if axis not in AXES:
            ap.error(f"unknown axis {axis!r}; choose from {sorted(AXES)}")
        rows = sweep_ablation(axis, runner)
        write_sweep_csv(out / f"sweep_{axis}.csv", rows)
        print(f"{axis:>10}  {'srcc':>8}  {'plcc':>8}")
        for r in rows:
            print(f"{r['value']!s:>10}  {r['srcc']:+.4f}  {r['plcc']:+.4f}")
        print()


if __name__ == "__main__":
    main()
