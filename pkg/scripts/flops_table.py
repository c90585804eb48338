"""Analytic compute table for the four compared models.

    python3 scripts/flops_table.py --flop-per-mac 1 --out results/flops.csv
"""

import argparse
from pathlib import Path

from salvqa.ablation import write_csv
from salvqa.flops import flops_table, vivit_dagr_ratio

PUBLISHED = {"dagr": 59.0, "vivit": 141.0, "fastvqa": 279.0, "fastvqa_m": 46.0}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--flop-per-mac", type=float, default=1.0, help="1 counts MACs, 2 counts multiply and add")
    ap.add_argument("--out", default=None, help="optional CSV path")
    args = ap.parse_args()
    rows = flops_table(args.flop_per_mac)
    print(f"{'model':<10} {'GFLOPs':>9} {'reported':>9} {'rel.err':>8}")
    for r in rows:
        ref = PUBLISHED[r["model"]] * args.flop_per_mac
        print(f"{r['model']:<10} {r['gflops']:9.2f} {ref:9.1f} {r['gflops'] / ref - 1:+8.3f}")
    print(f"vivit/dagr ratio {vivit_dagr_ratio():.3f}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        cols = list(rows[0])
        write_csv(args.out, cols, [[r[c] for c in cols] for r in rows])


if __name__ == "__main__":
    main()
