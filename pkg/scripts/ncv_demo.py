"""Nested-CV benchmark on a synthetic task, with reports written to --out.

    python scripts/ncv_demo.py --budget 50 --out runs/ncv_demo
"""

import argparse

from reinbo.config import RunConfig
from reinbo.driver import emit_ncv_reports, run_ncv_benchmark

BLOBS = {"kind": "blobs", "n": 300, "p": 10, "n_classes": 3, "separation": 0.6, "n_informative": 4, "seed": 0}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--budget", type=int, default=50)
    ap.add_argument("--outer-folds", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/ncv_demo")
    args = ap.parse_args()
    cfg = RunConfig(synthetic=BLOBS, budget=args.budget, outer_folds=args.outer_folds, seed=args.seed)
    res = run_ncv_benchmark(cfg)
    for f in res.folds:
        print(f"fold {f.fold} {f.method:13s} {f.best_key:45s} inner {f.inner_accuracy:.3f} outer mmce {f.outer_mmce:.3f}")
    for m, v in res.aggregated_mmce.items():
        print(f"{m}: aggregated mmce {v:.4f}")
    emit_ncv_reports(res, args.out)
    print(f"reports in {args.out}")


if __name__ == "__main__":
    main()
