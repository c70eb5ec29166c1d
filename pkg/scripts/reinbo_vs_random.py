"""Paired-seed comparison of ReinBo and random search at equal budget.

    python scripts/reinbo_vs_random.py --task stub --budget 100 --seeds 10
    python scripts/reinbo_vs_random.py --task blobs --budget 100 --seeds 10
"""

import argparse

import numpy as np

from reinbo.config import RunConfig
from reinbo.driver import load_dataset, load_run_grammar, random_search, reinbo_search, search
from reinbo.grammar import default_grammar
from reinbo.stub import StubEvaluator

BLOBS = {"kind": "blobs", "n": 300, "p": 10, "n_classes": 3, "separation": 0.6, "n_informative": 4, "seed": 0}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--task", choices=["stub", "blobs"], default="stub")
    ap.add_argument("--budget", type=int, default=100)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--noise", type=float, default=0.05, help="stub noise sd")
    ap.add_argument("--width", type=float, default=None, help="stub hyperparameter response width")
    args = ap.parse_args()
    rows = []
    if args.task == "stub":
        g = default_grammar(10)
        for seed in range(args.seeds):
            kw = dict(noise_sd=args.noise, width=args.width, seed=seed)
            r = reinbo_search(g, StubEvaluator(g, **kw), args.budget, seed=seed)
            s = random_search(g, StubEvaluator(g, **kw), args.budget, seed=seed)
            rows.append((seed, r, s))
    else:
        cfg = RunConfig(synthetic=BLOBS, budget=args.budget)
        data = load_dataset(cfg)
        g = load_run_grammar(cfg, data)
        for seed in range(args.seeds):
            rows.append((seed, search(cfg, data, g, "reinbo", seed), search(cfg, data, g, "random_search", seed)))
    wins = 0
    for seed, r, s in rows:
        wins += r.best_accuracy >= s.best_accuracy
        print(f"seed {seed:2d}  reinbo {r.best_accuracy:.4f} ({r.best_key}, {len(r.dictionary)} pipelines)"
              f"  random {s.best_accuracy:.4f} ({s.best_key})")
    diff = np.array([r.best_accuracy - s.best_accuracy for _, r, s in rows])
    print(f"ReinBo >= random in {wins}/{len(rows)} seeds; mean difference {diff.mean():+.4f}")


if __name__ == "__main__":
    main()
