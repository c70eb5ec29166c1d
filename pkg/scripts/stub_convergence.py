"""How often does the greedy policy find the designated pipeline on the stub?

Sweeps budgets on the built-in grammar and on a parameter-free grammar of
the same shape, so the effect of per-pipeline BO cost is visible.

    python scripts/stub_convergence.py --seeds 20 --budgets 100 300 1000
"""

import argparse

from reinbo.driver import reinbo_search
from reinbo.grammar import (
    LEARNER,
    PREPROCESSOR,
    OperationSpec,
    PipelineGrammar,
    StageSpec,
    UnconfiguredPipeline,
    default_grammar,
)
from reinbo.stub import StubEvaluator


def parameter_free_grammar(K=3, n_ops=5):
    stages = []
    for s in range(1, K + 1):
        kind = LEARNER if s == K else PREPROCESSOR
        stages.append(StageSpec(s, tuple(OperationSpec(i, f"S{s}_{i}", kind) for i in range(1, n_ops + 1))))
    return PipelineGrammar(tuple(stages))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--budgets", type=int, nargs="+", default=[100, 300, 1000])
    args = ap.parse_args()
    designated = (1, 1, 1)
    for name, g in (("built-in", default_grammar(10)), ("parameter-free", parameter_free_grammar())):
        target = g.pipeline_key(UnconfiguredPipeline(designated))
        for budget in args.budgets:
            hits, episodes = 0, 0
            for seed in range(args.seeds):
                res = reinbo_search(g, StubEvaluator(g, designated=designated, seed=seed), budget, seed=seed)
                hits += res.greedy_key == target
                episodes += len(res.episodes)
            print(f"{name:15s} budget {budget:5d}: {hits:3d}/{args.seeds} hits, "
                  f"{episodes / args.seeds:7.1f} episodes/run")


if __name__ == "__main__":
    main()
