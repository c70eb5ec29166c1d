"""Small grammars and evaluators shared by the test modules."""

from reinbo.grammar import LEARNER, PREPROCESSOR, OperationSpec, ParamSpec, PipelineGrammar, StageSpec

# one line per acceptance criterion, printed in the pytest terminal summary
ACCEPTANCE_LINES: list[str] = []


def flat_grammar(ops_per_stage=(3, 3), n_params=0):
    """Op names S{stage}_{op}; every op carries ``n_params`` unit-interval params."""
    K = len(ops_per_stage)
    stages = []
    for s, n_ops in enumerate(ops_per_stage, start=1):
        kind = LEARNER if s == K else PREPROCESSOR
        ops = tuple(
            OperationSpec(i, f"S{s}_{i}", kind, tuple(ParamSpec(f"x{j}") for j in range(n_params)))
            for i in range(1, n_ops + 1)
        )
        stages.append(StageSpec(s, ops))
    return PipelineGrammar(tuple(stages))


class TableEvaluator:
    """Deterministic reward per pipeline key; counts calls."""

    def __init__(self, grammar, rewards, default=0.0):
        self.grammar = grammar
        self.rewards = rewards
        self.default = default
        self.calls = 0

    def __call__(self, configured):
        self.calls += 1
        return self.rewards.get(configured.pipeline.action_ids, self.default)
