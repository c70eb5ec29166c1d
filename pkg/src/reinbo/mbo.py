"""Per-pipeline Bayesian-optimisation probe with a shared evaluation budget.

Every unconfigured pipeline that the agent rolls out gets its own entry in a
:class:`SurrogateDictionary`. The first probe of a pipeline spends an initial
Latin-hypercube design; every probe then spends ``n_probe`` EI-guided
evaluations. The entry's best accuracy so far is the RL reward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from reinbo import surrogate
from reinbo.errors import ContractViolation
from reinbo.grammar import ConfiguredPipeline, PipelineGrammar, UnconfiguredPipeline

Evaluator = Callable[[ConfiguredPipeline], float]


@dataclass(frozen=True)
class MBOConfig:
    n_init_min: int = 4
    init_multiplier: int = 2
    probe_multiplier: int = 2
    # math.inf disables suspension
    patience: float = math.inf
    improvement_epsilon: float = 1e-3
    noise_var: float = 1e-4
    candidates_per_dim: int = 1000

    def __post_init__(self) -> None:
        if self.n_init_min < 1 or self.init_multiplier < 0 or self.probe_multiplier < 1:
            raise ContractViolation("need n_init_min >= 1, init_multiplier >= 0, probe_multiplier >= 1")
        if self.patience < 1:
            raise ContractViolation("patience must be >= 1")

    def n_init(self, d: int) -> int:
        return 1 if d == 0 else max(self.n_init_min, self.init_multiplier * d)

    def n_probe(self, d: int) -> int:
        return 0 if d == 0 else self.probe_multiplier * d

    def hyper_policy(self) -> surrogate.HyperPolicy:
        return surrogate.HyperPolicy(noise_var=self.noise_var)


@dataclass
class BudgetLedger:
    """Evaluation budget in CV5-equivalent units (one configuration = one unit)."""

    limit: int
    used: int = 0

    def __post_init__(self) -> None:
        if self.limit < 0:
            raise ContractViolation("budget limit must be >= 0")

    @property
    def remaining(self) -> int:
        return self.limit - self.used

    @property
    def exhausted(self) -> bool:
        return self.used >= self.limit

    def charge(self, units: int = 1) -> bool:
        """Spend ``units``; returns False (and pins used at limit) if that would overrun."""
        if units < 1:
            raise ContractViolation("charge needs units >= 1")
        if self.used + units > self.limit:
            self.used = self.limit
            return False
        self.used += units
        return True


def charge(ledger: BudgetLedger, units: int = 1) -> bool:
    return ledger.charge(units)


@dataclass
class SurrogateEntry:
    pipeline: UnconfiguredPipeline
    d: int
    X: list[np.ndarray] = field(default_factory=list)
    y: list[float] = field(default_factory=list)
    configs: list[ConfiguredPipeline] = field(default_factory=list)
    best_y: float = -math.inf
    stale_probe_count: int = 0
    suspended: bool = False
    n_probes: int = 0
    hyper: tuple[np.ndarray, float] | None = None

    @property
    def n_evaluations(self) -> int:
        return len(self.y)

    @property
    def best_config(self) -> ConfiguredPipeline:
        return self.configs[int(np.argmax(self.y))]

    def design(self) -> surrogate.Design:
        return surrogate.Design(np.array(self.X).reshape(len(self.X), self.d), np.array(self.y))

    def record(self, x: np.ndarray, config: ConfiguredPipeline, value: float) -> None:
        self.X.append(np.asarray(x, dtype=float))
        self.y.append(float(value))
        self.configs.append(config)
        self.best_y = max(self.best_y, float(value))


class SurrogateDictionary:
    """Pipeline key -> stored design, best value and suspension state."""

    def __init__(self) -> None:
        self.entries: dict[str, SurrogateEntry] = {}

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def __getitem__(self, key: str) -> SurrogateEntry:
        return self.entries[key]

    def __len__(self) -> int:
        return len(self.entries)

    def total_evaluations(self) -> int:
        return sum(e.n_evaluations for e in self.entries.values())

    def best(self) -> tuple[str, SurrogateEntry] | None:
        scored = [(k, e) for k, e in self.entries.items() if e.n_evaluations]
        if not scored:
            return None
        # first-inserted wins ties, which keeps runs reproducible
        return max(scored, key=lambda kv: kv[1].best_y)

    def to_text(self) -> str:
        lines = ["pipeline_key\tn_evaluations\tbest_y\tsuspended"]
        for k in sorted(self.entries):
            e = self.entries[k]
            lines.append(f"{k}\t{e.n_evaluations}\t{e.best_y!r}\t{int(e.suspended)}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ProbeResult:
    reward: float
    n_evaluations: int
    exhausted: bool


def maybe_suspend(
    entry: SurrogateEntry,
    previous_best: float,
    improvement_epsilon: float,
    patience: float,
) -> SurrogateEntry:
    """Count probes that failed to improve best_y; suspend after ``patience`` of them."""
    if entry.best_y - previous_best < improvement_epsilon:
        entry.stale_probe_count += 1
    else:
        entry.stale_probe_count = 0
    if entry.stale_probe_count >= patience:
        entry.suspended = True
    return entry


def _evaluate_point(entry, grammar, evaluator, ledger, x) -> bool:
    if not ledger.charge(1):
        return False
    config = grammar.decode(entry.pipeline, x)
    entry.record(x, config, evaluator(config))
    return True


def mbo_probe(
    pipeline: UnconfiguredPipeline,
    grammar: PipelineGrammar,
    evaluator: Evaluator,
    dictionary: SurrogateDictionary,
    ledger: BudgetLedger,
    rng: np.random.Generator,
    config: MBOConfig | None = None,
) -> ProbeResult:
    config = config or MBOConfig()
    if ledger.exhausted:
        raise ContractViolation("mbo_probe called with an exhausted budget")
    key = grammar.pipeline_key(pipeline)
    d = grammar.dimension(pipeline)
    start_used = ledger.used

    fresh = key not in dictionary
    if fresh:
        entry = SurrogateEntry(pipeline, d)
        dictionary.entries[key] = entry
        for x in surrogate.initial_design(d, config.n_init(d), rng):
            if not _evaluate_point(entry, grammar, evaluator, ledger, x):
                return ProbeResult(entry.best_y, ledger.used - start_used, True)
    entry = dictionary[key]
    if entry.suspended or (d == 0 and not fresh):
        return ProbeResult(entry.best_y, 0, False)

    previous_best = entry.best_y
    model = None
    for _ in range(config.n_probe(d)):
        # kernel hyperparameters are searched once per probe, then reused
        if model is None:
            model = surrogate.fit(entry.design(), config.hyper_policy(), entry.hyper)
            if entry.n_evaluations >= config.hyper_policy().min_points_to_optimize:
                entry.hyper = (model.lengthscales, model.signal_var)
        else:
            model = surrogate.refit(model, entry.design())
        x = surrogate.propose_point(model, entry.best_y, rng, config.candidates_per_dim * d)
        if not _evaluate_point(entry, grammar, evaluator, ledger, x):
            return ProbeResult(entry.best_y, ledger.used - start_used, True)
    entry.n_probes += 1
    if not fresh:
        maybe_suspend(entry, previous_best, config.improvement_epsilon, config.patience)
    return ProbeResult(entry.best_y, ledger.used - start_used, False)
