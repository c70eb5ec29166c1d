"""Search loops, the nested-CV benchmark, and report writing."""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from reinbo import rl
from reinbo.config import RunConfig
from reinbo.errors import ConfigError, InputError
from reinbo.grammar import (
    ConfiguredPipeline,
    PipelineGrammar,
    ancestral_sample,
    default_grammar,
    load_grammar,
    min_first_probe_cost,
)
from reinbo.mbo import BudgetLedger, Evaluator, MBOConfig, SurrogateDictionary, mbo_probe
from reinbo.mlcore.data import Dataset, load_csv, make_synthetic
from reinbo.mlcore.evaluate import CVEvaluator, fit_pipeline, mmce
from reinbo.mlcore.resampling import ResamplingPlan, make_stratified_folds

log = logging.getLogger(__name__)

EPSILON_DECAY_FRACTION = 0.3


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    pipeline_key: str
    reward: float
    epsilon: float
    budget_used: int
    best_so_far: float


@dataclass
class RunResult:
    method: str
    best: ConfiguredPipeline
    best_key: str
    best_accuracy: float
    episodes: list[EpisodeRecord]
    frequencies: list[dict[str, int]]  # per stage: op name -> count
    budget_used: int
    budget_limit: int
    greedy_key: str | None = None
    qtable: rl.QTable | None = None
    dictionary: SurrogateDictionary | None = None
    grammar: PipelineGrammar | None = None
    plan: ResamplingPlan | None = None
    seed: int | None = None

    @property
    def best_mmce(self) -> float:
        return 1.0 - self.best_accuracy


# --- ReinBo --------------------------------------------------------------

def expected_fresh_probe_cost(grammar: PipelineGrammar, mbo: MBOConfig) -> float:
    """Mean cost of a first probe when every pipeline is equally likely."""
    dist = Counter({0: 1})
    for st in grammar.stages:
        nxt: Counter = Counter()
        for d, w in dist.items():
            for op in st.operations:
                nxt[d + len(op.params)] += w
        dist = nxt
    total = sum(dist.values())
    return sum(w * (mbo.n_init(d) + mbo.n_probe(d)) for d, w in dist.items()) / total


def default_decay_episodes(grammar: PipelineGrammar, mbo: MBOConfig, budget: int) -> int:
    est_episodes = budget / expected_fresh_probe_cost(grammar, mbo)
    return max(1, int(round(EPSILON_DECAY_FRACTION * est_episodes)))


def _frequencies(grammar: PipelineGrammar, pipelines) -> list[dict[str, int]]:
    out = []
    for i, st in enumerate(grammar.stages):
        c = Counter(p.action_ids[i] for p in pipelines)
        out.append({op.name: c.get(op.op_id, 0) for op in st.operations})
    return out


def reinbo_search(
    grammar: PipelineGrammar,
    evaluator: Evaluator,
    budget: int,
    rl_config: rl.QLearnerConfig | None = None,
    mbo_config: MBOConfig | None = None,
    seed: int = 0,
    max_episodes: int | None = None,
    on_episode: Callable[[int, BudgetLedger, SurrogateDictionary], None] | None = None,
) -> RunResult:
    """Roll out, probe, update; repeat until the budget is spent."""
    rl_config = rl_config or rl.QLearnerConfig()
    mbo_config = mbo_config or MBOConfig()
    need = min_first_probe_cost(grammar, mbo_config.n_init)
    if budget < need:
        raise ConfigError(f"budget {budget} is below the cheapest first probe ({need} evaluations)")
    decay = rl_config.epsilon_decay_episodes
    if decay is None:
        decay = default_decay_episodes(grammar, mbo_config, budget)
    max_episodes = max_episodes or 10 * budget
    agent_rng, mbo_rng, greedy_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)
    )

    qtable = rl.QTable(rl_config.q_init)
    dictionary = SurrogateDictionary()
    ledger = BudgetLedger(budget)
    episodes: list[EpisodeRecord] = []
    rolled = []
    best_so_far = -math.inf
    episode = 0
    while not ledger.exhausted and episode < max_episodes:
        eps = rl.epsilon_at(rl_config, episode, decay)
        pipeline, trace = rl.rollout_episode(grammar, qtable, eps, agent_rng)
        probe = mbo_probe(pipeline, grammar, evaluator, dictionary, ledger, mbo_rng, mbo_config)
        rl.update_from_episode(qtable, trace, probe.reward, rl_config)
        best_so_far = max(best_so_far, probe.reward)
        key = grammar.pipeline_key(pipeline)
        episodes.append(EpisodeRecord(episode, key, probe.reward, eps, ledger.used, best_so_far))
        rolled.append(pipeline)
        log.debug("episode %d %s reward=%.4f eps=%.3f used=%d", episode, key, probe.reward, eps, ledger.used)
        if on_episode is not None:
            on_episode(episode, ledger, dictionary)
        episode += 1

    best_key, entry = dictionary.best()
    greedy = rl.greedy_pipeline(grammar, qtable, greedy_rng)
    return RunResult(
        method="reinbo",
        best=entry.best_config,
        best_key=best_key,
        best_accuracy=entry.best_y,
        episodes=episodes,
        frequencies=_frequencies(grammar, rolled),
        budget_used=ledger.used,
        budget_limit=budget,
        greedy_key=grammar.pipeline_key(greedy),
        qtable=qtable,
        dictionary=dictionary,
        grammar=grammar,
        seed=seed,
    )


# --- random search -------------------------------------------------------

def random_search(
    grammar: PipelineGrammar,
    evaluator: Evaluator,
    budget: int,
    seed: int = 0,
) -> RunResult:
    """Conditional ancestral sampling, one evaluation per budget unit."""
    if budget < 1:
        raise ConfigError("budget must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    ledger = BudgetLedger(budget)
    episodes = []
    sampled = []
    best: tuple[float, ConfiguredPipeline] | None = None
    while ledger.charge(1):
        cfg = ancestral_sample(grammar, rng)
        acc = float(evaluator(cfg))
        if best is None or acc > best[0]:
            best = (acc, cfg)
        sampled.append(cfg.pipeline)
        key = grammar.pipeline_key(cfg.pipeline)
        episodes.append(EpisodeRecord(len(episodes), key, acc, 1.0, ledger.used, best[0]))
    return RunResult(
        method="random_search",
        best=best[1],
        best_key=grammar.pipeline_key(best[1].pipeline),
        best_accuracy=best[0],
        episodes=episodes,
        frequencies=_frequencies(grammar, sampled),
        budget_used=ledger.used,
        budget_limit=budget,
        grammar=grammar,
        seed=seed,
    )


# --- config-driven entry points -----------------------------------------

def load_dataset(config: RunConfig) -> Dataset:
    if config.dataset_path is not None:
        return load_csv(config.dataset_path)
    return make_synthetic(config.synthetic)


def load_run_grammar(config: RunConfig, data: Dataset) -> PipelineGrammar:
    if config.grammar_path is None:
        return default_grammar(data.p)
    return load_grammar(config.grammar_path, data.p)


def search(
    config: RunConfig,
    data: Dataset,
    grammar: PipelineGrammar,
    method: str | None = None,
    seed: int | None = None,
) -> RunResult:
    method = method or config.method
    seed = config.seed if seed is None else seed
    plan = make_stratified_folds(data.y, config.folds, seed)
    evaluator = CVEvaluator(grammar, data, plan, seed)
    if method == "reinbo":
        result = reinbo_search(
            grammar, evaluator, config.budget, config.rl, config.mbo, seed, config.max_episodes
        )
    else:
        result = random_search(grammar, evaluator, config.budget, seed)
    result.plan = plan
    return result


def run_reinbo(config: RunConfig) -> RunResult:
    data = load_dataset(config)
    return search(config, data, load_run_grammar(config, data), "reinbo")


def run_random_search(config: RunConfig) -> RunResult:
    data = load_dataset(config)
    return search(config, data, load_run_grammar(config, data), "random_search")


def run(config: RunConfig) -> RunResult:
    data = load_dataset(config)
    return search(config, data, load_run_grammar(config, data))


# --- nested cross-validation --------------------------------------------

@dataclass(frozen=True)
class OuterFoldRecord:
    method: str
    fold: int
    n_test: int
    errors: int
    best_key: str
    inner_accuracy: float
    outer_mmce: float


@dataclass
class NCVResult:
    aggregated_mmce: dict[str, float]
    folds: list[OuterFoldRecord]
    predictions: dict[str, np.ndarray]
    outer_plan: ResamplingPlan
    runs: dict[tuple[str, int], RunResult] = field(default_factory=dict)


def run_ncv_benchmark(
    config: RunConfig,
    outer_k: int | None = None,
    methods: tuple[str, ...] | None = None,
    data: Dataset | None = None,
) -> NCVResult:
    """Outer CV splits D into D_opt / D_test; each method searches D_opt only."""
    data = data if data is not None else load_dataset(config)
    outer_k = outer_k or config.outer_folds
    methods = methods or config.ncv_methods
    grammar = load_run_grammar(config, data)
    outer = make_stratified_folds(data.y, outer_k, config.seed)
    preds = {m: np.full(data.n_obs, -1, dtype=int) for m in methods}
    folds: list[OuterFoldRecord] = []
    runs: dict[tuple[str, int], RunResult] = {}
    for fold, (tr, te) in enumerate(outer.splits(), start=1):
        d_opt = data.subset(tr)
        for method in methods:
            inner_seed = config.seed * 1000 + fold
            result = search(config, d_opt, grammar, method, inner_seed)
            fitted = fit_pipeline(grammar, result.best, d_opt, np.random.default_rng([inner_seed, 0]))
            yhat = fitted.predict(data.X[te])
            preds[method][te] = yhat
            err = int(np.sum(yhat != data.y[te]))
            folds.append(
                OuterFoldRecord(method, fold, te.size, err, result.best_key, result.best_accuracy, err / te.size)
            )
            runs[(method, fold)] = result
            log.info("ncv fold %d %s: %s outer mmce %.4f", fold, method, result.best_key, err / te.size)
    agg = {m: mmce(data.y, preds[m]) for m in methods}
    return NCVResult(agg, folds, preds, outer, runs)


# --- reports -------------------------------------------------------------

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def _prepare(out_dir: str | Path) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc}") from exc
    return out


def episodes_csv(result: RunResult) -> str:
    rows = [
        (e.episode, e.pipeline_key, repr(e.reward), repr(e.epsilon), e.budget_used, repr(e.best_so_far))
        for e in result.episodes
    ]
    return _csv_text(("episode", "pipeline_key", "reward", "epsilon", "budget_used", "best_so_far"), rows)


def frequency_csv(result: RunResult) -> str:
    rows = []
    for stage, counts in enumerate(result.frequencies, start=1):
        total = sum(counts.values())
        for name, c in counts.items():
            rows.append((stage, name, c, repr(c / total if total else 0.0)))
    return _csv_text(("stage", "operation", "count", "relative_frequency"), rows)


def summary_text(result: RunResult) -> str:
    lines = [
        f"method: {result.method}",
        f"seed: {result.seed}",
        f"best_pipeline: {result.best_key}",
        f"best_accuracy: {result.best_accuracy!r}",
        f"best_mmce: {result.best_mmce!r}",
        f"budget_used: {result.budget_used} / {result.budget_limit}",
        f"episodes: {len(result.episodes)}",
    ]
    if result.greedy_key is not None:
        lines.append(f"greedy_pipeline: {result.greedy_key}")
    lines.append("hyperparameters:")
    grammar = result.grammar
    for (stage, op_id, name), v in sorted(result.best.values.items()):
        op = grammar.operation(stage, op_id).name if grammar else f"{stage}.{op_id}"
        lines.append(f"  {op}.{name}: {v!r}")
    return "\n".join(lines) + "\n"


def emit_reports(result: RunResult, out_dir: str | Path) -> list[Path]:
    """Episode log, per-stage operator frequencies and a summary; byte-stable."""
    out = _prepare(out_dir)
    written = [
        _write(out / "episodes.csv", episodes_csv(result)),
        _write(out / "operator_frequency.csv", frequency_csv(result)),
        _write(out / "summary.txt", summary_text(result)),
    ]
    if result.plan is not None:
        rows = [(i, int(f)) for i, f in enumerate(result.plan.folds)]
        written.append(_write(out / "folds.csv", _csv_text(("observation", "fold"), rows)))
    if result.qtable is not None:
        written.append(_write(out / "qtable.tsv", result.qtable.to_text()))
    if result.dictionary is not None:
        written.append(_write(out / "surrogates.tsv", result.dictionary.to_text()))
    return written


def emit_ncv_reports(result: NCVResult, out_dir: str | Path) -> list[Path]:
    out = _prepare(out_dir)
    rows = [
        (f.method, f.fold, f.n_test, f.errors, f.best_key, repr(f.inner_accuracy), repr(f.outer_mmce))
        for f in result.folds
    ]
    written = [
        _write(
            out / "ncv_folds.csv",
            _csv_text(("method", "fold", "n_test", "errors", "best_pipeline", "inner_accuracy", "outer_mmce"), rows),
        ),
        _write(
            out / "ncv_summary.csv",
            _csv_text(("method", "aggregated_mmce"), [(m, repr(v)) for m, v in result.aggregated_mmce.items()]),
        ),
        _write(
            out / "ncv_predictions.csv",
            _csv_text(
                ("observation", "outer_fold", *result.predictions),
                [
                    (i, int(result.outer_plan.folds[i]), *(int(p[i]) for p in result.predictions.values()))
                    for i in range(result.outer_plan.n_obs)
                ],
            ),
        ),
    ]
    for (method, fold), run in result.runs.items():
        written.extend(emit_reports(run, out / f"fold{fold}" / method))
    return written
