import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import TableEvaluator, flat_grammar
from reinbo.config import RunConfig, config_from_tree, load_config, normalise_method
from reinbo.driver import (
    default_decay_episodes,
    emit_ncv_reports,
    emit_reports,
    expected_fresh_probe_cost,
    random_search,
    reinbo_search,
    run,
    run_ncv_benchmark,
    run_random_search,
    run_reinbo,
)
from reinbo.errors import ConfigError, InputError
from reinbo.mbo import MBOConfig
from reinbo.mlcore.data import make_label_copy
from reinbo.mlcore.evaluate import evaluate_cv5
from reinbo.rl import QLearnerConfig
from reinbo.stub import StubEvaluator

SMALL = {"kind": "blobs", "n": 60, "p": 4, "separation": 1.5, "seed": 2}


def small_config(**kw):
    base = dict(synthetic=SMALL, budget=20, seed=3, outer_folds=3)
    base.update(kw)
    return RunConfig(**base)


# --- search loops on stub evaluators ------------------------------------------------

def test_reinbo_budget_and_log(toy):
    ev = StubEvaluator(toy, width=0.3, seed=1)
    res = reinbo_search(toy, ev, 60, seed=4)
    assert res.budget_used == ev.calls <= 60
    assert res.dictionary.total_evaluations() == res.budget_used
    assert res.best_accuracy == max(e.reward for e in res.episodes)
    assert len(res.episodes) == len(res.episodes[-1:]) + res.episodes[-1].episode
    assert [e.best_so_far for e in res.episodes] == list(np.maximum.accumulate([e.reward for e in res.episodes]))


def test_reinbo_reproducible(toy):
    a = reinbo_search(toy, StubEvaluator(toy, width=0.3, noise_sd=0.02, seed=2), 50, seed=9)
    b = reinbo_search(toy, StubEvaluator(toy, width=0.3, noise_sd=0.02, seed=2), 50, seed=9)
    assert a.episodes == b.episodes and a.qtable == b.qtable
    assert dict(a.best.values) == dict(b.best.values)


def test_budget_below_first_probe(toy):
    with pytest.raises(ConfigError):
        reinbo_search(toy, StubEvaluator(toy), 3)


def test_episode_accounting_hook(toy):
    seen = []

    def hook(ep, ledger, dictionary):
        seen.append((ledger.used, dictionary.total_evaluations()))

    reinbo_search(toy, StubEvaluator(toy, width=0.2), 80, seed=0, on_episode=hook)
    assert seen and all(a == b for a, b in seen)


def test_d0_grammar_terminates():
    g = flat_grammar((2, 2))
    ev = TableEvaluator(g, {(1, 1): 0.9}, default=0.4)
    res = reinbo_search(g, ev, 100, seed=0, max_episodes=200)
    assert ev.calls == 4 and len(res.episodes) == 200
    assert res.best_key == "S1_1/S2_1" and res.greedy_key == "S1_1/S2_1"


def test_random_search_exact_budget(toy):
    ev = StubEvaluator(toy, width=0.3, seed=5)
    res = random_search(toy, ev, 37, seed=1)
    assert ev.calls == 37 == len(res.episodes) == res.budget_used
    bests = [e.best_so_far for e in res.episodes]
    assert bests == sorted(bests) and res.best_accuracy == bests[-1]


def test_decay_episodes_from_budget(toy):
    cost = expected_fresh_probe_cost(toy, MBOConfig())
    assert 8 < cost < 16
    assert default_decay_episodes(toy, MBOConfig(), 300) == round(0.3 * 300 / cost)


def test_explicit_decay_used(toy):
    res = reinbo_search(toy, StubEvaluator(toy), 60, QLearnerConfig(epsilon_decay_episodes=2), seed=0)
    assert res.episodes[0].epsilon == 1.0 and res.episodes[2].epsilon == pytest.approx(0.05)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6), st.integers(4, 80))
def test_budget_conservation_property(seed, budget):
    g = flat_grammar((2, 3), n_params=1)
    ev = StubEvaluator(g, width=0.3, noise_sd=0.05, seed=seed)
    res = reinbo_search(g, ev, budget, seed=seed)
    assert res.budget_used == ev.calls == res.dictionary.total_evaluations() <= budget


# --- config -------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig()
    with pytest.raises(ConfigError):
        small_config(budget=0)
    with pytest.raises(ConfigError):
        small_config(method="tpe")
    assert normalise_method("random") == "random_search"


def test_config_from_yaml(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(
        "dataset: data.csv\nbudget: 40\nrl: {alpha: 0.3}\nmbo: {patience: inf}\nout: o\ngrammar: g.yaml\n"
    )
    cfg = load_config(path)
    assert cfg.dataset_path == str(tmp_path / "data.csv") and cfg.grammar_path == str(tmp_path / "g.yaml")
    assert cfg.rl.alpha == 0.3 and cfg.budget == 40 and cfg.out_dir == "o"
    with pytest.raises(ConfigError):
        config_from_tree({"dataset": "x.csv", "bogus": 1})
    with pytest.raises(ConfigError):
        config_from_tree({"dataset": "x.csv", "rl": {"alpha": 5}})
    with pytest.raises(InputError):
        load_config(tmp_path / "missing.yaml")


# --- config-driven runs on real data --------------------------------------------------

def test_run_determinism_and_reports(tmp_path):
    cfg = small_config()
    a, b = run_reinbo(cfg), run_reinbo(cfg)
    assert a.episodes == b.episodes and a.best_key == b.best_key
    out1 = [p.read_bytes() for p in emit_reports(a, tmp_path / "a")]
    out2 = [p.read_bytes() for p in emit_reports(b, tmp_path / "b")]
    again = [p.read_bytes() for p in emit_reports(a, tmp_path / "a")]
    assert out1 == out2 == again
    rows = list(csv.DictReader(io.StringIO((tmp_path / "a" / "episodes.csv").read_text())))
    assert len(rows) == len(a.episodes)
    freq = list(csv.DictReader(io.StringIO((tmp_path / "a" / "operator_frequency.csv").read_text())))
    for stage in ("1", "2", "3"):
        assert sum(float(r["relative_frequency"]) for r in freq if r["stage"] == stage) == pytest.approx(1, abs=1e-9)
    summary = (tmp_path / "a" / "summary.txt").read_text()
    assert a.best_key in summary and "best_mmce" in summary


def test_best_accuracy_reobtainable():
    cfg = small_config()
    res = run_reinbo(cfg)
    from reinbo.mlcore.data import make_synthetic

    data = make_synthetic(SMALL)
    assert evaluate_cv5(res.grammar, res.best, data, res.plan, cfg.seed) == res.best_accuracy


def test_random_search_run():
    res = run_random_search(small_config())
    assert res.budget_used == 20 == len(res.episodes)
    assert run(small_config(method="random")).episodes == res.episodes


def test_missing_dataset():
    with pytest.raises(InputError):
        run(RunConfig(dataset_path="/no/such.csv"))


def test_unwritable_report_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    res = random_search(flat_grammar((2,)), TableEvaluator(None, {}), 3)
    with pytest.raises(InputError):
        emit_reports(res, blocker / "sub")


# --- nested CV -----------------------------------------------------------------------

def test_ncv_partition_and_reports(tmp_path):
    cfg = small_config(budget=12)
    res = run_ncv_benchmark(cfg)
    for m, pred in res.predictions.items():
        assert np.all(pred >= 0)  # every observation scored exactly once
    tests = sorted(np.concatenate([te for _, te in res.outer_plan.splits()]).tolist())
    assert tests == list(range(60))
    assert set(res.aggregated_mmce) == {"reinbo", "random_search"}
    emit_ncv_reports(res, tmp_path / "n")
    assert (tmp_path / "n" / "fold1" / "reinbo" / "episodes.csv").exists()


def test_ncv_perfect_data_zero_error():
    data = make_label_copy(n=60, p=3, seed=2)
    cfg = RunConfig(synthetic={"kind": "label_copy"}, budget=12, outer_folds=3, ncv_methods=("random_search",))
    res = run_ncv_benchmark(cfg, data=data)
    assert res.aggregated_mmce["random_search"] <= 0.05
