import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import TableEvaluator, flat_grammar
from reinbo.errors import ContractViolation
from reinbo.grammar import UnconfiguredPipeline
from reinbo.mbo import (
    BudgetLedger,
    MBOConfig,
    SurrogateDictionary,
    SurrogateEntry,
    charge,
    maybe_suspend,
    mbo_probe,
)
from reinbo.stub import StubEvaluator


def const(v):
    def f(cfg):
        f.calls += 1
        return v

    f.calls = 0
    return f


# --- ledger ----------------------------------------------------------------------

def test_charge_examples():
    led = BudgetLedger(1000, used=999)
    assert charge(led, 1) and led.used == 1000
    assert not charge(led, 1) and led.exhausted


def test_charge_overrun_pins_at_limit():
    led = BudgetLedger(5, used=3)
    assert not led.charge(4)
    assert led.used == 5 and led.remaining == 0


@given(st.integers(0, 50), st.lists(st.integers(1, 5), max_size=40))
def test_ledger_never_exceeds_limit(limit, charges):
    led = BudgetLedger(limit)
    for c in charges:
        led.charge(c)
        assert 0 <= led.used <= limit


def test_ledger_rejects_bad_input():
    with pytest.raises(ContractViolation):
        BudgetLedger(-1)
    with pytest.raises(ContractViolation):
        BudgetLedger(3).charge(0)


# --- probe accounting ---------------------------------------------------------------

def test_first_and_repeat_probe_costs(toy, rng):
    pipe = UnconfiguredPipeline((1, 3, 2))  # perc, C, sigma
    assert toy.dimension(pipe) == 3
    ev = const(0.7)
    d, led = SurrogateDictionary(), BudgetLedger(100)
    r = mbo_probe(pipe, toy, ev, d, led, rng)
    assert r.n_evaluations == 6 + 6 and led.used == 12 and ev.calls == 12
    assert r.reward == 0.7 and d[toy.pipeline_key(pipe)].best_y == 0.7
    r2 = mbo_probe(pipe, toy, ev, d, led, rng)
    assert r2.n_evaluations == 6 and led.used == 18
    assert d.total_evaluations() == led.used


@pytest.mark.parametrize("d_params, n_init, n_probe", [(1, 4, 2), (2, 4, 4), (3, 6, 6), (5, 10, 10)])
def test_cost_rule(d_params, n_init, n_probe, rng):
    g = flat_grammar((2,), n_params=d_params)
    cfg = MBOConfig()
    assert (cfg.n_init(d_params), cfg.n_probe(d_params)) == (n_init, n_probe)
    led = BudgetLedger(500)
    mbo_probe(UnconfiguredPipeline((1,)), g, const(0.5), SurrogateDictionary(), led, rng)
    assert led.used == n_init + n_probe


def test_initial_design_not_regenerated(toy, rng):
    pipe = UnconfiguredPipeline((5, 5, 5))
    d, led = SurrogateDictionary(), BudgetLedger(100)
    mbo_probe(pipe, toy, const(0.4), d, led, rng)
    first = [x.copy() for x in d[toy.pipeline_key(pipe)].X[:4]]
    mbo_probe(pipe, toy, const(0.4), d, led, rng)
    assert all(np.array_equal(a, b) for a, b in zip(first, d[toy.pipeline_key(pipe)].X[:4]))
    assert d[toy.pipeline_key(pipe)].n_evaluations == 4 + 2 + 2


def test_d0_evaluated_once(rng):
    g = flat_grammar((2, 2))
    ev = TableEvaluator(g, {(1, 1): 0.6})
    d, led = SurrogateDictionary(), BudgetLedger(10)
    assert mbo_probe(UnconfiguredPipeline((1, 1)), g, ev, d, led, rng).n_evaluations == 1
    r = mbo_probe(UnconfiguredPipeline((1, 1)), g, ev, d, led, rng)
    assert r.n_evaluations == 0 and r.reward == 0.6 and ev.calls == 1


def test_exhaustion_mid_probe(toy, rng):
    d, led = SurrogateDictionary(), BudgetLedger(5)
    r = mbo_probe(UnconfiguredPipeline((1, 3, 2)), toy, const(0.3), d, led, rng)
    assert r.exhausted and led.used == 5 and d.total_evaluations() == 5
    with pytest.raises(ContractViolation):
        mbo_probe(UnconfiguredPipeline((1, 3, 2)), toy, const(0.3), d, led, rng)


def test_reward_is_all_time_best():
    g = flat_grammar((1,), n_params=1)
    seq = iter([0.9, 0.1, 0.1, 0.1, 0.2, 0.2, 0.2, 0.2])
    d, led = SurrogateDictionary(), BudgetLedger(50)
    rng = np.random.default_rng(0)
    mbo_probe(UnconfiguredPipeline((1,)), g, lambda c: next(seq), d, led, rng)
    r = mbo_probe(UnconfiguredPipeline((1,)), g, lambda c: next(seq), d, led, rng)
    assert r.reward == 0.9


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.integers(20, 120))
def test_budget_conservation_random_probes(seed, budget):
    g = flat_grammar((2, 2), n_params=1)
    ev = StubEvaluator(g, width=0.3, noise_sd=0.01, seed=seed)
    rng = np.random.default_rng(seed)
    d, led = SurrogateDictionary(), BudgetLedger(budget)
    bests = {}
    while not led.exhausted:
        pipe = UnconfiguredPipeline((int(rng.integers(1, 3)), int(rng.integers(1, 3))))
        mbo_probe(pipe, g, ev, d, led, rng)
        assert d.total_evaluations() == led.used == ev.calls
        for k, e in d.entries.items():
            assert e.best_y >= bests.get(k, -math.inf)
            bests[k] = e.best_y


# --- suspension ------------------------------------------------------------------------

def entry_with(best):
    e = SurrogateEntry(UnconfiguredPipeline((1,)), 1)
    e.best_y = best
    return e


def test_suspend_after_patience():
    e = entry_with(0.5)
    for i in range(3):
        maybe_suspend(e, 0.5, 1e-3, 3)
    assert e.suspended and e.stale_probe_count == 3


def test_improvement_resets_count():
    e = entry_with(0.55)
    e.stale_probe_count = 2
    maybe_suspend(e, 0.5, 1e-3, 3)
    assert e.stale_probe_count == 0 and not e.suspended


def test_infinite_patience_never_suspends():
    e = entry_with(0.5)
    for _ in range(1000):
        maybe_suspend(e, 0.5, 1e-3, math.inf)
    assert not e.suspended


def test_suspended_entry_costs_nothing(rng):
    g = flat_grammar((1,), n_params=1)
    cfg = MBOConfig(patience=1)
    d, led = SurrogateDictionary(), BudgetLedger(100)
    ev = const(0.5)
    p = UnconfiguredPipeline((1,))
    mbo_probe(p, g, ev, d, led, rng, cfg)
    mbo_probe(p, g, ev, d, led, rng, cfg)  # no improvement -> suspended
    used = led.used
    r = mbo_probe(p, g, ev, d, led, rng, cfg)
    assert d["S1_1"].suspended and r.n_evaluations == 0 and led.used == used


def test_config_validation():
    with pytest.raises(ContractViolation):
        MBOConfig(patience=0)
    with pytest.raises(ContractViolation):
        MBOConfig(probe_multiplier=0)


def test_dictionary_best_and_dump(rng):
    g = flat_grammar((3,))
    ev = TableEvaluator(g, {(1,): 0.2, (2,): 0.8, (3,): 0.8})
    d, led = SurrogateDictionary(), BudgetLedger(10)
    for a in (1, 2, 3):
        mbo_probe(UnconfiguredPipeline((a,)), g, ev, d, led, rng)
    key, entry = d.best()
    assert key == "S1_2" and entry.best_y == 0.8
    text = d.to_text()
    assert text.splitlines()[0].startswith("pipeline_key") and len(text.splitlines()) == 4
