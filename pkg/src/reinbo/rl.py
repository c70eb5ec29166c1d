"""Tabular Q-learning over pipeline compositions.

An episode walks the stages in order. The state is the string of actions
taken so far (``"s"``, ``"s4"``, ``"s42"``, ...), so transitions are
deterministic and every state carries its full history. The only reward
arrives after the last stage.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from reinbo.errors import ContractViolation, InputError
from reinbo.grammar import PipelineGrammar, UnconfiguredPipeline

STATE_PREFIX = "s"


@dataclass(frozen=True)
class QLearnerConfig:
    alpha: float = 0.5
    gamma: float = 1.0
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    # None lets the driver derive it from the budget (30% of expected episodes)
    epsilon_decay_episodes: int | None = None
    q_init: float = 0.5

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 1:
            raise ContractViolation(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0 <= self.gamma <= 1:
            raise ContractViolation(f"gamma must be in [0, 1], got {self.gamma}")
        if not 1 >= self.epsilon_start >= self.epsilon_end >= 0:
            raise ContractViolation("need 1 >= epsilon_start >= epsilon_end >= 0")
        if self.epsilon_decay_episodes is not None and self.epsilon_decay_episodes < 0:
            raise ContractViolation("epsilon_decay_episodes must be >= 0")


@dataclass(frozen=True)
class Transition:
    state: str
    action: int
    next_state: str
    # legal actions at next_state; empty for the terminal transition
    next_legal: tuple[int, ...] = ()


def _token(op_id: int) -> str:
    if op_id < 1:
        raise ContractViolation(f"op_id must be >= 1, got {op_id}")
    return str(op_id) if op_id < 10 else f"({op_id})"


def encode_state_tabular(prefix_actions: Sequence[int]) -> str:
    """``[4, 2, 2] -> "s422"``. Ids above 9 are parenthesised to stay injective."""
    return STATE_PREFIX + "".join(_token(int(a)) for a in prefix_actions)


_TOKEN_RE = re.compile(r"\((\d+)\)|(\d)")


def decode_state_tabular(state: str) -> list[int]:
    if not state.startswith(STATE_PREFIX):
        raise ContractViolation(f"state {state!r} lacks the {STATE_PREFIX!r} prefix")
    body = state[len(STATE_PREFIX):]
    out, pos = [], 0
    for m in _TOKEN_RE.finditer(body):
        if m.start() != pos:
            break
        out.append(int(m.group(1) or m.group(2)))
        pos = m.end()
    if pos != len(body):
        raise ContractViolation(f"malformed state string {state!r}")
    return out


def encode_state_onehot(grammar: PipelineGrammar, prefix_actions: Sequence[int]) -> np.ndarray:
    """Flat 0/1 vector with one block per stage and one bit per chosen operation."""
    sizes = [len(st.operations) for st in grammar.stages]
    if len(prefix_actions) > len(sizes):
        raise ContractViolation("prefix longer than the number of stages")
    bits = np.zeros(sum(sizes), dtype=np.int8)
    offset = 0
    for size, a in zip(sizes, prefix_actions):
        if not 1 <= a <= size:
            raise ContractViolation(f"op_id {a} out of range for a stage of {size} ops")
        bits[offset + a - 1] = 1
        offset += size
    return bits


def decode_state_onehot(grammar: PipelineGrammar, bits: Sequence[int]) -> list[int]:
    bits = np.asarray(bits)
    out, offset = [], 0
    for st in grammar.stages:
        block = bits[offset: offset + len(st.operations)]
        offset += len(st.operations)
        hot = np.flatnonzero(block)
        if len(hot) > 1:
            raise ContractViolation("more than one bit set in a stage block")
        if len(hot) == 0:
            break
        out.append(int(hot[0]) + 1)
    if bits[offset:].any():
        raise ContractViolation("bits set after the first empty stage block")
    return out


class QTable:
    """Action values keyed by (state string, op_id); unseen pairs read as ``q_init``."""

    def __init__(self, q_init: float = 0.0) -> None:
        self.q_init = float(q_init)
        self.entries: dict[tuple[str, int], float] = {}

    def get(self, state: str, action: int) -> float:
        return self.entries.get((state, action), self.q_init)

    def set(self, state: str, action: int, value: float) -> None:
        self.entries[(state, action)] = float(value)

    def values(self, state: str, actions: Iterable[int]) -> np.ndarray:
        return np.array([self.get(state, a) for a in actions], dtype=float)

    def max_value(self, state: str, actions: Sequence[int]) -> float:
        return float(self.values(state, actions).max()) if len(actions) else 0.0

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, QTable)
            and self.q_init == other.q_init
            and self.entries == other.entries
        )

    def copy(self) -> "QTable":
        q = QTable(self.q_init)
        q.entries = dict(self.entries)
        return q

    def to_text(self) -> str:
        lines = [f"# q_init\t{self.q_init!r}"]
        for (s, a), v in sorted(self.entries.items()):
            lines.append(f"{s}\t{a}\t{v!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "QTable":
        q = cls()
        for n, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            try:
                if parts[0] == "# q_init":
                    q.q_init = float(parts[1])
                else:
                    s, a, v = parts
                    q.entries[(s, int(a))] = float(v)
            except (ValueError, IndexError) as exc:
                raise InputError(f"bad Q-table line {n}: {line!r}") from exc
        return q


def select_action(
    qtable: QTable,
    state: str,
    legal: Sequence[int],
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    """Epsilon-greedy choice; greedy ties are broken uniformly at random."""
    if len(legal) == 0:
        raise ContractViolation("no legal actions")
    if epsilon > 0 and rng.random() < epsilon:
        return int(legal[rng.integers(len(legal))])
    q = qtable.values(state, legal)
    best = np.flatnonzero(q == q.max())
    pick = best[0] if len(best) == 1 else best[rng.integers(len(best))]
    return int(legal[pick])


def epsilon_at(config: QLearnerConfig, episode_index: int, decay_episodes: int | None = None) -> float:
    """Linear anneal from epsilon_start to epsilon_end, then flat."""
    if episode_index < 0:
        raise ContractViolation("episode_index must be >= 0")
    n = config.epsilon_decay_episodes if decay_episodes is None else decay_episodes
    if not n:
        return config.epsilon_end
    frac = min(episode_index / n, 1.0)
    return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start)


def rollout_episode(
    grammar: PipelineGrammar,
    qtable: QTable,
    epsilon: float,
    rng: np.random.Generator,
) -> tuple[UnconfiguredPipeline, list[Transition]]:
    actions: list[int] = []
    trace: list[Transition] = []
    state = encode_state_tabular(actions)
    for stage in range(1, grammar.K + 1):
        a = select_action(qtable, state, grammar.legal_actions(stage), epsilon, rng)
        actions.append(a)
        nxt = encode_state_tabular(actions)
        next_legal = tuple(grammar.legal_actions(stage + 1)) if stage < grammar.K else ()
        trace.append(Transition(state, a, nxt, next_legal))
        state = nxt
    return UnconfiguredPipeline(actions), trace


def greedy_pipeline(
    grammar: PipelineGrammar, qtable: QTable, rng: np.random.Generator
) -> UnconfiguredPipeline:
    return rollout_episode(grammar, qtable, 0.0, rng)[0]


def _check_trace(trace: Sequence[Transition]) -> None:
    if not trace:
        raise ContractViolation("empty trace")
    if trace[0].state != STATE_PREFIX:
        raise ContractViolation(f"trace must start at {STATE_PREFIX!r}")
    for prev, cur in zip(trace, trace[1:]):
        if prev.next_state != cur.state or not prev.next_legal:
            raise ContractViolation("trace transitions do not chain")
    if trace[-1].next_legal:
        raise ContractViolation("trace does not end in a terminal transition")


def update_from_episode(
    qtable: QTable,
    trace: Sequence[Transition],
    reward: float,
    config: QLearnerConfig,
) -> QTable:
    """One-step Q-learning backups, terminal transition first.

    Only the terminal transition receives ``reward``; earlier ones bootstrap
    from the (already updated) values of their successor state.
    """
    _check_trace(trace)
    if not math.isfinite(reward):
        raise ContractViolation(f"non-finite reward {reward}")
    last = len(trace) - 1
    for i in range(last, -1, -1):
        t = trace[i]
        r = reward if i == last else 0.0
        target = r + config.gamma * qtable.max_value(t.next_state, t.next_legal)
        q = qtable.get(t.state, t.action)
        qtable.set(t.state, t.action, q + config.alpha * (target - q))
    return qtable
