"""Staged pipeline search space with conditional hyperparameter spaces.

A grammar is a fixed linear sequence of stages. Each stage offers a set of
operations and each operation owns its own (possibly empty) list of numeric
hyperparameters. Choosing one operation per stage gives an unconfigured
pipeline; its active hyperparameters are the concatenation of the chosen
operations' parameter lists.
"""

from __future__ import annotations

import ast
import itertools
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

from reinbo.errors import ContractViolation, InputError

NUMERIC = "numeric"
INTEGER = "integer"
LINEAR = "linear"
LOG2 = "log2"

PREPROCESSOR = "preprocessor"
FEATURE_ENGINEERING = "feature_engineering"
LEARNER = "learner"
NOOP = "noop"

_OP_KINDS = (PREPROCESSOR, FEATURE_ENGINEERING, LEARNER, NOOP)

ParamKey = tuple[int, int, str]


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str = NUMERIC
    lower: float = 0.0
    upper: float = 1.0
    scale: str = LINEAR
    round_to_integer: bool = False

    def __post_init__(self) -> None:
        if self.kind not in (NUMERIC, INTEGER):
            raise ContractViolation(f"param {self.name!r}: unknown kind {self.kind!r}")
        if self.scale not in (LINEAR, LOG2):
            raise ContractViolation(f"param {self.name!r}: unknown scale {self.scale!r}")
        if not self.lower < self.upper:
            raise ContractViolation(
                f"param {self.name!r}: need lower < upper, got ({self.lower}, {self.upper})"
            )
        if self.scale == LOG2 and self.lower <= 0:
            raise ContractViolation(f"param {self.name!r}: log2 scale needs lower > 0")
        if self.kind == INTEGER and not self.round_to_integer:
            object.__setattr__(self, "round_to_integer", True)

    def _scaled_bounds(self) -> tuple[float, float]:
        if self.scale == LOG2:
            return math.log2(self.lower), math.log2(self.upper)
        return self.lower, self.upper

    def from_unit(self, u: float) -> float:
        """Map a coordinate in [0, 1] to a parameter value (rounded if integer)."""
        lo, hi = self._scaled_bounds()
        t = lo + float(np.clip(u, 0.0, 1.0)) * (hi - lo)
        value = 2.0**t if self.scale == LOG2 else t
        if self.round_to_integer:
            value = float(math.floor(value + 0.5))
            value = min(max(value, math.ceil(self.lower)), math.floor(self.upper))
        return min(max(value, self.lower), self.upper)

    def to_unit(self, value: float) -> float:
        lo, hi = self._scaled_bounds()
        t = math.log2(value) if self.scale == LOG2 else value
        return float(np.clip((t - lo) / (hi - lo), 0.0, 1.0))

    def contains(self, value: float) -> bool:
        if not (self.lower <= value <= self.upper):
            return False
        return not self.round_to_integer or float(value).is_integer()


@dataclass(frozen=True)
class OperationSpec:
    op_id: int
    name: str
    kind: str
    params: tuple[ParamSpec, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in _OP_KINDS:
            raise ContractViolation(f"operation {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == NOOP and self.params:
            raise ContractViolation(f"noop operation {self.name!r} cannot have params")
        object.__setattr__(self, "params", tuple(self.params))
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ContractViolation(f"operation {self.name!r}: duplicate param names")


@dataclass(frozen=True)
class StageSpec:
    stage_index: int
    operations: tuple[OperationSpec, ...]
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "operations", tuple(self.operations))
        if not self.operations:
            raise ContractViolation(f"stage {self.stage_index} has no operations")
        ids = [op.op_id for op in self.operations]
        if ids != list(range(1, len(ids) + 1)):
            raise ContractViolation(
                f"stage {self.stage_index}: op_ids must be 1..n in order, got {ids}"
            )


@dataclass(frozen=True)
class UnconfiguredPipeline:
    action_ids: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "action_ids", tuple(int(a) for a in self.action_ids))


@dataclass(frozen=True)
class ConfiguredPipeline:
    """An unconfigured pipeline plus values for all of its active params."""

    pipeline: UnconfiguredPipeline
    values: Mapping[ParamKey, float] = field(default_factory=dict)

    def op_params(self, stage_index: int) -> dict[str, float]:
        op_id = self.pipeline.action_ids[stage_index - 1]
        return {
            name: v for (s, o, name), v in self.values.items() if s == stage_index and o == op_id
        }


@dataclass(frozen=True)
class PipelineGrammar:
    stages: tuple[StageSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise ContractViolation("grammar needs at least one stage")
        for i, st in enumerate(self.stages, start=1):
            if st.stage_index != i:
                raise ContractViolation(f"stage indices must be 1..K, got {st.stage_index} at {i}")
        learner_stages = [
            st.stage_index
            for st in self.stages
            if any(op.kind == LEARNER for op in st.operations)
        ]
        if learner_stages != [self.K]:
            raise ContractViolation(
                f"exactly the last stage must hold learners, found learners in {learner_stages}"
            )
        # noop ops may share a display name ("NA") across stages; they are identical
        seen: dict[str, int] = {}
        for st in self.stages:
            for op in st.operations:
                if op.kind == NOOP:
                    continue
                if op.name in seen:
                    raise ContractViolation(
                        f"operation name {op.name!r} appears in stages {seen[op.name]} "
                        f"and {st.stage_index}"
                    )
                seen[op.name] = st.stage_index

    @property
    def K(self) -> int:
        return len(self.stages)

    def stage(self, stage_index: int) -> StageSpec:
        if not 1 <= stage_index <= self.K:
            raise ContractViolation(f"stage {stage_index} out of range 1..{self.K}")
        return self.stages[stage_index - 1]

    def legal_actions(self, stage_index: int) -> list[int]:
        return [op.op_id for op in self.stage(stage_index).operations]

    def operation(self, stage_index: int, op_id: int) -> OperationSpec:
        ops = self.stage(stage_index).operations
        if not 1 <= op_id <= len(ops):
            raise ContractViolation(f"op_id {op_id} invalid for stage {stage_index}")
        return ops[op_id - 1]

    def validate(self, pipeline: UnconfiguredPipeline) -> None:
        if len(pipeline.action_ids) != self.K:
            raise ContractViolation(
                f"pipeline has {len(pipeline.action_ids)} actions, grammar has {self.K} stages"
            )
        for i, a in enumerate(pipeline.action_ids, start=1):
            self.operation(i, a)

    def operations_of(self, pipeline: UnconfiguredPipeline) -> list[OperationSpec]:
        self.validate(pipeline)
        return [self.operation(i, a) for i, a in enumerate(pipeline.action_ids, start=1)]

    def active_params(self, pipeline: UnconfiguredPipeline) -> list[tuple[ParamKey, ParamSpec]]:
        out = []
        for i, op in enumerate(self.operations_of(pipeline), start=1):
            out.extend(((i, op.op_id, p.name), p) for p in op.params)
        return out

    def conditional_space(self, pipeline: UnconfiguredPipeline) -> list[ParamSpec]:
        return [spec for _, spec in self.active_params(pipeline)]

    def dimension(self, pipeline: UnconfiguredPipeline) -> int:
        return len(self.conditional_space(pipeline))

    def pipeline_key(self, pipeline: UnconfiguredPipeline) -> str:
        return "/".join(op.name for op in self.operations_of(pipeline))

    def pipelines(self) -> Iterator[UnconfiguredPipeline]:
        """Enumerate every unconfigured pipeline in lexicographic op_id order."""
        for ids in itertools.product(*(self.legal_actions(s.stage_index) for s in self.stages)):
            yield UnconfiguredPipeline(ids)

    @property
    def n_pipelines(self) -> int:
        return math.prod(len(s.operations) for s in self.stages)

    def decode(self, pipeline: UnconfiguredPipeline, u: Sequence[float]) -> ConfiguredPipeline:
        """Turn a point of the unit hypercube into a configured pipeline."""
        active = self.active_params(pipeline)
        if len(u) != len(active):
            raise ContractViolation(f"expected {len(active)} coordinates, got {len(u)}")
        values = {key: spec.from_unit(x) for (key, spec), x in zip(active, u)}
        return ConfiguredPipeline(pipeline, values)

    def encode(self, configured: ConfiguredPipeline) -> np.ndarray:
        active = self.active_params(configured.pipeline)
        return np.array([spec.to_unit(configured.values[key]) for key, spec in active])

    def check_assignment(self, configured: ConfiguredPipeline) -> None:
        active = dict(self.active_params(configured.pipeline))
        if set(active) != set(configured.values):
            raise ContractViolation(
                f"assignment keys {sorted(configured.values)} != active params {sorted(active)}"
            )
        for key, v in configured.values.items():
            if not active[key].contains(v):
                raise ContractViolation(f"value {v} for {key} outside {active[key]}")

    def describe(self) -> str:
        lines = []
        for st in self.stages:
            lines.append(f"stage {st.stage_index}: {st.name}".rstrip(": "))
            for op in st.operations:
                lines.append(f"  {op.op_id}. {op.name} [{op.kind}]")
                for p in op.params:
                    scale = ", log2" if p.scale == LOG2 else ""
                    lines.append(f"       {p.name}: {p.kind} ({p.lower:g}, {p.upper:g}){scale}")
        return "\n".join(lines)


def legal_actions(grammar: PipelineGrammar, stage_index: int) -> list[int]:
    return grammar.legal_actions(stage_index)


def conditional_space(grammar: PipelineGrammar, pipeline: UnconfiguredPipeline) -> list[ParamSpec]:
    return grammar.conditional_space(pipeline)


def pipeline_key(grammar: PipelineGrammar, pipeline: UnconfiguredPipeline) -> str:
    return grammar.pipeline_key(pipeline)


def ancestral_sample(grammar: PipelineGrammar, rng: np.random.Generator) -> ConfiguredPipeline:
    """Sample the structure uniformly, then the hyperparameters it activates."""
    ids = [int(rng.integers(1, len(st.operations) + 1)) for st in grammar.stages]
    pipeline = UnconfiguredPipeline(ids)
    d = grammar.dimension(pipeline)
    return grammar.decode(pipeline, rng.random(d))


# --- loading -------------------------------------------------------------

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


def eval_bound(expr: Any, p: int | None) -> float:
    """Evaluate a range bound such as ``0.1``, ``"p/10"`` or ``"2**-15"``."""
    if isinstance(expr, (int, float)) and not isinstance(expr, bool):
        return float(expr)
    if not isinstance(expr, str):
        raise InputError(f"bad range bound {expr!r}")

    def ev(node: ast.AST) -> float:
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "p":
            if p is None:
                raise InputError(f"bound {expr!r} needs the feature count p")
            return float(p)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -ev(node.operand)
        raise InputError(f"unsupported expression in range bound {expr!r}")

    try:
        tree = ast.parse(expr.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise InputError(f"cannot parse range bound {expr!r}") from exc
    return ev(tree)


def _param_from_tree(node: Mapping[str, Any], p: int | None) -> ParamSpec:
    kind = node.get("type", node.get("kind", NUMERIC))
    lo, hi = node["range"] if "range" in node else (node["lower"], node["upper"])
    lower, upper = eval_bound(lo, p), eval_bound(hi, p)
    if kind == INTEGER:
        lower, upper = float(math.ceil(lower)), float(math.floor(upper))
    try:
        return ParamSpec(
            name=str(node["name"]),
            kind=kind,
            lower=lower,
            upper=upper,
            scale=node.get("scale", LINEAR),
        )
    except ContractViolation as exc:
        raise InputError(f"{exc} (feature count p={p})") from exc


def grammar_from_tree(tree: Mapping[str, Any], n_features: int | None = None) -> PipelineGrammar:
    """Build a grammar from a nested mapping (parsed YAML/JSON).

    Expected layout::

        stages:
          - name: DataPreprocess
            operations:
              - {name: Scale(default), kind: preprocessor}
              - {name: NA, kind: noop}
          - ...
        # optional, lets several operations share one parameter list
        params:
          ksvm:
            - {name: C, type: numeric, range: [2^-15, 2^15], scale: log2}
    """
    shared = tree.get("params", {}) or {}
    stages = []
    try:
        for si, st in enumerate(tree["stages"], start=1):
            ops = []
            for oi, op in enumerate(st["operations"], start=1):
                raw = op.get("params", shared.get(op["name"], []))
                params = tuple(_param_from_tree(pn, n_features) for pn in raw)
                ops.append(OperationSpec(oi, str(op["name"]), op.get("kind", NOOP), params))
            stages.append(StageSpec(si, tuple(ops), str(st.get("name", ""))))
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed grammar document: {exc!r}") from exc
    try:
        return PipelineGrammar(tuple(stages))
    except ContractViolation as exc:
        raise InputError(str(exc)) from exc


def load_grammar(path: str | Path, n_features: int | None = None) -> PipelineGrammar:
    import yaml

    try:
        tree = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise InputError(f"cannot read grammar file {path}: {exc}") from exc
    return grammar_from_tree(tree, n_features)


_FILTER_PERC = [{"name": "perc", "type": NUMERIC, "range": [0.1, 1]}]

DEFAULT_GRAMMAR_TREE: dict[str, Any] = {
    "stages": [
        {
            "name": "DataPreprocess",
            "operations": [
                {"name": "Scale(default)", "kind": PREPROCESSOR},
                {"name": "Scale(center=FALSE)", "kind": PREPROCESSOR},
                {"name": "Scale(scale=FALSE)", "kind": PREPROCESSOR},
                {"name": "SpatialSign", "kind": PREPROCESSOR},
                {"name": "NA", "kind": NOOP},
            ],
        },
        {
            "name": "FeatureEngineering",
            "operations": [
                {"name": "Pca", "kind": FEATURE_ENGINEERING},
                {"name": "FilterKruskal", "kind": FEATURE_ENGINEERING},
                {"name": "FilterAnova", "kind": FEATURE_ENGINEERING},
                {"name": "FilterUnivariate", "kind": FEATURE_ENGINEERING},
                {"name": "NA", "kind": NOOP},
            ],
        },
        {
            "name": "Classifier",
            "operations": [
                {"name": "kknn", "kind": LEARNER},
                {"name": "ksvm", "kind": LEARNER},
                {"name": "ranger", "kind": LEARNER},
                {"name": "xgboost", "kind": LEARNER},
                {"name": "naiveBayes", "kind": LEARNER},
            ],
        },
    ],
    "params": {
        "FilterAnova": _FILTER_PERC,
        "FilterKruskal": _FILTER_PERC,
        "FilterUnivariate": _FILTER_PERC,
        "Pca": [{"name": "rank", "type": INTEGER, "range": ["p/10", "p"]}],
        "kknn": [{"name": "k", "type": INTEGER, "range": [1, 20]}],
        "ksvm": [
            {"name": "C", "type": NUMERIC, "range": ["2^-15", "2^15"], "scale": LOG2},
            {"name": "sigma", "type": NUMERIC, "range": ["2^-15", "2^15"], "scale": LOG2},
        ],
        "ranger": [
            {"name": "mtry", "type": INTEGER, "range": ["p/10", "p/1.5"]},
            {"name": "sample.fraction", "type": NUMERIC, "range": [0.1, 1]},
        ],
        "xgboost": [
            {"name": "eta", "type": NUMERIC, "range": [0.001, 0.3]},
            {"name": "max_depth", "type": INTEGER, "range": [1, 15]},
            {"name": "subsample", "type": NUMERIC, "range": [0.5, 1]},
            {"name": "colsample_bytree", "type": NUMERIC, "range": [0.5, 1]},
            {"name": "min_child_weight", "type": NUMERIC, "range": [0, 50]},
        ],
        "naiveBayes": [{"name": "laplace", "type": NUMERIC, "range": [0.01, 100]}],
    },
}


def default_grammar(n_features: int = 10) -> PipelineGrammar:
    """The built-in three-stage pipeline pool, resolved for ``n_features`` columns."""
    if n_features < 3:
        raise InputError(f"the built-in grammar needs at least 3 features, got {n_features}")
    return grammar_from_tree(DEFAULT_GRAMMAR_TREE, n_features)


def min_first_probe_cost(grammar: PipelineGrammar, n_init_for) -> int:
    """Cheapest first probe over all pipelines: n_init(d), or 1 for d = 0."""
    d_min = sum(min(len(op.params) for op in st.operations) for st in grammar.stages)
    return 1 if d_min == 0 else int(n_init_for(d_min))
