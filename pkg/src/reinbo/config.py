"""Run configuration: dataclasses plus YAML/JSON loading."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from reinbo.errors import ConfigError, ContractViolation, InputError
from reinbo.mbo import MBOConfig
from reinbo.rl import QLearnerConfig

METHODS = ("reinbo", "random_search")
_METHOD_ALIASES = {"random": "random_search", "rs": "random_search"}


@dataclass(frozen=True)
class RunConfig:
    # exactly one of dataset_path / synthetic should be set
    dataset_path: str | None = None
    synthetic: dict[str, Any] | None = None
    grammar_path: str | None = None
    budget: int = 100
    rl: QLearnerConfig = field(default_factory=QLearnerConfig)
    mbo: MBOConfig = field(default_factory=MBOConfig)
    seed: int = 0
    method: str = "reinbo"
    folds: int = 5
    outer_folds: int = 5
    ncv_methods: tuple[str, ...] = METHODS
    max_episodes: int | None = None
    out_dir: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "method", normalise_method(self.method))
        object.__setattr__(self, "ncv_methods", tuple(normalise_method(m) for m in self.ncv_methods))
        if self.budget < 1:
            raise ConfigError(f"budget must be >= 1, got {self.budget}")
        if self.folds < 2 or self.outer_folds < 2:
            raise ConfigError("folds and outer_folds must be >= 2")
        if self.dataset_path is None and self.synthetic is None:
            raise ConfigError("config needs a dataset path or a synthetic dataset spec")

    def replace(self, **changes: Any) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def normalise_method(method: str) -> str:
    m = _METHOD_ALIASES.get(method, method)
    if m not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from reinbo, random")
    return m


def _sub(cls, tree: dict[str, Any] | None):
    tree = dict(tree or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(tree) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    if isinstance(tree.get("patience"), str):
        tree["patience"] = float(tree["patience"])
    elif "patience" in tree and tree["patience"] is None:
        tree["patience"] = math.inf
    try:
        return cls(**tree)
    except (ContractViolation, TypeError) as exc:
        raise ConfigError(f"bad {cls.__name__}: {exc}") from exc


def config_from_tree(tree: dict[str, Any], base_dir: Path | None = None) -> RunConfig:
    tree = dict(tree or {})
    ds = tree.pop("dataset", None)
    kwargs: dict[str, Any] = {}
    if isinstance(ds, str):
        kwargs["dataset_path"] = ds
    elif isinstance(ds, dict) and "path" in ds:
        kwargs["dataset_path"] = ds["path"]
    elif isinstance(ds, dict) and "synthetic" in ds:
        kwargs["synthetic"] = dict(ds["synthetic"])
    elif ds is not None:
        raise ConfigError(f"cannot interpret dataset entry {ds!r}")
    if "dataset_path" in kwargs and base_dir is not None:
        p = Path(kwargs["dataset_path"])
        kwargs["dataset_path"] = str(p if p.is_absolute() else base_dir / p)
    if tree.get("grammar") is not None:
        g = Path(tree.pop("grammar"))
        kwargs["grammar_path"] = str(g if g.is_absolute() or base_dir is None else base_dir / g)
    else:
        tree.pop("grammar", None)
    kwargs["rl"] = _sub(QLearnerConfig, tree.pop("rl", None))
    kwargs["mbo"] = _sub(MBOConfig, tree.pop("mbo", None))
    if "out" in tree:
        tree["out_dir"] = tree.pop("out")
    if "ncv_methods" in tree:
        tree["ncv_methods"] = tuple(tree["ncv_methods"])
    names = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(tree) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs.update(tree)
    return RunConfig(**kwargs)


def load_config(path: str | Path) -> RunConfig:
    import yaml

    path = Path(path)
    try:
        tree = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise InputError(f"config {path} is not valid YAML/JSON: {exc}") from exc
    if not isinstance(tree, dict):
        raise InputError(f"config {path} must be a mapping")
    return config_from_tree(tree, path.parent)
