"""Command-line entry point: ``reinbo run | ncv | grammar``.

Exit codes: 0 success, 1 input error, 2 budget/config contract error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys

from reinbo.config import RunConfig, load_config
from reinbo.driver import emit_ncv_reports, emit_reports, load_dataset, load_run_grammar, run, run_ncv_benchmark
from reinbo.errors import ConfigError, ContractViolation, InputError
from reinbo.grammar import default_grammar, load_grammar
from reinbo.mbo import MBOConfig
from reinbo.rl import QLearnerConfig

EXIT_OK, EXIT_INPUT, EXIT_CONTRACT = 0, 1, 2

# flag name -> RunConfig field, for the top-level overrides
_TOP_FLAGS = {
    "seed": int,
    "method": str,
    "budget": int,
    "folds": int,
    "outer_folds": int,
    "max_episodes": int,
}


def _float_or_inf(text: str) -> float:
    return math.inf if text.lower() in ("inf", "none") else float(text)


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML/JSON run configuration")
    p.add_argument("--out", dest="out_dir", help="output directory for reports")
    p.add_argument("--dataset", dest="dataset_path", help="CSV dataset (last column is the label)")
    p.add_argument("--synthetic", help='synthetic dataset spec as JSON, e.g. \'{"kind": "blobs", "seed": 1}\'')
    p.add_argument("--grammar", dest="grammar_path", help="YAML grammar file")
    p.add_argument("--ncv-methods", help="comma-separated methods for ncv")
    for name, typ in _TOP_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ)
    for prefix, cls in (("rl", QLearnerConfig), ("mbo", MBOConfig)):
        for f in dataclasses.fields(cls):
            typ = _float_or_inf if f.name == "patience" else (float if "float" in str(f.type) else int)
            p.add_argument(f"--{prefix}-{f.name.replace('_', '-')}", dest=f"{prefix}__{f.name}", type=typ)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.dataset_path or args.synthetic:
        cfg = None
    else:
        raise ConfigError("give --config, --dataset or --synthetic")
    changes: dict = {}
    for name in ("dataset_path", "grammar_path", "out_dir", *_TOP_FLAGS):
        v = getattr(args, name, None)
        if v is not None:
            changes[name] = v
    if args.synthetic:
        try:
            changes["synthetic"] = json.loads(args.synthetic)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--synthetic is not valid JSON: {exc}") from exc
        changes.setdefault("dataset_path", None)
    if args.dataset_path:
        changes["synthetic"] = None
    if args.ncv_methods:
        changes["ncv_methods"] = tuple(m.strip() for m in args.ncv_methods.split(","))
    sub = {"rl": {}, "mbo": {}}
    for key, v in vars(args).items():
        if "__" in key and v is not None:
            prefix, name = key.split("__", 1)
            sub[prefix][name] = v
    try:
        if cfg is None:
            cfg, changes = RunConfig(**changes), {}
        if sub["rl"]:
            changes["rl"] = dataclasses.replace(cfg.rl, **sub["rl"])
        if sub["mbo"]:
            changes["mbo"] = dataclasses.replace(cfg.mbo, **sub["mbo"])
        return cfg.replace(**changes) if changes else cfg
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reinbo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_overrides(sub.add_parser("run", help="one search run (ReinBo or random search)"))
    _add_overrides(sub.add_parser("ncv", help="nested-CV benchmark of the configured methods"))
    g = sub.add_parser("grammar", help="inspect the pipeline grammar")
    g.add_argument("--print", action="store_true", help="dump the resolved grammar")
    g.add_argument("--grammar", dest="grammar_path", help="YAML grammar file (default: built-in)")
    g.add_argument("--n-features", type=int, default=10, help="feature count used to resolve bounds")
    return parser


def _cmd_run(args) -> int:
    cfg = resolve_config(args)
    result = run(cfg)
    print(f"best pipeline: {result.best_key}")
    print(f"best inner accuracy: {result.best_accuracy:.6f}")
    print(f"budget used: {result.budget_used}/{result.budget_limit}, episodes: {len(result.episodes)}")
    if cfg.out_dir:
        for path in emit_reports(result, cfg.out_dir):
            print(f"wrote {path}")
    return EXIT_OK


def _cmd_ncv(args) -> int:
    cfg = resolve_config(args)
    data = load_dataset(cfg)
    load_run_grammar(cfg, data)  # fail early on a bad grammar
    result = run_ncv_benchmark(cfg, data=data)
    for method, v in result.aggregated_mmce.items():
        print(f"{method}: aggregated mmce {v:.6f}")
    if cfg.out_dir:
        for path in emit_ncv_reports(result, cfg.out_dir):
            print(f"wrote {path}")
    return EXIT_OK


def _cmd_grammar(args) -> int:
    grammar = load_grammar(args.grammar_path, args.n_features) if args.grammar_path else default_grammar(args.n_features)
    print(grammar.describe())
    print(f"pipelines: {grammar.n_pipelines}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"run": _cmd_run, "ncv": _cmd_ncv, "grammar": _cmd_grammar}[args.command]
    try:
        return handler(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, ContractViolation) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
