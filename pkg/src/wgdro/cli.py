"""Command line entry point: ``wgdro {train,evaluate,sweep,envs,verify}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import experiment as exp
from . import model
from .config import ConfigError, ExperimentConfig, parse_config
from .metrics import evaluate

OUTPUT_DIR_ENV = "WGDRO_OUTPUT_DIR"
logger = logging.getLogger("wgdro")


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--dataset", help="override the config's dataset path")
    p.add_argument("--seed", type=int, action="append", help="override seeds (repeatable)")
    p.add_argument("--method", action="append", help="override methods (repeatable)")
    p.add_argument("--gamma", type=float, action="append", help="override gammas (repeatable)")
    p.add_argument("--subsample", type=int, help="stratified training subset size")
    p.add_argument("--output-dir", help=f"output directory (also ${OUTPUT_DIR_ENV})")


def _load_config(args) -> ExperimentConfig:
    cfg = parse_config(args.config)
    updates = {}
    if args.dataset:
        updates["dataset"] = args.dataset
    if args.seed:
        updates["seeds"] = args.seed
    if args.method:
        updates["methods"] = args.method
    if args.gamma:
        updates["gammas"] = args.gamma
    if args.subsample is not None:
        updates["subsample"] = args.subsample
    out = args.output_dir or os.environ.get(OUTPUT_DIR_ENV)
    if out:
        updates["output_dir"] = out
    return replace(cfg, **updates) if updates else cfg


def save_params(path, params: model.ModelParams) -> None:
    arrays = {f"a{i}": a for i, a in enumerate(params.arrays())}
    np.savez(path, loss_kind=np.array(params.loss_kind), **arrays)


def load_params(path) -> model.ModelParams:
    with np.load(path) as f:
        n = len([k for k in f.files if k.startswith("a")])
        return model.from_arrays([f[f"a{i}"] for i in range(n)], str(f["loss_kind"]))


def cmd_train(args) -> int:
    cfg = _load_config(args)
    seed, method = cfg.seeds[0], cfg.methods[0]
    gamma = cfg.gammas[0] if method in ("ours", "dro") else None
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = exp.load_table(cfg)
    splits = exp.build_splits(table, cfg, seed)
    envs = exp.build_environments(splits, cfg, seed)
    run = exp.run_one(splits, envs, cfg, method, seed, gamma)
    stem = f"{method}_seed{seed}_gamma{exp.gamma_tag(gamma)}"
    save_params(out / f"{stem}.npz", run.params)
    exp.write_history(out / f"{stem}_history.csv", run.history)
    report = {name: rep.as_dict() for name, rep in run.reports.items()}
    print(json.dumps({"method": method, "seed": seed, "gamma": gamma, "seconds": round(run.seconds, 3),
                      "params": str(out / f"{stem}.npz"), "metrics": report}, indent=2))
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    params = load_params(args.params)
    table = exp.load_table(cfg)
    seed = cfg.seeds[0]
    splits = exp.build_splits(table, cfg, seed)
    envs = exp.build_environments(splits, cfg, seed)
    print(json.dumps({name: evaluate(params, env).as_dict() for name, env in envs.items()}, indent=2))
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    result = exp.run_experiment(cfg)
    for s in result.summary:
        print(f"{s['method']:>5} gamma={exp.fmt(s['gamma']) or '-':>8} {s['environment']:>14} "
              f"avg={s['average_acc_mean']:.4f}±{s['average_acc_std']:.4f} "
              f"worst={s['worst_acc_mean']:.4f}±{s['worst_acc_std']:.4f} "
              f"range={s['range_acc_mean']:.4f}±{s['range_acc_std']:.4f}")
    print(f"wrote {cfg.output_dir}/results.csv ({len(result.rows)} rows)")
    return 0


def cmd_envs(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = exp.load_table(cfg)
    seed = cfg.seeds[0]
    splits = exp.build_splits(table, cfg, seed)
    rows = exp.education_histograms(splits, cfg, seed)
    cols = ["split", "education", "standardized", "above_threshold", "count", "fraction"]
    path = out / f"envs_seed{seed}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([exp.fmt(r[c]) for c in cols])
    if args.dump:
        data_mod.dump_dataset(splits.dataset, splits.train_rows, out / f"train_seed{seed}.csv")
        data_mod.dump_dataset(splits.dataset, splits.test_pool, out / f"test_pool_seed{seed}.csv")
    print(f"wrote {path}")
    return 0


def cmd_verify(args) -> int:
    from .checks import run_checks

    reports = run_checks(quick=args.quick)
    for r in reports:
        print(r.line())
    return 0 if all(r.passed for r in reports) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wgdro", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one (method, seed, gamma) run")
    _add_overrides(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate saved parameters on the configured environments")
    _add_overrides(p)
    p.add_argument("--params", required=True, help=".npz written by `train`")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="run every seed x method x gamma and write CSVs")
    _add_overrides(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("envs", help="education composition of training split and environments")
    _add_overrides(p)
    p.add_argument("--dump", action="store_true", help="also write standardized train/test CSVs")
    p.set_defaults(func=cmd_envs)

    p = sub.add_parser("verify", help="run the numerical oracle checks")
    p.add_argument("--quick", action="store_true", help="fewer random samples")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
