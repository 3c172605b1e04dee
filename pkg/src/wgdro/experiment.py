"""Seed x method x gamma x environment sweeps with CSV output.

Files written to ``output_dir``:

``results.csv``
    one row per (method, seed, gamma, environment); columns are
    ``RESULT_COLUMNS`` followed by ``acc_g0 .. acc_g{G-1}``.
``summary.csv``
    mean and sample standard deviation over seeds per (method, gamma, environment).
``history/<method>_seed<seed>_gamma<gamma>.csv``
    per-iteration group weights, robust and plain group losses, gap and step norm.
``runs.csv``
    wall-clock seconds and iteration counts per run (not byte-stable).

Floats are written with 17 significant digits. ``gamma`` is blank for the
methods that do not perturb (erm, gdro); those run once per seed.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as data_mod
from .config import ExperimentConfig
from .metrics import MetricsReport, evaluate
from .model import ModelParams
from .robust import RobustConfig
from .trainer import ROBUST_METHODS, TrainConfig, TrainHistory, train

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["method", "seed", "gamma", "environment", "average_acc", "worst_acc", "range_acc"]
METRIC_KEYS = ("average_acc", "worst_acc", "range_acc")


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def gamma_tag(gamma: float | None) -> str:
    return "none" if gamma is None else f"{gamma:g}"


@dataclass
class RunResult:
    method: str
    seed: int
    gamma: float | None
    params: ModelParams
    history: TrainHistory
    reports: dict[str, MetricsReport]
    seconds: float


@dataclass
class ExperimentResult:
    rows: list[dict] = field(default_factory=list)
    summary: list[dict] = field(default_factory=list)
    runs: list[RunResult] = field(default_factory=list)

    def select(self, **where) -> list[dict]:
        return [r for r in self.rows if all(r[k] == v for k, v in where.items())]


def load_table(cfg: ExperimentConfig) -> data_mod.RawTable:
    table = data_mod.load_csv(cfg.dataset, cfg.column_names)
    return data_mod.drop_missing(table)


def build_splits(table: data_mod.RawTable, cfg: ExperimentConfig, seed: int) -> data_mod.PreparedSplits:
    return data_mod.prepare_splits(
        table, seed=seed, train_fraction=cfg.train_fraction, subsample=cfg.subsample,
        label_column=cfg.label_column, race_column=cfg.race_column,
        education=cfg.education_column, positive_label=cfg.positive_label,
    )


def environment_specs(cfg: ExperimentConfig, seed: int) -> list[data_mod.EnvironmentSpec]:
    return [
        data_mod.EnvironmentSpec(None if e == "natural" else float(e), cfg.env_size,
                                 cfg.env_threshold, seed)
        for e in cfg.environments
    ]


def build_environments(splits: data_mod.PreparedSplits, cfg: ExperimentConfig, seed: int):
    envs = {}
    for spec in environment_specs(cfg, seed):
        rows = data_mod.make_education_environment(splits.dataset, splits.test_pool, spec)
        envs[spec.name] = splits.dataset.subset(rows)
    return envs


def train_config(cfg: ExperimentConfig, method: str, seed: int, gamma: float | None) -> TrainConfig:
    robust = RobustConfig(gamma=1e-4 if gamma is None else gamma, eta_z=cfg.eta_z, t_rob=cfg.t_rob)
    return TrainConfig(method=method, t_outer=cfg.t_outer, eta_theta=cfg.eta_theta,
                       eta_q=cfg.eta_q, robust=robust, seed=seed)


def run_one(splits: data_mod.PreparedSplits, envs: dict, cfg: ExperimentConfig,
            method: str, seed: int, gamma: float | None) -> RunResult:
    tcfg = train_config(cfg, method, seed, gamma)
    start = time.perf_counter()
    params, history = train(splits.train, tcfg)
    seconds = time.perf_counter() - start
    reports = {name: evaluate(params, env) for name, env in envs.items()}
    logger.info("run method=%s seed=%d gamma=%s: %.1fs, T=%d, T_rob=%d", method, seed,
                gamma_tag(gamma), seconds, cfg.t_outer, cfg.t_rob if method in ROBUST_METHODS else 0)
    return RunResult(method, seed, gamma, params, history, reports, seconds)


def run_grid(cfg: ExperimentConfig):
    """(method, gamma) pairs in run order."""
    for method in cfg.methods:
        gammas = cfg.gammas if method in ROBUST_METHODS else [None]
        for gamma in gammas:
            yield method, gamma


def result_row(run: RunResult, env_name: str) -> dict:
    rep = run.reports[env_name]
    row = {
        "method": run.method, "seed": run.seed, "gamma": run.gamma, "environment": env_name,
        "average_acc": rep.average_acc, "worst_acc": rep.worst_acc, "range_acc": rep.range_acc,
    }
    for k, a in enumerate(rep.per_group_acc):
        row[f"acc_g{k}"] = float(a)
    return row


def write_history(path: Path, history: TrainHistory) -> None:
    G = len(history.q_init)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "gap", "grad_norm"]
                   + [f"q_{k}" for k in range(G)]
                   + [f"loss_{k}" for k in range(G)]
                   + [f"plain_loss_{k}" for k in range(G)])
        w.writerow([0, "", ""] + [fmt(v) for v in history.q_init] + [""] * (2 * G))
        for t, r in enumerate(history.records, start=1):
            w.writerow([t, fmt(r.gap), fmt(r.grad_norm)]
                       + [fmt(v) for v in r.q]
                       + [fmt(v) for v in r.losses]
                       + [fmt(v) for v in r.plain_losses])


def summarize(rows: list[dict]) -> list[dict]:
    keys: list[tuple] = []
    buckets: dict[tuple, list[dict]] = {}
    for r in rows:
        k = (r["method"], r["gamma"], r["environment"])
        if k not in buckets:
            keys.append(k)
            buckets[k] = []
        buckets[k].append(r)
    out = []
    for k in keys:
        group = buckets[k]
        entry = {"method": k[0], "gamma": k[1], "environment": k[2], "n_seeds": len(group)}
        for m in METRIC_KEYS:
            vals = np.array([r[m] for r in group])
            entry[f"{m}_mean"] = float(vals.mean())
            entry[f"{m}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        out.append(entry)
    return out


def _write_csv(path: Path, rows: list[dict], columns: list[str]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])


def run_experiment(cfg: ExperimentConfig, output_dir: str | Path | None = None,
                   table: data_mod.RawTable | None = None) -> ExperimentResult:
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    (out / "history").mkdir(parents=True, exist_ok=True)
    if table is None:
        table = load_table(cfg)
    result = ExperimentResult()
    n_groups = data_mod.N_GROUPS
    columns = RESULT_COLUMNS + [f"acc_g{k}" for k in range(n_groups)]

    with (out / "results.csv").open("w", newline="") as res_fh, \
            (out / "runs.csv").open("w", newline="") as runs_fh:
        res_w = csv.writer(res_fh)
        res_w.writerow(columns)
        runs_w = csv.writer(runs_fh)
        runs_w.writerow(["method", "seed", "gamma", "seconds", "t_outer", "t_rob", "n_train"])
        for seed in cfg.seeds:
            splits = build_splits(table, cfg, seed)
            envs = build_environments(splits, cfg, seed)
            for method, gamma in run_grid(cfg):
                try:
                    run = run_one(splits, envs, cfg, method, seed, gamma)
                except Exception as exc:
                    raise RuntimeError(
                        f"run method={method} seed={seed} gamma={gamma_tag(gamma)} failed: {exc}"
                    ) from exc
                result.runs.append(run)
                write_history(out / "history" / f"{method}_seed{seed}_gamma{gamma_tag(gamma)}.csv",
                              run.history)
                for env_name in envs:
                    row = result_row(run, env_name)
                    result.rows.append(row)
                    res_w.writerow([fmt(row[c]) for c in columns])
                res_fh.flush()
                t_rob = cfg.t_rob if method in ROBUST_METHODS else 0
                runs_w.writerow([method, seed, fmt(gamma), f"{run.seconds:.3f}", cfg.t_outer,
                                 t_rob, splits.train_rows.size])
                runs_fh.flush()

    result.summary = summarize(result.rows)
    sum_cols = ["method", "gamma", "environment", "n_seeds"] + [
        f"{m}_{s}" for m in METRIC_KEYS for s in ("mean", "std")]
    _write_csv(out / "summary.csv", result.summary, sum_cols)
    return result


def education_histograms(splits: data_mod.PreparedSplits, cfg: ExperimentConfig, seed: int) -> list[dict]:
    """Education composition of the training split, the test pool and each environment."""
    ds = splits.dataset
    sets = {"train": splits.train_rows, "test_pool": splits.test_pool}
    for spec in environment_specs(cfg, seed):
        sets[spec.name] = data_mod.make_education_environment(ds, splits.test_pool, spec)
    cats = ds.categories[ds.feature_names[ds.education_column]]
    rows = []
    for name, idx in sets.items():
        names = ds.decode_education(idx)
        counts = {c: 0 for c in cats}
        for c in names:
            counts[c] += 1
        total = len(names)
        for c in cats:
            code = cats.index(c)
            std_val = (code - ds.scaler.mean[ds.education_column]) / ds.scaler.std[ds.education_column]
            rows.append({"split": name, "education": c, "standardized": float(std_val),
                         "above_threshold": int(std_val > cfg.env_threshold),
                         "count": counts[c], "fraction": counts[c] / total if total else 0.0})
    return rows
