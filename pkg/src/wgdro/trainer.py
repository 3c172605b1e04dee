"""Descent / mirror-ascent training over group weights and model parameters.

All four methods share one full-batch loop:

========  ==============  ============  =================
method    groups          perturbation  group weights q
========  ==============  ============  =================
ours      dataset groups  yes           mirror ascent
gdro      dataset groups  no            mirror ascent
dro       one (all rows)  yes           fixed at (1,)
erm       one (all rows)  no            fixed at (1,)
========  ==============  ============  =================
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import model
from .model import DimensionError, ModelParams
from .robust import EmptyGroupError, RobustConfig, group_objective

logger = logging.getLogger(__name__)

METHODS = ("ours", "erm", "dro", "gdro")
GROUPED_METHODS = ("ours", "gdro")
ROBUST_METHODS = ("ours", "dro")


class TrainingDivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    method: str = "ours"
    t_outer: int = 200
    eta_theta: float = 0.1
    eta_q: float = 0.1
    robust: RobustConfig = field(default_factory=RobustConfig)
    seed: int = 42
    linear: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if int(self.t_outer) != self.t_outer or self.t_outer < 0:
            raise ValueError(f"t_outer must be a nonnegative integer, got {self.t_outer}")
        if not self.eta_theta > 0:
            raise ValueError(f"eta_theta must be > 0, got {self.eta_theta}")
        if not self.eta_q > 0:
            raise ValueError(f"eta_q must be > 0, got {self.eta_q}")


@dataclass
class IterationRecord:
    losses: np.ndarray        # per-group robust losses at theta_{t-1}
    plain_losses: np.ndarray  # per-group unperturbed losses at theta_{t-1}
    q: np.ndarray             # weights after the mirror-ascent step
    gap: float                # max(losses) - q . losses
    grad_norm: float          # norm of the q-weighted gradient used in the step
    params: np.ndarray | None = None


@dataclass
class TrainHistory:
    q_init: np.ndarray
    records: list[IterationRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def q(self) -> np.ndarray:
        return np.array([r.q for r in self.records]).reshape(len(self.records), len(self.q_init))

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.losses for r in self.records]).reshape(len(self.records), len(self.q_init))

    @property
    def plain_losses(self) -> np.ndarray:
        return np.array([r.plain_losses for r in self.records]).reshape(len(self.records), len(self.q_init))

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r.gap for r in self.records])


def mirror_ascent_step(q, losses, eta_q: float) -> np.ndarray:
    """Exponentiated-gradient update ``q_g <- q_g exp(eta_q * loss_g) / Z``."""
    q = np.asarray(q, dtype=np.float64)
    losses = np.asarray(losses, dtype=np.float64)
    if q.shape != losses.shape:
        raise DimensionError(f"q has shape {q.shape} but losses {losses.shape}")
    bad = np.flatnonzero(~np.isfinite(losses))
    if bad.size:
        raise ValueError(f"non-finite loss for group {int(bad[0])}")
    m = q * np.exp(eta_q * (losses - losses.max()))
    return m / m.sum()


def descent_step(params: ModelParams, q, group_grads: Sequence[ModelParams], eta_theta: float) -> ModelParams:
    q = np.asarray(q, dtype=np.float64)
    if len(group_grads) != q.shape[0]:
        raise DimensionError(f"{len(group_grads)} gradients for {q.shape[0]} weights")
    direction = np.zeros(params.size)
    for qg, g in zip(q, group_grads):
        flat = g.flatten()
        if flat.shape != direction.shape:
            raise DimensionError("gradient shape does not match params")
        direction += qg * flat
    return params.unflatten(params.flatten() - eta_theta * direction)


def duality_gap(losses, q) -> float:
    losses = np.asarray(losses, dtype=np.float64)
    return float(losses.max() - np.dot(q, losses))


def _groups_for(data, method: str) -> list[np.ndarray]:
    n = data.X.shape[0]
    if n == 0:
        raise EmptyGroupError("dataset is empty")
    if method not in GROUPED_METHODS:
        return [np.arange(n)]
    for g, idx in enumerate(data.group_index):
        if len(idx) == 0:
            raise EmptyGroupError(f"group {g} has no training samples")
    return [np.asarray(idx) for idx in data.group_index]


def train(data, cfg: TrainConfig, *, init: ModelParams | None = None,
          record_params: bool = False) -> tuple[ModelParams, TrainHistory]:
    """Full-batch training of ``data`` (anything with ``X``, ``y``, ``group_index``)."""
    groups = _groups_for(data, cfg.method)
    params = init if init is not None else model.init_params(cfg.seed, data.X.shape[1], linear=cfg.linear)
    n = data.X.shape[0]
    q = np.array([len(idx) / n for idx in groups]) if len(groups) > 1 else np.ones(1)
    history = TrainHistory(q_init=q.copy())
    rcfg = cfg.robust if cfg.method in ROBUST_METHODS else None
    update_q = cfg.method in GROUPED_METHODS

    for t in range(1, int(cfg.t_outer) + 1):
        evals = [
            group_objective(params, data.X[idx], data.y[idx], rcfg, row_ids=idx)
            for idx in groups
        ]
        losses = np.array([e.robust_loss for e in evals])
        plain = np.array([e.plain_loss for e in evals])
        if not np.all(np.isfinite(losses)):
            raise TrainingDivergenceError(f"non-finite group loss at iteration {t}: {losses}")
        if update_q:
            q = mirror_ascent_step(q, losses, cfg.eta_q)
        grads = [e.grad for e in evals]
        new_params = descent_step(params, q, grads, cfg.eta_theta)
        if not new_params.is_finite():
            raise TrainingDivergenceError(f"non-finite parameters after iteration {t}")
        step = (params.flatten() - new_params.flatten()) / cfg.eta_theta
        params = new_params
        history.records.append(IterationRecord(
            losses=losses,
            plain_losses=plain,
            q=q.copy(),
            gap=duality_gap(losses, q),
            grad_norm=float(np.linalg.norm(step)),
            params=params.flatten() if record_params else None,
        ))
        if t == 1 or t % 10 == 0 or t == cfg.t_outer:
            logger.debug("%s iter %d losses=%s q=%s", cfg.method, t, np.round(losses, 4), np.round(q, 4))
    return params, history
