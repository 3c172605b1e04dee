"""Worst-case per-sample perturbations under a quadratic transport penalty.

For an anchor ``(x, y)`` the penalised loss is

    phi(z) = loss(params, z, y) - gamma * 0.5 * ||z - x||^2

and the robust loss of a group is the mean of ``sup_z phi(z)`` over its
samples, approximated by ``t_rob`` fixed-size gradient-ascent steps started at
the anchor. Only covariates move; labels stay at their observed value.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import model
from .model import DimensionError, ModelParams

logger = logging.getLogger(__name__)


class NumericalDivergenceError(FloatingPointError):
    pass


class EmptyGroupError(ValueError):
    pass


@dataclass(frozen=True)
class RobustConfig:
    gamma: float = 1e-4
    eta_z: float = 0.05
    t_rob: int = 100

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not self.eta_z > 0:
            raise ValueError(f"eta_z must be > 0, got {self.eta_z}")
        if int(self.t_rob) != self.t_rob or self.t_rob < 0:
            raise ValueError(f"t_rob must be a nonnegative integer, got {self.t_rob}")


@dataclass(frozen=True)
class PerturbationResult:
    z: np.ndarray
    phi_value: float
    transport_cost: float


class BatchPerturbation(NamedTuple):
    z: np.ndarray           # (n, d)
    phi: np.ndarray         # (n,)
    cost: np.ndarray        # (n,)
    anchor_loss: np.ndarray  # (n,) plain loss at the anchor
    trace: np.ndarray | None  # (t_rob + 1, n) phi along the ascent, if requested


def transport_cost(anchor_x, z):
    """Half squared Euclidean distance; rowwise for 2-D inputs."""
    a = np.asarray(anchor_x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if a.shape != z.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {z.shape}")
    diff = z - a
    out = 0.5 * np.sum(diff * diff, axis=-1)
    return float(out) if out.ndim == 0 else out


def penalized_loss(params: ModelParams, x, y, z, gamma: float):
    return model.loss(params, z, y) - gamma * transport_cost(x, z)


def perturb_batch(params: ModelParams, X, y, cfg: RobustConfig, *,
                  return_trace: bool = False, row_ids=None) -> BatchPerturbation:
    """Run the ascent for every row of ``X`` at once.

    Rows do not interact, so this is the per-sample procedure applied in
    parallel. ``row_ids`` maps batch rows to dataset rows in error messages.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"expected a 2-D batch, got shape {X.shape}")
    y = np.broadcast_to(np.asarray(y, dtype=np.float64), (X.shape[0],))
    gamma, eta = float(cfg.gamma), float(cfg.eta_z)
    Z = X.copy()
    trace = [] if return_trace else None
    anchor_loss = None
    prev_phi = None
    violations = 0
    for t in range(1, int(cfg.t_rob) + 1):
        lz, _, gz = model._backward(params, Z, y, need_params=False)
        diff = Z - X
        # overflow is caught by _check_finite and reported with the row and step
        with np.errstate(over="ignore", invalid="ignore"):
            phi = lz - gamma * 0.5 * np.sum(diff * diff, axis=1)
            Z = Z + eta * (gz - gamma * diff)
        if anchor_loss is None:
            anchor_loss = lz.copy()
        _check_finite(phi, t - 1, row_ids)
        if trace is not None:
            trace.append(phi)
        if prev_phi is not None:
            violations += int(np.count_nonzero(phi < prev_phi - 1e-9))
        prev_phi = phi
        _check_finite(Z, t, row_ids)

    lz = model.loss(params, Z, y)
    cost = transport_cost(X, Z)
    phi = lz - gamma * cost
    _check_finite(phi, int(cfg.t_rob), row_ids)
    if anchor_loss is None:
        anchor_loss = lz
    if trace is not None:
        trace.append(phi)
        trace = np.vstack(trace)
    if prev_phi is not None:
        violations += int(np.count_nonzero(phi < prev_phi - 1e-9))
    if violations:
        logger.debug("ascent decreased phi in %d row-steps (non-concave objective)", violations)
    return BatchPerturbation(Z, phi, np.atleast_1d(cost), anchor_loss, trace)


def _check_finite(arr: np.ndarray, iteration: int, row_ids) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        if row_ids is not None:
            row = int(row_ids[row])
        raise NumericalDivergenceError(
            f"non-finite value in worst-case ascent at sample {row}, iteration {iteration}"
        )


def worst_case_perturbation(params: ModelParams, x, y, cfg: RobustConfig) -> PerturbationResult:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("expected a single feature vector")
    res = perturb_batch(params, x[None, :], [y], cfg)
    return PerturbationResult(res.z[0], float(res.phi[0]), float(res.cost[0]))


class GroupEval(NamedTuple):
    robust_loss: float
    plain_loss: float
    grad: ModelParams


def group_objective(params: ModelParams, X, y, cfg: RobustConfig | None, *,
                    row_ids=None) -> GroupEval:
    """Mean (robust or plain) loss of one group and its parameter gradient.

    With ``cfg=None`` no perturbation is applied and the robust loss equals
    the plain loss. Otherwise the gradient is taken at the returned ``z_i``
    with the ``z_i`` held fixed; the transport term has no parameter
    dependence.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyGroupError("group has no samples")
    if cfg is None:
        per, grads, _ = model.loss_and_grads(params, X, y)
        m = float(np.mean(per))
        return GroupEval(m, m, grads)
    res = perturb_batch(params, X, y, cfg, row_ids=row_ids)
    grads = model.grad_params(params, res.z, y)
    return GroupEval(float(np.mean(res.phi)), float(np.mean(res.anchor_loss)), grads)


def robust_group_loss(params: ModelParams, X, y, cfg: RobustConfig) -> tuple[float, ModelParams]:
    """Robust group loss (mean penalised loss at the ascent output) and its gradient."""
    ev = group_objective(params, X, y, cfg)
    return ev.robust_loss, ev.grad
