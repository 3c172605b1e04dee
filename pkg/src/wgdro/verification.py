"""Independent numerical oracles for the model, the inner ascent and the trainer.

None of these checks call the routine they validate: gradients are checked
against central differences of the loss, the ascent against closed forms and
exhaustive grids, and the group weights against the KL interior bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model
from .model import ModelParams

GRID_MAX_DIM = 3
# Denominator floor of the per-coordinate relative error, so that coordinates
# whose true derivative vanishes are judged on absolute error.
REL_ERR_FLOOR = 1e-6


class OracleInputError(ValueError):
    pass


@dataclass(frozen=True)
class OracleReport:
    name: str
    max_error: float
    tolerance: float
    samples: int

    @property
    def passed(self) -> bool:
        return bool(self.max_error <= self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: max_error={self.max_error:.3e} "
                f"tolerance={self.tolerance:.3e} samples={self.samples}")


def relative_error(analytic, numeric, floor: float = REL_ERR_FLOOR) -> np.ndarray:
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def reference_loss(arrays, loss_kind: str, x, y) -> np.ndarray:
    """Straight-line forward pass and loss in extended precision.

    ``arrays`` alternates weights and biases. Kept separate from
    :mod:`wgdro.model` so that gradient checks compare two implementations.
    """
    X = np.atleast_2d(np.asarray(x, dtype=np.longdouble))
    a = X
    n_layers = len(arrays) // 2
    for k in range(n_layers):
        W = np.asarray(arrays[2 * k], dtype=np.longdouble)
        b = np.asarray(arrays[2 * k + 1], dtype=np.longdouble)
        h = a @ W + b
        if k < n_layers - 1:
            a = np.where(h > 0, h, np.expm1(np.minimum(h, 0)))
        else:
            a = h
    logit = a[:, 0]
    if loss_kind == "score":
        return logit
    yv = np.asarray(y, dtype=np.longdouble)
    return np.maximum(logit, 0) + np.log1p(np.exp(-np.abs(logit))) - yv * logit


def numeric_grad_params(params: ModelParams, x, y, h: float = 1e-5) -> np.ndarray:
    """Central differences of the mean loss over the rows of ``x``, per flat coordinate."""
    arrays = [np.asarray(a, dtype=np.longdouble) for a in params.arrays()]
    out = []
    for a in arrays:
        for idx in np.ndindex(a.shape):
            orig = a[idx]
            a[idx] = orig + h
            fp = np.mean(reference_loss(arrays, params.loss_kind, x, y))
            a[idx] = orig - h
            fm = np.mean(reference_loss(arrays, params.loss_kind, x, y))
            a[idx] = orig
            out.append((fp - fm) / (2 * h))
    return np.array(out, dtype=np.float64)


def numeric_grad_input(params: ModelParams, x, y, h: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=np.longdouble)
    arrays = params.arrays()
    out = np.empty(x.size)
    for j in range(x.size):
        xp = x.copy()
        xp[j] += h
        xm = x.copy()
        xm[j] -= h
        fp = reference_loss(arrays, params.loss_kind, xp, y)[0]
        fm = reference_loss(arrays, params.loss_kind, xm, y)[0]
        out[j] = float((fp - fm) / (2 * h))
    return out


def finite_diff_check(params: ModelParams, x, y, h: float = 1e-5,
                      tolerance: float = 1e-5, name: str = "finite_diff") -> OracleReport:
    """Max relative error of backprop vs central differences over all theta and x coordinates.

    The differences are taken on :func:`reference_loss` in extended precision,
    which keeps their rounding noise well below the tolerance at ``h=1e-5``.
    """
    if not h > 0:
        raise OracleInputError("h must be positive")
    x = np.asarray(x, dtype=np.float64)
    ga = model.grad_params(params, x, y).flatten()
    gn = numeric_grad_params(params, x, y, h)
    xa = model.grad_input(params, x, y)
    xn = numeric_grad_input(params, x, y, h)
    err = max(relative_error(ga, gn).max(), relative_error(xa, xn).max())
    return OracleReport(name, float(err), tolerance, ga.size + xa.size)


def closed_form_linear_oracle(w, x, gamma: float) -> tuple[np.ndarray, float]:
    """Maximiser and value of ``w.z - gamma/2 ||z - x||^2``."""
    if gamma <= 0:
        raise OracleInputError("closed form needs gamma > 0")
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    return x + w / gamma, float(w @ x + w @ w / (2 * gamma))


def _grid_axes(x: np.ndarray, box_radius: float, resolution: float) -> list[np.ndarray]:
    steps = int(round(2 * box_radius / resolution))
    offsets = np.linspace(-box_radius, box_radius, steps + 1)
    return [xi + offsets for xi in x]


def grid_robust_oracle(params: ModelParams, x, y, gamma: float, box_radius: float = 1.0,
                       resolution: float = 0.01, chunk: int = 1 << 18) -> float:
    """Exhaustive max of the penalised loss over a box grid centred at ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.size > GRID_MAX_DIM:
        raise OracleInputError(f"grid oracle limited to {GRID_MAX_DIM} dimensions, got {x.size}")
    axes = _grid_axes(x, box_radius, resolution)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, x.size)
    best = -np.inf
    for start in range(0, mesh.shape[0], chunk):
        Z = mesh[start:start + chunk]
        d = Z - x
        vals = model.loss(params, Z, y) - gamma * 0.5 * np.einsum("ij,ij->i", d, d)
        best = max(best, float(vals.max()))
    return best


def kl_divergence(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def _check_simplex(v: np.ndarray, what: str) -> None:
    if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
        raise OracleInputError(f"{what} is not on the simplex")


def kl_interior_bound_check(p, q, delta: float, name: str = "kl_interior_bound") -> OracleReport:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    _check_simplex(p, "p")
    _check_simplex(q, "q")
    if not delta > 0 or q.min() < delta:
        raise OracleInputError("need min(q) >= delta > 0")
    return OracleReport(name, kl_divergence(p, q), math.log(1.0 / delta), 1)


def training_kl_audit(history, name: str = "training_kl_audit") -> OracleReport:
    """Realised interior level delta and the KL bound between consecutive weights."""
    qs = [np.asarray(history.q_init)] + [np.asarray(r.q) for r in history.records]
    if len(qs) < 2:
        raise OracleInputError("history is empty")
    delta = min(float(q.min()) for q in qs)
    if not delta > 0:
        return OracleReport(name, math.inf, 0.0, len(qs) - 1)
    worst = max(kl_divergence(a, b) for a, b in zip(qs[1:], qs[:-1]))
    return OracleReport(name, worst, math.log(1.0 / delta), len(qs) - 1)


def linear_robust_objective(w, X, gamma: float) -> float:
    """Closed-form robust loss of the linear score ``w.z`` averaged over anchors ``X``."""
    w = np.asarray(w, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    return float(np.mean(X @ w) + w @ w / (2 * gamma))


def lipschitz_spot_check(X, gamma: float, box: float, n_pairs: int = 100, seed: int = 0,
                         name: str = "robust_lipschitz") -> OracleReport:
    """|F(w) - F(w')| <= K ||w - w'|| for the closed-form linear robust loss.

    For the score loss the parameter gradient at a point ``z`` is ``z`` itself,
    so on parameters confined to ``[-box, box]^d`` every worst-case point
    satisfies ``||z*|| <= max_i ||x_i|| + sqrt(d) box / gamma`` and that bound
    is the Lipschitz constant K. Reports the largest ratio
    ``|F(w) - F(w')| / (K ||w - w'||)`` with tolerance 1.
    """
    X = np.asarray(X, dtype=np.float64)
    d = X.shape[1]
    K = float(np.linalg.norm(X, axis=1).max() + math.sqrt(d) * box / gamma)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        w1 = rng.uniform(-box, box, d)
        w2 = rng.uniform(-box, box, d)
        diff = abs(linear_robust_objective(w1, X, gamma) - linear_robust_objective(w2, X, gamma))
        worst = max(worst, diff / (K * np.linalg.norm(w1 - w2)))
    return OracleReport(name, worst, 1.0, n_pairs)
