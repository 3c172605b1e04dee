"""Property-based checks of the model, ascent and trainer.

Each function returns an :class:`~wgdro.verification.OracleReport`;
:func:`run_checks` runs them all (this is what ``wgdro verify`` prints).
"""
from __future__ import annotations

import numpy as np

from . import model, toys
from .metrics import evaluate
from .model import ModelParams
from .robust import RobustConfig, perturb_batch, worst_case_perturbation
from .trainer import TrainConfig, mirror_ascent_step, train
from .verification import (
    OracleReport,
    closed_form_linear_oracle,
    finite_diff_check,
    grid_robust_oracle,
    kl_divergence,
    lipschitz_spot_check,
    training_kl_audit,
)

DEGENERATE_GAMMA = 1e9


def linear_score_model(w) -> ModelParams:
    w = np.asarray(w, dtype=np.float64)
    return ModelParams((w[:, None].copy(),), (np.zeros(1),), "score")


def check_gradients(n: int = 50, seed: int = 0, tolerance: float = 1e-5) -> OracleReport:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        d = int(rng.integers(1, 16))
        params = model.init_params(int(rng.integers(2**32)), d)
        x = rng.standard_normal(d)
        y = int(rng.integers(2))
        worst = max(worst, finite_diff_check(params, x, y).max_error)
    return OracleReport("gradient_oracle", worst, tolerance, n)


def check_closed_form(n: int = 100, seed: int = 1, tolerance: float = 1e-6) -> OracleReport:
    """Ascent vs ``z* = x + w / gamma`` with ``eta_z = 0.5 / gamma`` and 200 steps."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        d = int(rng.integers(1, 11))
        w = rng.standard_normal(d)
        x = rng.standard_normal(d)
        gamma = float(rng.uniform(0.5, 10.0))
        res = worst_case_perturbation(linear_score_model(w), x, 0, RobustConfig(gamma, 0.5 / gamma, 200))
        z_star, phi_star = closed_form_linear_oracle(w, x, gamma)
        worst = max(worst, float(np.linalg.norm(res.z - z_star)), abs(res.phi_value - phi_star))
    return OracleReport("closed_form_maximizer", worst, tolerance, n)


def check_grid(n: int = 20, seed: int = 2, gamma: float = 1.0, tolerance: float = 1e-3) -> OracleReport:
    """Ascent value vs exhaustive 0.01-grid supremum on the unit box around 2-D anchors.

    Error is ``grid_sup - phi_ascent``, so the ascent passes when it is at most
    ``tolerance`` below the grid.
    """
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n):
        params = model.init_params(int(rng.integers(2**32)), 2)
        x = rng.standard_normal(2)
        y = int(rng.integers(2))
        res = worst_case_perturbation(params, x, y, RobustConfig(gamma, 0.5 / gamma, 200))
        sup = grid_robust_oracle(params, x, y, gamma, box_radius=1.0, resolution=0.01)
        worst = max(worst, sup - res.phi_value)
    return OracleReport("grid_oracle", float(worst), tolerance, n)


def _trajectory(ds, method: str, t_outer: int, gamma: float, eta_z: float, t_rob: int) -> np.ndarray:
    cfg = TrainConfig(method=method, t_outer=t_outer, robust=RobustConfig(gamma, eta_z, t_rob), seed=7)
    _, hist = train(ds, cfg, record_params=True)
    return np.array([r.params for r in hist.records])


def check_degenerations(t_outer: int = 10, tolerance: float = 1e-6) -> list[OracleReport]:
    """With gamma = 1e9 the perturbation vanishes: ours == gdro and dro == erm.

    The inner step is ``0.5 / gamma``; an explicit ascent step larger than
    ``2 / gamma`` diverges on the transport term.
    """
    ds = toys.gaussian_groups(seed=3)
    g = DEGENERATE_GAMMA
    out = []
    for robust, plain in (("ours", "gdro"), ("dro", "erm")):
        a = _trajectory(ds, robust, t_outer, g, 0.5 / g, 20)
        b = _trajectory(ds, plain, t_outer, g, 0.5 / g, 20)
        out.append(OracleReport(f"degenerate_{robust}_vs_{plain}", float(np.abs(a - b).max()),
                                tolerance, t_outer))
    return out


def check_mirror_ascent(n: int = 1000, seed: int = 4) -> list[OracleReport]:
    rng = np.random.default_rng(seed)
    sum_err, min_q, shift_err = 0.0, np.inf, 0.0
    for _ in range(n):
        G = int(rng.integers(1, 9))
        q = rng.dirichlet(np.ones(G))
        losses = rng.uniform(0, 5, G)
        eta = float(rng.uniform(0.01, 2.0))
        new = mirror_ascent_step(q, losses, eta)
        sum_err = max(sum_err, abs(new.sum() - 1.0))
        min_q = min(min_q, new.min())
        shifted = mirror_ascent_step(q, losses + rng.uniform(-100, 100), eta)
        shift_err = max(shift_err, float(np.abs(shifted - new).max()))
    e = np.e
    closed = mirror_ascent_step([0.5, 0.5], [1.0, 0.0], 1.0)
    closed_err = float(np.abs(closed - [e / (1 + e), 1 / (1 + e)]).max())
    return [
        OracleReport("mirror_simplex_sum", sum_err, 1e-12, n),
        # positivity expressed as an error: 0 when every weight stays strictly positive
        OracleReport("mirror_positivity", 0.0 if min_q > 0 else 1.0, 0.0, n),
        OracleReport("mirror_shift_invariance", shift_err, 1e-12, n),
        OracleReport("mirror_closed_form", closed_err, 1e-12, 1),
    ]


def check_kl_bound(n: int = 1000, seed: int = 5) -> list[OracleReport]:
    """KL(p||q) <= ln(1/delta) with delta = min(q), for random interior pairs and a GDRO run."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n):
        G = int(rng.integers(2, 9))
        p = rng.dirichlet(np.ones(G) * rng.uniform(0.1, 3))
        q = rng.dirichlet(np.ones(G) * rng.uniform(0.1, 3))
        delta = float(q.min())
        worst = max(worst, kl_divergence(p, q) - np.log(1 / delta))
    random_report = OracleReport("kl_bound_random_pairs", float(worst), 0.0, n)
    ds = toys.separable_two_groups(seed=0)
    _, hist = train(ds, TrainConfig(method="gdro", t_outer=200, seed=42, linear=True))
    audit = training_kl_audit(hist, name="kl_bound_gdro_run")
    return [random_report, audit]


def check_dominance(t_outer: int = 30, tolerance: float = 1e-12) -> OracleReport:
    """Robust group loss >= plain group loss at every recorded iteration of an ours run."""
    ds = toys.gaussian_groups(seed=6)
    cfg = TrainConfig(method="ours", t_outer=t_outer, robust=RobustConfig(1.0, 0.05, 20), seed=42)
    _, hist = train(ds, cfg)
    shortfall = float(np.max(hist.plain_losses - hist.losses))
    return OracleReport("robust_dominates_plain", shortfall, tolerance, t_outer * ds.n_groups)


def check_convex_toy(t_outer: int = 500, gamma: float = 1.0) -> list[OracleReport]:
    """Separable two-group toy with a linear model: worst-group accuracy 1 and final gap <= 10% of initial."""
    ds = toys.separable_two_groups(seed=0)
    out = []
    for method in ("gdro", "ours"):
        cfg = TrainConfig(method=method, t_outer=t_outer, robust=RobustConfig(gamma, 0.05, 100),
                          seed=42, linear=True)
        params, hist = train(ds, cfg)
        acc = evaluate(params, ds).worst_acc
        gaps = hist.gaps
        out.append(OracleReport(f"convex_toy_{method}_worst_acc_shortfall", 1.0 - acc, 0.0, ds.n))
        out.append(OracleReport(f"convex_toy_{method}_gap_ratio", float(gaps[-1] / gaps[0]), 0.1, len(gaps)))
    return out


def check_lipschitz(seed: int = 8) -> OracleReport:
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((50, 4))
    return lipschitz_spot_check(X, gamma=2.0, box=1.0, n_pairs=100, seed=seed)


def check_ascent_monotone(n: int = 50, seed: int = 9) -> OracleReport:
    """Linear score model, eta_z <= 1/gamma: phi never decreases along the ascent."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        d = int(rng.integers(1, 6))
        gamma = float(rng.uniform(0.5, 10))
        eta = float(rng.uniform(0.05, 1.0)) / gamma
        res = perturb_batch(linear_score_model(rng.standard_normal(d)), rng.standard_normal((3, d)),
                            np.zeros(3), RobustConfig(gamma, eta, 50), return_trace=True)
        worst = max(worst, float(np.max(res.trace[:-1] - res.trace[1:])))
    return OracleReport("ascent_monotone_linear", worst, 1e-9, n)


def run_checks(quick: bool = False) -> list[OracleReport]:
    scale = 5 if quick else 1
    reports = [
        check_gradients(n=50 // scale),
        check_closed_form(n=100 // scale),
        check_grid(n=20 // scale),
        *check_degenerations(),
        *check_mirror_ascent(n=1000 // scale),
        *check_kl_bound(n=1000 // scale),
        check_dominance(),
        *check_convex_toy(),
        check_lipschitz(),
        check_ascent_monotone(),
    ]
    return reports
