import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wgdro import model, toys
from wgdro.metrics import evaluate
from wgdro.robust import EmptyGroupError, RobustConfig
from wgdro.trainer import (
    TrainConfig,
    descent_step,
    duality_gap,
    mirror_ascent_step,
    train,
)
from wgdro.verification import training_kl_audit


def test_mirror_equal_losses_unchanged():
    q = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(mirror_ascent_step(q, [1.0, 1.0, 1.0], 0.7), q, atol=1e-15)


def test_mirror_closed_form():
    np.testing.assert_allclose(mirror_ascent_step([0.5, 0.5], [1.0, 0.0], 1.0),
                               [np.e / (1 + np.e), 1 / (1 + np.e)], atol=1e-12)
    np.testing.assert_allclose(mirror_ascent_step([0.5, 0.5], [1.0, 0.0], 1.0), [0.731059, 0.268941], atol=1e-6)


@given(st.lists(st.floats(0, 50), min_size=1, max_size=8), st.floats(1e-3, 5.0), st.integers(0, 2**31))
def test_mirror_simplex(losses, eta, seed):
    q = np.random.default_rng(seed).dirichlet(np.ones(len(losses)))
    new = mirror_ascent_step(q, losses, eta)
    assert abs(new.sum() - 1) <= 1e-12
    assert np.all(new > 0)


@given(st.lists(st.floats(0, 5), min_size=2, max_size=6), st.floats(-100, 100))
def test_mirror_shift_invariance(losses, c):
    q = np.full(len(losses), 1 / len(losses))
    np.testing.assert_allclose(mirror_ascent_step(q, np.array(losses) + c, 0.5),
                               mirror_ascent_step(q, losses, 0.5), atol=1e-12)


def test_mirror_nonfinite_names_group():
    with pytest.raises(ValueError, match="group 1"):
        mirror_ascent_step([0.5, 0.5], [1.0, np.nan], 0.1)


def test_descent_step():
    p = model.init_params(0, 3, linear=True)
    zero = model.zeros_like(p)
    np.testing.assert_array_equal(descent_step(p, [1.0], [zero], 0.1).flatten(), p.flatten())
    rng = np.random.default_rng(0)
    g1 = p.unflatten(rng.standard_normal(p.size))
    g2 = p.unflatten(rng.standard_normal(p.size))
    np.testing.assert_allclose(descent_step(p, [1.0], [g1], 0.1).flatten(), p.flatten() - 0.1 * g1.flatten())
    out = descent_step(p, [0.25, 0.75], [g1, g2], 0.1).flatten()
    np.testing.assert_allclose(out, p.flatten() - 0.1 * (0.25 * g1.flatten() + 0.75 * g2.flatten()), rtol=1e-15)


def test_duality_gap():
    assert duality_gap([1.0, 1.0, 1.0], np.full(3, 1 / 3)) == pytest.approx(0.0, abs=1e-15)
    assert duality_gap([0.2, 0.9, 0.4], [0.0, 1.0, 0.0]) == 0.0
    assert duality_gap([2.0, 0.0], [0.5, 0.5]) == 1.0


def test_zero_iterations_returns_init():
    ds = toys.gaussian_groups()
    params, hist = train(ds, TrainConfig(method="ours", t_outer=0, seed=11))
    np.testing.assert_array_equal(params.flatten(), model.init_params(11, ds.X.shape[1]).flatten())
    assert len(hist) == 0


def test_initial_weights_are_group_frequencies():
    ds = toys.grouped(np.zeros((5, 1)), [0, 1, 0, 1, 0], [0, 0, 1, 1, 1], 2)
    _, hist = train(ds, TrainConfig(method="gdro", t_outer=1))
    np.testing.assert_allclose(hist.q_init, [0.4, 0.6])


def test_erm_and_dro_keep_single_weight():
    ds = toys.gaussian_groups()
    for method in ("erm", "dro"):
        _, hist = train(ds, TrainConfig(method=method, t_outer=3, robust=RobustConfig(1.0, 0.05, 5)))
        np.testing.assert_array_equal(hist.q, np.ones((3, 1)))
        np.testing.assert_array_equal(hist.gaps, 0.0)


def test_empty_group_rejected():
    ds = toys.grouped(np.zeros((4, 2)), [0, 1, 0, 1], [0, 0, 2, 2], 3)
    with pytest.raises(EmptyGroupError, match="group 1"):
        train(ds, TrainConfig(method="gdro", t_outer=1))


def test_deterministic():
    ds = toys.gaussian_groups(seed=2)
    cfg = TrainConfig(method="ours", t_outer=5, robust=RobustConfig(1.0, 0.05, 10))
    a, ha = train(ds, cfg)
    b, hb = train(ds, cfg)
    np.testing.assert_array_equal(a.flatten(), b.flatten())
    np.testing.assert_array_equal(ha.q, hb.q)


def test_robust_dominates_plain_each_iteration():
    ds = toys.gaussian_groups(seed=4)
    _, hist = train(ds, TrainConfig(method="ours", t_outer=20, robust=RobustConfig(0.5, 0.05, 15)))
    assert np.all(hist.losses >= hist.plain_losses - 1e-12)


def test_gdro_plain_equals_robust():
    ds = toys.gaussian_groups(seed=4)
    _, hist = train(ds, TrainConfig(method="gdro", t_outer=5))
    np.testing.assert_array_equal(hist.losses, hist.plain_losses)


def test_separable_toy_gdro():
    ds = toys.separable_two_groups()
    assert ds.n == 200 and np.bincount(ds.g).tolist() == [100, 100]
    params, hist = train(ds, TrainConfig(method="gdro", t_outer=500, linear=True))
    assert evaluate(params, ds).worst_acc == 1.0
    assert hist.gaps[-1] <= 0.1 * hist.gaps[0]


def test_separable_toy_margin():
    ds = toys.separable_two_groups()
    x1 = ds.X[:, 0]
    assert x1[ds.y == 1].min() - x1[ds.y == 0].max() >= 1.0


def test_kl_audit_on_runs():
    ds = toys.separable_two_groups()
    _, hist = train(ds, TrainConfig(method="gdro", t_outer=100, linear=True))
    rep = training_kl_audit(hist)
    assert rep.passed and rep.tolerance > 0
    _, single = train(ds, TrainConfig(method="erm", t_outer=5, linear=True))
    rep = training_kl_audit(single)
    assert rep.passed and rep.max_error == 0.0


def test_constant_q_when_losses_equal():
    # two identical groups give equal losses, so q never moves
    X = np.array([[1.0, 0.0], [-1.0, 0.5]])
    ds = toys.grouped(np.vstack([X, X]), [1, 0, 1, 0], [0, 0, 1, 1], 2)
    _, hist = train(ds, TrainConfig(method="gdro", t_outer=10))
    np.testing.assert_allclose(hist.q, 0.5, atol=1e-15)
    assert training_kl_audit(hist).max_error <= 1e-15


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(method="sgd")
    with pytest.raises(ValueError):
        TrainConfig(eta_theta=0)
    with pytest.raises(ValueError):
        TrainConfig(t_outer=-1)
