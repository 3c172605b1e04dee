"""Small synthetic grouped datasets for checks and tests."""
from __future__ import annotations

import numpy as np

from .data import GroupedDataset, Scaler


def grouped(X, y, g, n_groups: int | None = None) -> GroupedDataset:
    X = np.asarray(X, dtype=np.float64)
    g = np.asarray(g, dtype=np.int64)
    n_groups = int(g.max()) + 1 if n_groups is None else n_groups
    d = X.shape[1]
    return GroupedDataset(X, np.asarray(y, dtype=np.int64), g, n_groups,
                          Scaler(np.zeros(d), np.ones(d)), [f"x{j}" for j in range(d)])


def separable_two_groups(seed: int = 0, per_group: int = 100) -> GroupedDataset:
    """Two groups in 2-D, labelled by the sign of the first coordinate.

    The classes are kept at least 1 apart along that coordinate, so the data
    are linearly separable with margin 1. Group 0 lies far from the boundary
    (``|x1|`` in [2, 4]) and group 1 close to it (``|x1|`` in [0.5, 1]). Both
    groups are label balanced, so at a random initialisation the far group has
    the larger loss whatever the sign of the weights, while after training the
    near group is the harder one.
    """
    rng = np.random.default_rng(seed)
    xs, ys, gs = [], [], []
    for grp, (centre, spread) in enumerate([(1.5, (2.0, 4.0)), (-1.5, (0.5, 1.0))]):
        sign = np.where(rng.random(per_group) < 0.5, -1.0, 1.0)
        x1 = sign * rng.uniform(*spread, per_group)
        x2 = centre + 0.5 * rng.standard_normal(per_group)
        xs.append(np.column_stack([x1, x2]))
        ys.append((sign > 0).astype(np.int64))
        gs.append(np.full(per_group, grp))
    return grouped(np.vstack(xs), np.concatenate(ys), np.concatenate(gs), 2)


def gaussian_groups(seed: int = 0, n_groups: int = 3, per_group: int = 20, d: int = 3) -> GroupedDataset:
    """Noisy labelled Gaussian blobs, one shifted mean per group."""
    rng = np.random.default_rng(seed)
    xs, ys, gs = [], [], []
    w = rng.standard_normal(d)
    for k in range(n_groups):
        X = rng.standard_normal((per_group, d)) + rng.standard_normal(d)
        y = (X @ w + 0.5 * rng.standard_normal(per_group) > 0).astype(np.int64)
        xs.append(X)
        ys.append(y)
        gs.append(np.full(per_group, k))
    return grouped(np.vstack(xs), np.concatenate(ys), np.concatenate(gs), n_groups)
