"""CSV ingestion, encoding, group construction and education-shift splits.

Pipeline for the Adult protocol (see :func:`prepare_splits`):

1. read the CSV and drop rows with missing markers;
2. label-encode categorical columns by first appearance over the whole table;
3. split rows at random into training candidates and a test pool;
4. z-score every feature with statistics of the natural training candidates;
5. resample the training candidates so that every education category is
   equally frequent (with replacement);
6. build test environments from the pool by thresholding the standardized
   education value.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

MISSING_MARKERS = ("?", "")
N_GROUPS = 6

# Independent RNG streams per purpose, all derived from the run seed.
_SPLIT_STREAM = 0
_UNIFORM_STREAM = 1
_SUBSAMPLE_STREAM = 2
_ENV_STREAM = 3


class DataFormatError(ValueError):
    pass


class MissingCategoryError(ValueError):
    pass


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), stream])


@dataclass(frozen=True)
class RawTable:
    columns: list[str]
    rows: list[list[str]]

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list[str]:
        try:
            j = self.columns.index(name)
        except ValueError:
            raise KeyError(f"column {name!r} not in table") from None
        return [r[j] for r in self.rows]

    def select(self, rows: Sequence[int]) -> "RawTable":
        return RawTable(self.columns, [self.rows[i] for i in rows])


def load_csv(path, column_names: Sequence[str] | None = None) -> RawTable:
    """Read a comma-separated file with a header row.

    When ``column_names`` is given the file is taken to have no header (as in
    the original UCI ``adult.data``). Blank lines are skipped; cells are
    whitespace-trimmed.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    rows: list[list[str]] = []
    header = list(column_names) if column_names is not None else None
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, raw in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in raw]
            if not any(cells):
                continue
            if header is None:
                header = cells
                continue
            if len(cells) == 1 and len(header) > 1 and cells[0].startswith("|"):
                continue  # adult.test carries a "|1x3 Cross validator" banner line
            if len(cells) != len(header):
                raise DataFormatError(
                    f"{path}: line {lineno} has {len(cells)} fields, expected {len(header)}"
                )
            rows.append(cells)
    if header is None:
        raise DataFormatError(f"{path}: missing header row")
    return RawTable(header, rows)


def drop_missing(table: RawTable, markers: Sequence[str] = MISSING_MARKERS) -> RawTable:
    marks = set(markers)
    kept = [r for r in table.rows if not any(c in marks for c in r)]
    logger.info("dropped %d rows with missing cells, %d remain", table.n_rows - len(kept), len(kept))
    return RawTable(table.columns, kept)


def binarize_label(values: Sequence[str], positive: str = ">50K") -> np.ndarray:
    # adult.test writes "<=50K." / ">50K." with a trailing period
    norm = [v.strip().rstrip(".") for v in values]
    distinct = set(norm)
    if len(distinct) > 2:
        raise DataFormatError(f"label column is not binary: {sorted(distinct)[:5]}")
    return np.array([1 if v == positive else 0 for v in norm], dtype=np.int64)


def _is_numeric(values: Sequence[str]) -> bool:
    try:
        for v in values:
            float(v)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class EncodedTable:
    """Numeric codes for every feature column, before standardization."""

    codes: np.ndarray                      # (N, d_in) float
    feature_names: list[str]
    categories: dict[str, list[str]]       # code -> category, for categorical columns
    y: np.ndarray


def encode_table(table: RawTable, label_column: str = "income", positive_label: str = ">50K") -> EncodedTable:
    if label_column not in table.columns:
        raise KeyError(f"label column {label_column!r} not in table")
    y = binarize_label(table.column(label_column), positive_label)
    names = [c for c in table.columns if c != label_column]
    cols = []
    categories: dict[str, list[str]] = {}
    for name in names:
        values = table.column(name)
        if _is_numeric(values):
            cols.append(np.array([float(v) for v in values]))
        else:
            lookup: dict[str, int] = {}
            for v in values:
                lookup.setdefault(v, len(lookup))
            categories[name] = list(lookup)
            cols.append(np.array([lookup[v] for v in values], dtype=np.float64))
    codes = np.column_stack(cols) if cols else np.zeros((table.n_rows, 0))
    return EncodedTable(codes, names, categories, y)


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Scaler":
        return cls(X.mean(axis=0), X.std(axis=0))

    def transform(self, X: np.ndarray) -> np.ndarray:
        safe = np.where(self.std > 0, self.std, 1.0)
        out = (X - self.mean) / safe
        out[:, self.std == 0] = 0.0
        return out

    def inverse(self, X: np.ndarray) -> np.ndarray:
        return X * self.std + self.mean


def assign_groups(table: RawTable, race_column: str = "race", label_column: str = "income",
                  positive_label: str = ">50K") -> np.ndarray:
    """Race bloc (White, Black, everything else) crossed with income.

    Ids: 0 White >50K, 1 White <=50K, 2 Black >50K, 3 Black <=50K,
    4 Other >50K, 5 Other <=50K.
    """
    race = table.column(race_column)
    y = binarize_label(table.column(label_column), positive_label)
    bloc = np.array([0 if r == "White" else 1 if r == "Black" else 2 for r in race], dtype=np.int64)
    return 2 * bloc + (1 - y)


@dataclass
class GroupedDataset:
    X: np.ndarray
    y: np.ndarray
    g: np.ndarray
    n_groups: int
    scaler: Scaler
    feature_names: list[str]
    categories: dict[str, list[str]] = field(default_factory=dict)
    education_column: int | None = None
    _group_index: list[np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if not (self.X.shape[0] == self.y.shape[0] == self.g.shape[0]):
            raise DataFormatError("X, y and g lengths differ")
        if self.g.size and (self.g.min() < 0 or self.g.max() >= self.n_groups):
            raise DataFormatError("group id out of range")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise DataFormatError("labels must be 0/1")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def group_index(self) -> list[np.ndarray]:
        if self._group_index is None:
            self._group_index = [np.flatnonzero(self.g == k) for k in range(self.n_groups)]
        return self._group_index

    def subset(self, rows) -> "GroupedDataset":
        rows = np.asarray(rows, dtype=np.int64)
        return GroupedDataset(self.X[rows], self.y[rows], self.g[rows], self.n_groups, self.scaler,
                              self.feature_names, self.categories, self.education_column)

    def education_values(self) -> np.ndarray:
        if self.education_column is None:
            raise MissingCategoryError("dataset has no education column")
        return self.X[:, self.education_column]

    def decode_education(self, rows=None) -> list[str]:
        """Category names of the education column (inverts standardization and encoding)."""
        j = self.education_column
        if j is None:
            raise MissingCategoryError("dataset has no education column")
        vals = self.X[:, j] if rows is None else self.X[np.asarray(rows), j]
        codes = np.rint(vals * self.scaler.std[j] + self.scaler.mean[j]).astype(int)
        cats = self.categories[self.feature_names[j]]
        return [cats[c] for c in codes]


def encode_and_standardize(table: RawTable, label_column: str, fit_rows, *,
                           positive_label: str = ">50K", groups: np.ndarray | None = None,
                           n_groups: int = N_GROUPS, education: str | None = "education") -> GroupedDataset:
    """Encode ``table`` and z-score each feature with statistics of ``fit_rows`` only."""
    enc = encode_table(table, label_column, positive_label)
    fit_rows = np.asarray(fit_rows, dtype=np.int64)
    if fit_rows.size == 0:
        raise ValueError("fit_rows is empty")
    scaler = Scaler.fit(enc.codes[fit_rows])
    X = scaler.transform(enc.codes)
    g = np.zeros(table.n_rows, dtype=np.int64) if groups is None else np.asarray(groups, dtype=np.int64)
    edu = enc.feature_names.index(education) if education in enc.feature_names else None
    return GroupedDataset(X, enc.y, g, n_groups if groups is not None else 1, scaler,
                          enc.feature_names, enc.categories, edu)


def random_split(n: int, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Random (training candidates, test pool) partition of ``range(n)``, each sorted."""
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    perm = _rng(seed, _SPLIT_STREAM).permutation(n)
    n_train = int(round(train_fraction * n))
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def uniformize_education(dataset: GroupedDataset, candidates, seed: int,
                         train_size: int | None = None) -> np.ndarray:
    """Resample ``candidates`` with replacement to a uniform education marginal.

    Every category present anywhere in ``dataset`` gets
    ``round(train_size / n_categories)`` rows; ``train_size`` defaults to the
    number of candidates.
    """
    candidates = np.asarray(candidates, dtype=np.int64)
    edu = dataset.education_values()
    categories = np.unique(edu)
    cand_edu = edu[candidates]
    size = len(candidates) if train_size is None else int(train_size)
    target = int(round(size / len(categories)))
    rng = _rng(seed, _UNIFORM_STREAM)
    picked = []
    for c in categories:
        pool = candidates[cand_edu == c]
        if pool.size == 0:
            name = dataset.decode_education([np.flatnonzero(edu == c)[0]])[0]
            raise MissingCategoryError(f"education category {name!r} absent from training candidates")
        picked.append(rng.choice(pool, size=target, replace=True))
    return np.concatenate(picked)


def make_uniform_education_split(dataset: GroupedDataset, train_fraction: float, seed: int,
                                 train_size: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(uniformized training rows, untouched test-pool rows)."""
    candidates, pool = random_split(dataset.n, train_fraction, seed)
    return uniformize_education(dataset, candidates, seed, train_size), pool


def stratified_subsample(dataset: GroupedDataset, rows, size: int, seed: int) -> np.ndarray:
    """Draw ``size`` of ``rows`` without replacement, allocated to groups proportionally.

    Largest-remainder allocation, with at least one row for every group that
    is present in ``rows``.
    """
    rows = np.asarray(rows, dtype=np.int64)
    if size >= len(rows):
        return rows.copy()
    g = dataset.g[rows]
    present = [k for k in range(dataset.n_groups) if np.any(g == k)]
    if size < len(present):
        raise ValueError(f"subsample of {size} cannot cover {len(present)} groups")
    counts = np.array([np.count_nonzero(g == k) for k in present], dtype=np.float64)
    quota = counts / counts.sum() * size
    alloc = np.maximum(np.floor(quota).astype(int), 1)
    while alloc.sum() < size:
        room = alloc < counts
        k = int(np.argmax(np.where(room, quota - alloc, -np.inf)))
        alloc[k] += 1
    while alloc.sum() > size:
        k = int(np.argmax(np.where(alloc > 1, alloc - quota, -np.inf)))
        alloc[k] -= 1
    rng = _rng(seed, _SUBSAMPLE_STREAM)
    picked = [rng.choice(rows[g == k], size=int(a), replace=False) for k, a in zip(present, alloc)]
    return np.concatenate(picked)


@dataclass(frozen=True)
class EnvironmentSpec:
    """A test environment drawn from the pool.

    ``p_high=None`` means the natural pool marginal (every pool row).
    """

    p_high: float | None = None
    size: int = 2000
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.p_high is not None and not 0 <= self.p_high <= 1:
            raise ValueError(f"p_high must be in [0, 1], got {self.p_high}")
        if self.size < 1:
            raise ValueError(f"size must be >= 1, got {self.size}")

    @property
    def name(self) -> str:
        if self.p_high is None:
            return "natural"
        hi = int(round(100 * self.p_high))
        return f"high{hi}-low{100 - hi}"


def make_education_environment(dataset: GroupedDataset, pool, spec: EnvironmentSpec) -> np.ndarray:
    """Rows of one environment, sampled without replacement from ``pool``.

    If a bloc cannot supply its share, the total is shrunk proportionally so
    the requested mix is kept; the shrink is logged.
    """
    pool = np.asarray(pool, dtype=np.int64)
    if spec.p_high is None:
        return pool.copy()
    edu = dataset.education_values()[pool]
    high = pool[edu > spec.threshold]
    low = pool[edu <= spec.threshold]
    if (spec.p_high > 0 and high.size == 0) or (spec.p_high < 1 and low.size == 0):
        raise MissingCategoryError(f"empty education bloc for environment {spec.name}")
    size = spec.size
    n_high = int(round(spec.p_high * size))
    if n_high > high.size or size - n_high > low.size:
        limits = []
        if spec.p_high > 0:
            limits.append(high.size / spec.p_high)
        if spec.p_high < 1:
            limits.append(low.size / (1 - spec.p_high))
        size = int(np.floor(min(limits)))
        n_high = min(int(round(spec.p_high * size)), high.size)
        size = min(size, n_high + low.size)
        logger.warning("environment %s shrunk from %d to %d rows", spec.name, spec.size, size)
    rng = _rng(spec.seed, _ENV_STREAM)
    chosen_high = rng.choice(high, size=n_high, replace=False)
    chosen_low = rng.choice(low, size=size - n_high, replace=False)
    return np.concatenate([chosen_high, chosen_low])


@dataclass
class PreparedSplits:
    dataset: GroupedDataset
    train_rows: np.ndarray
    test_pool: np.ndarray
    candidate_rows: np.ndarray

    @property
    def train(self) -> GroupedDataset:
        return self.dataset.subset(self.train_rows)


def prepare_splits(table: RawTable, *, seed: int, train_fraction: float = 0.7,
                   subsample: int | None = None, label_column: str = "income",
                   race_column: str = "race", education: str = "education",
                   positive_label: str = ">50K") -> PreparedSplits:
    """Run the full split construction for one seed on an already cleaned table."""
    groups = assign_groups(table, race_column, label_column, positive_label)
    candidates, _ = random_split(table.n_rows, train_fraction, seed)
    ds = encode_and_standardize(table, label_column, candidates, positive_label=positive_label,
                                groups=groups, education=education)
    train_rows, pool = make_uniform_education_split(ds, train_fraction, seed)
    if subsample is not None:
        train_rows = stratified_subsample(ds, train_rows, subsample, seed)
    return PreparedSplits(ds, train_rows, pool, candidates)


def dump_dataset(dataset: GroupedDataset, rows, path) -> None:
    """Write standardized features with ``y`` and ``g`` columns."""
    rows = np.asarray(rows, dtype=np.int64)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*dataset.feature_names, "y", "g"])
        for i in rows:
            w.writerow([*(f"{v:.17g}" for v in dataset.X[i]), int(dataset.y[i]), int(dataset.g[i])])
