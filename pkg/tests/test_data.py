import numpy as np
import pytest

from conftest import EDUCATION
from wgdro import data
from wgdro.data import (
    DataFormatError,
    EnvironmentSpec,
    MissingCategoryError,
    RawTable,
)


def small_table():
    return RawTable(["race", "edu", "income"],
                    [["White", "A", ">50K"], ["Black", "B", "<=50K"], ["Asian-Pac-Islander", "A", ">50K."]])


def test_load_three_rows(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b\n1,x\n2,y\n\n3,z\n")
    t = data.load_csv(p)
    assert t.columns == ["a", "b"] and t.n_rows == 3


def test_load_ragged_row(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b\n1,x\n2\n")
    with pytest.raises(DataFormatError, match="line 3"):
        data.load_csv(p)


def test_load_headerless_with_banner(tmp_path):
    p = tmp_path / "adult.test"
    p.write_text("|1x3 Cross validator\n25, Private, >50K.\n")
    t = data.load_csv(p, ["age", "workclass", "income"])
    assert t.rows == [["25", "Private", ">50K."]]


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        data.load_csv(tmp_path / "nope.csv")


def test_drop_missing(synthetic_csv):
    t = data.load_csv(synthetic_csv)
    assert t.n_rows == 600
    assert data.drop_missing(t).n_rows == 590


def test_binarize_label():
    np.testing.assert_array_equal(data.binarize_label([">50K", "<=50K", ">50K."]), [1, 0, 1])
    with pytest.raises(DataFormatError):
        data.binarize_label(["a", "b", "c"])


def test_encode_first_appearance_and_constant_column():
    t = RawTable(["c", "k", "n", "income"], [["B", "z", "1", ">50K"], ["A", "z", "2", "<=50K"], ["B", "z", "3", ">50K"]])
    enc = data.encode_table(t)
    assert enc.categories["c"] == ["B", "A"]
    np.testing.assert_array_equal(enc.codes[:, 0], [0, 1, 0])
    ds = data.encode_and_standardize(t, "income", [0, 1, 2], education=None)
    np.testing.assert_array_equal(ds.X[:, 1], 0.0)
    np.testing.assert_allclose(ds.X[:, 2].mean(), 0.0, atol=1e-15)
    np.testing.assert_allclose(ds.X[:, 2].std(), 1.0)


def test_two_category_codes():
    t = RawTable(["c", "income"], [["A", ">50K"], ["B", "<=50K"], ["A", "<=50K"]])
    assert set(data.encode_table(t).codes[:, 0]) == {0.0, 1.0}


def test_scaler_fit_rows_only():
    t = RawTable(["n", "income"], [["0", ">50K"], ["2", "<=50K"], ["100", ">50K"]])
    ds = data.encode_and_standardize(t, "income", [0, 1], education=None)
    np.testing.assert_allclose(ds.X[:, 0], [-1.0, 1.0, 99.0])
    np.testing.assert_allclose(ds.scaler.inverse(ds.X), [[0.0], [2.0], [100.0]])


def test_assign_groups():
    np.testing.assert_array_equal(data.assign_groups(small_table(), "race", "income"), [0, 3, 4])
    t = RawTable(["race", "income"], [["Martian", "<=50K"]])
    np.testing.assert_array_equal(data.assign_groups(t), [5])


def test_random_split_partition():
    tr, te = data.random_split(100, 0.7, 3)
    assert len(tr) == 70 and len(te) == 30
    np.testing.assert_array_equal(np.sort(np.concatenate([tr, te])), np.arange(100))
    tr2, _ = data.random_split(100, 0.7, 3)
    np.testing.assert_array_equal(tr, tr2)
    with pytest.raises(ValueError):
        data.random_split(10, 1.0, 0)


@pytest.fixture
def splits(synthetic_csv):
    t = data.drop_missing(data.load_csv(synthetic_csv))
    return data.prepare_splits(t, seed=42)


def test_uniform_education(splits):
    names = splits.dataset.decode_education(splits.train_rows)
    counts = {c: names.count(c) for c in EDUCATION}
    assert len(set(counts.values())) == 1
    assert sum(counts.values()) == pytest.approx(len(splits.candidate_rows), abs=len(EDUCATION))
    assert set(splits.train_rows) <= set(splits.candidate_rows)
    assert not set(splits.candidate_rows) & set(splits.test_pool)


def test_scaler_fitted_on_candidates(splits):
    X = splits.dataset.X[splits.candidate_rows]
    np.testing.assert_allclose(X.mean(axis=0), 0.0, atol=1e-12)


def test_uniform_missing_category(splits):
    ds = splits.dataset
    edu = ds.education_values()
    cands = splits.candidate_rows[edu[splits.candidate_rows] != edu[splits.candidate_rows].max()]
    with pytest.raises(MissingCategoryError):
        data.uniformize_education(ds, cands, 0)


def test_stratified_subsample(splits):
    ds = splits.dataset
    rows = data.stratified_subsample(ds, splits.train_rows, 100, 42)
    assert len(rows) == 100
    full = np.bincount(ds.g[splits.train_rows], minlength=6) / len(splits.train_rows)
    sub = np.bincount(ds.g[rows], minlength=6) / 100
    assert np.all(np.abs(full - sub) <= 0.011)
    assert np.all(np.bincount(ds.g[rows], minlength=6) >= 1)
    np.testing.assert_array_equal(rows, data.stratified_subsample(ds, splits.train_rows, 100, 42))


def test_environment_counts(splits):
    ds = splits.dataset
    # the synthetic test pool is too small for 200 rows per environment
    pool = np.arange(ds.n)
    high = ds.education_values() > 0.5
    for p_high, size in [(0.5, 200), (0.9, 200)]:
        rows = data.make_education_environment(ds, pool, EnvironmentSpec(p_high, size, 0.5, 1))
        n_hi = int(high[rows].sum())
        assert len(rows) == size and n_hi == round(p_high * size)
        assert len(set(rows)) == len(rows)
        again = data.make_education_environment(ds, pool, EnvironmentSpec(p_high, size, 0.5, 1))
        np.testing.assert_array_equal(rows, again)


def test_environment_shrinks_when_bloc_short(splits):
    ds = splits.dataset
    pool = splits.test_pool
    n_high = int((ds.education_values()[pool] > 0.5).sum())
    rows = data.make_education_environment(ds, pool, EnvironmentSpec(0.9, 10 * len(pool), 0.5, 0))
    hi = int((ds.education_values()[rows] > 0.5).sum())
    assert hi <= n_high
    assert abs(hi / len(rows) - 0.9) < 0.02


def test_environment_natural_and_names(splits):
    rows = data.make_education_environment(splits.dataset, splits.test_pool, EnvironmentSpec())
    np.testing.assert_array_equal(rows, splits.test_pool)
    assert EnvironmentSpec().name == "natural"
    assert EnvironmentSpec(0.9).name == "high90-low10"
    with pytest.raises(ValueError):
        EnvironmentSpec(1.5)


def test_group_dataset_validation():
    with pytest.raises(DataFormatError):
        data.GroupedDataset(np.zeros((2, 1)), np.array([0, 1]), np.array([0, 7]), 2,
                            data.Scaler(np.zeros(1), np.ones(1)), ["x"])


def test_dump_dataset(splits, tmp_path):
    path = tmp_path / "d.csv"
    data.dump_dataset(splits.dataset, splits.test_pool[:3], path)
    lines = path.read_text().splitlines()
    assert len(lines) == 4 and lines[0].endswith(",y,g")
