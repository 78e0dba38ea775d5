import os

import numpy as np
import pytest

from tabattr import tabular
from _fixtures import make_adult_like_csv, make_credit_like_csv


@pytest.fixture(scope="module")
def adult_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("adult") / "adult.csv"
    make_adult_like_csv(path, n_rows=3000, seed=1)
    return path


@pytest.fixture(scope="module")
def credit_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("credit") / "credit.csv"
    make_credit_like_csv(path, n_rows=1500, seed=1)
    return path


def test_schema_validation():
    with pytest.raises(ValueError):
        tabular.TableSchema(columns=[("a", "numeric"), ("b", "numeric")])
    with pytest.raises(ValueError):
        tabular.TableSchema(columns=[("a", "widget"), ("y", "label")])


def test_load_csv_flags_sentinel_rows(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("x,cat,y\n1.0,a,0\n2.0,?,1\n3.0,b,0\n")
    schema = tabular.TableSchema(columns=[("x", "numeric"), ("cat", "categorical"),
                                          ("y", "label")])
    table = tabular.load_csv(path, schema)
    assert table.n_rows == 3
    assert np.array_equal(table.flagged, [False, True, False])
    clean = table.clean()
    assert clean.n_rows == 2
    assert np.array_equal(clean.columns["x"], [1.0, 3.0])


def test_load_csv_header_mismatch(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("x,z\n1,2\n")
    schema = tabular.TableSchema(columns=[("x", "numeric"), ("y", "label")])
    with pytest.raises(tabular.SchemaError, match="y"):
        tabular.load_csv(path, schema)


def test_load_csv_extra_columns_ignored(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("ID,x,y\n7,1.5,0\n8,2.5,1\n")
    schema = tabular.TableSchema(columns=[("x", "numeric"), ("y", "label")])
    table = tabular.load_csv(path, schema)
    assert set(table.columns) == {"x", "y"}


def test_load_csv_bad_numeric_cell(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("x,y\n1.0,0\noops,1\n")
    schema = tabular.TableSchema(columns=[("x", "numeric"), ("y", "label")])
    with pytest.raises(tabular.CsvParseError) as err:
        tabular.load_csv(path, schema)
    assert err.value.row == 2


def test_load_csv_roundtrip(tmp_path):
    values = np.array([1.25, -3.5, 0.001953125, 12345.678901234567])
    path = tmp_path / "t.csv"
    lines = ["x,y"] + [f"{v:.17g},0" for v in values]
    path.write_text("\n".join(lines) + "\n")
    schema = tabular.TableSchema(columns=[("x", "numeric"), ("y", "label")])
    table = tabular.load_csv(path, schema)
    assert np.max(np.abs(table.columns["x"] - values)) < 1e-12


def test_one_hot_groups():
    values = np.array(["b", "a", "b", "c"], dtype=object)
    block, vocab = tabular.one_hot(values)
    assert vocab == ["a", "b", "c"]
    assert np.all(block.sum(axis=1) == 1.0)
    assert block[0, 1] == 1.0 and block[1, 0] == 1.0


def test_preprocess_adult_fixture(adult_csv):
    raw = tabular.load_csv(adult_csv, tabular.ADULT_SCHEMA)
    with pytest.warns(tabular.EncodingMismatchWarning):
        train_ds, test_ds = tabular.preprocess_adult(raw, seed=0)
    n = len(train_ds.X) + len(test_ds.X)
    assert n == int(np.sum(~raw.flagged))
    assert abs(len(test_ds.X) / n - 0.2) < 0.01
    assert np.all((train_ds.y == 0) | (train_ds.y == 1))
    # age is the first encoded column; standardised on train
    assert abs(train_ds.X[:, 0].mean()) < 1e-9
    assert train_ds.informative_mask is None
    assert train_ds.ground_truth is None
    # stratification: label ratio preserved within a percent
    ratio_tr = train_ds.y.mean()
    ratio_te = test_ds.y.mean()
    assert abs(ratio_tr - ratio_te) < 0.02


def test_preprocess_adult_one_hot_exclusive(adult_csv):
    raw = tabular.load_csv(adult_csv, tabular.ADULT_SCHEMA)
    with pytest.warns(tabular.EncodingMismatchWarning):
        train_ds, _ = tabular.preprocess_adult(raw, seed=0)
    table = raw.clean()
    _, names = tabular._encode_features(table)
    for col, _kind in tabular.ADULT_SCHEMA.feature_columns:
        group = [i for i, nm in enumerate(names) if nm.startswith(col + "=")]
        if group:
            # group columns were left as 0/1 (unscaled), one hot per row
            rows = train_ds.X[:, group]
            assert np.all(rows.sum(axis=1) == 1.0)


def test_preprocess_adult_splits_deterministic(adult_csv):
    raw = tabular.load_csv(adult_csv, tabular.ADULT_SCHEMA)
    with pytest.warns(tabular.EncodingMismatchWarning):
        a_train, _ = tabular.preprocess_adult(raw, seed=3)
    with pytest.warns(tabular.EncodingMismatchWarning):
        b_train, _ = tabular.preprocess_adult(raw, seed=3)
    assert np.array_equal(a_train.X, b_train.X)


def test_preprocess_credit_fixture(credit_csv):
    raw = tabular.load_csv(credit_csv, tabular.CREDIT_SCHEMA)
    train_ds, test_ds = tabular.preprocess_credit(raw, seed=0)
    assert train_ds.X.shape[1] == 23
    n = len(train_ds.X) + len(test_ds.X)
    assert abs(len(test_ds.X) / n - 0.2) < 0.01
    assert set(np.unique(train_ds.y).tolist()) <= {0, 1}
    assert np.max(np.abs(train_ds.X.mean(axis=0))) < 1e-9


@pytest.mark.skipif("TABATTR_ADULT_CSV" not in os.environ,
                    reason="real census file not provided")
def test_preprocess_adult_real_file_reference_counts():
    raw = tabular.load_csv(os.environ["TABATTR_ADULT_CSV"], tabular.ADULT_SCHEMA)
    train_ds, test_ds = tabular.preprocess_adult(raw, seed=0)
    n = len(train_ds.X) + len(test_ds.X)
    assert n == 45222
    assert len(train_ds.X) == 36177 and len(test_ds.X) == 9045
    assert train_ds.X.shape[1] == tabular.ADULT_EXPECTED_FEATURES
