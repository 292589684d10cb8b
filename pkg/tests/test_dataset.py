import numpy as np
import pytest

from sharpssl.dataset import (
    LabeledDataset,
    drop_collinear,
    from_arrays,
    load_column,
    load_csv,
    standardize,
    to_csv,
)
from sharpssl.errors import (
    DataError,
    InconsistentWidth,
    LabelOutOfRange,
    NotFinite,
    ParseError,
    ZeroVarianceColumn,
)


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_three_rows(tmp_path):
    ds = load_csv(write(tmp_path, "a,b,label\n1,2,1\n3,4,2\n5,6,0\n"))
    assert (ds.n, ds.p, ds.n_labeled, ds.K) == (3, 2, 2, 2)
    assert ds.feature_names == ("a", "b")
    assert ds.gamma == pytest.approx(2 / 3)


def test_no_label_column(tmp_path):
    ds = load_csv(write(tmp_path, "a,b\n1,2\n3,4\n"), label_column="none")
    assert np.all(ds.y == 0) and ds.n_unlabeled == 2


def test_colon_shape(tmp_path, rng):
    x = rng.standard_normal((62, 10))
    y = np.r_[np.ones(40, int), np.full(22, 2)]
    lines = [",".join([f"g{j}" for j in range(10)] + ["label"])]
    lines += [",".join([repr(float(v)) for v in row] + [str(lab)]) for row, lab in zip(x, y)]
    ds = load_csv(write(tmp_path, "\n".join(lines) + "\n"))
    assert ds.n_labeled == 62 and ds.gamma == 1.0 and ds.p == 10
    assert np.array_equal(ds.x, x)


def test_unlabeled_token_and_blank(tmp_path):
    ds = load_csv(write(tmp_path, "a,label\n1,?\n2,\n3,2\n"), unlabeled_token="?")
    assert ds.y.tolist() == [0, 0, 2]


def test_parse_errors_report_location(tmp_path):
    with pytest.raises(ParseError, match=r"row 3.*'b'"):
        load_csv(write(tmp_path, "a,b,label\n1,2,1\n1,x,1\n"))
    with pytest.raises(InconsistentWidth, match="row 2"):
        load_csv(write(tmp_path, "a,b,label\n1,2\n"))
    with pytest.raises(LabelOutOfRange):
        load_csv(write(tmp_path, "a,label\n1,3\n"), K=2)
    with pytest.raises(LabelOutOfRange):
        load_csv(write(tmp_path, "a,label\n1,-1\n"))
    with pytest.raises(NotFinite):
        load_csv(write(tmp_path, "a,label\nnan,1\n"))
    with pytest.raises(ParseError):
        load_csv(write(tmp_path, ""))


def test_roundtrip_and_truth_column(tmp_path, rng):
    ds = from_arrays(rng.standard_normal((7, 3)), [1, 0, 2, 0, 3, 1, 0])
    path = tmp_path / "rt.csv"
    to_csv(ds, path)
    back = load_csv(path)
    assert back.equals(ds)
    text = path.read_text().splitlines()
    text = [text[0] + ",truth"] + [row + ",1" for row in text[1:]]
    path.write_text("\n".join(text) + "\n")
    sub = load_csv(path, exclude=("truth",))
    assert sub.p == 3
    assert load_column(path, "truth").tolist() == [1] * 7


def test_dataset_validation():
    with pytest.raises(DataError):
        LabeledDataset(np.zeros((3, 2)), np.array([0, 1]), 2)
    with pytest.raises(DataError):
        LabeledDataset(np.zeros((2, 2)), np.array([0, 3]), 2)
    ds = LabeledDataset(np.zeros((2, 2)), np.array([0, 1]), 2)
    with pytest.raises(ValueError):
        ds.x[0, 0] = 1.0


def test_standardize_examples(rng):
    ds, mean, sd = standardize(from_arrays(np.array([[1.0], [2.0], [3.0]])))
    assert np.allclose(ds.x.ravel(), [-1, 0, 1]) and mean[0] == 2 and sd[0] == 1
    again, _, _ = standardize(ds)
    assert np.max(np.abs(again.x - ds.x)) <= 1e-12
    raw = from_arrays(rng.normal(3, 5, size=(20, 4)))
    z, _, _ = standardize(raw)
    assert np.allclose(z.x.mean(axis=0), 0, atol=1e-12)
    assert np.allclose(z.x.var(axis=0, ddof=1), 1, atol=1e-12)


def test_standardize_zero_variance():
    x = np.c_[np.arange(4.0), np.ones(4)]
    with pytest.raises(ZeroVarianceColumn) as err:
        standardize(from_arrays(x))
    assert err.value.column == 1


def test_drop_collinear(rng):
    x = rng.standard_normal((10, 4))
    ds, dropped = drop_collinear(from_arrays(np.c_[x, x[:, 2]]))
    assert dropped == [4] and ds.p == 4
    ds, dropped = drop_collinear(from_arrays(np.eye(5)))
    assert dropped == []
    y = np.c_[x, x[:, 0] + x[:, 1]]
    ds, dropped = drop_collinear(from_arrays(y))
    assert dropped == [4]
    # Gram-matrix rank oracle
    eig = np.linalg.eigvalsh(y.T @ y)
    assert int(np.sum(eig > 1e-9 * eig.max())) == ds.p
    assert np.array_equal(ds.x, x)


def test_drop_collinear_leaves_full_rank(rng):
    base = rng.standard_normal((15, 4))
    x = np.c_[base, base @ rng.standard_normal((4, 3)), base[:, :1]]
    ds, dropped = drop_collinear(from_arrays(x), tol=1e-8)
    assert ds.p == 4 and len(dropped) == 4
    assert np.linalg.eigvalsh(ds.x.T @ ds.x).min() > 0
