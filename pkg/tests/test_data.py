import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from momentauc.data import (Dataset, DatasetConfig, ParseError, RawDataset, binarize, find_dataset,
                            fit_scaling, gaussian_stream, load_dataset, moons_stream, parse_libsvm,
                            scale_features, serialize_libsvm, shuffled_stream)


def test_parse_sparse_line_with_hint():
    raw = parse_libsvm("+1 1:0.5 3:-0.25\n", dimension_hint=3)
    assert raw.labels.tolist() == [1.0]
    np.testing.assert_array_equal(raw.X, [[0.5, 0.0, -0.25]])


def test_parse_label_only_line():
    raw = parse_libsvm(b"-1\n", dimension_hint=2)
    assert raw.labels.tolist() == [-1.0]
    np.testing.assert_array_equal(raw.X, [[0.0, 0.0]])


def test_parse_skips_blank_and_comments():
    raw = parse_libsvm("# header\n\n2 2:1 # trailing\n1 1:3\n")
    assert raw.X.shape == (2, 2) and raw.labels.tolist() == [2.0, 1.0]


@pytest.mark.parametrize("text,line", [
    ("1 2:abc\n", 1),
    ("1 1:1\nfoo 1:2\n", 2),
    ("1 1:1\n\n-1 3:1 2:1\n", 3),
    ("1 0:4\n", 1),
    ("1 2:1 2:3\n", 1),
    ("1 1-2\n", 1),
    ("1 1:nan\n", 1),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as exc:
        parse_libsvm(text)
    assert exc.value.line == line


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 6)),
              elements=st.one_of(st.just(0.0), st.floats(-1e6, 1e6, allow_subnormal=False))),
       st.data())
def test_serialize_parse_roundtrip(X, data):
    labels = data.draw(st.lists(st.sampled_from([1.0, -1.0, 2.0, 7.0]), min_size=X.shape[0],
                                max_size=X.shape[0]))
    raw = parse_libsvm(serialize_libsvm(X, labels), dimension_hint=X.shape[1])
    np.testing.assert_array_equal(raw.X, X)
    assert raw.labels.tolist() == labels


def test_binarize_auto_minority():
    labels = np.array([1.0] * 300 + [2.0] * 700)
    ds = binarize(RawDataset(np.zeros((1000, 1)), labels))
    assert ds.n_pos == 300 and np.all(ds.y[:300] == 1)
    assert ds.imbalance_ratio == pytest.approx(7 / 3)


def test_binarize_minority_is_positive_even_when_labelled_negative():
    labels = np.array([1.0] * 8 + [-1.0] * 2)
    ds = binarize(RawDataset(np.zeros((10, 1)), labels))
    assert ds.y.tolist() == [-1] * 8 + [1] * 2 and ds.imbalance_ratio == 4.0


def test_binarize_explicit_set():
    labels = np.array([1, 2, 3, 4, 5, 3, 4, 1], dtype=float)
    ds = binarize(RawDataset(np.zeros((8, 1)), labels), positive={3, 4})
    assert ds.y.tolist() == [-1, -1, 1, 1, -1, 1, 1, -1]


def test_binarize_multiclass_grouping():
    labels = np.array([1, 1, 2, 2, 2, 3, 3, 3, 3], dtype=float)
    ds = binarize(RawDataset(np.zeros((9, 1)), labels), group=[1, 2])
    assert ds.n_pos == 4 and np.all(ds.y[5:] == 1)
    with pytest.raises(ValueError):
        binarize(RawDataset(np.zeros((9, 1)), labels))


def test_binarize_errors():
    with pytest.raises(ValueError):
        binarize(RawDataset(np.zeros((3, 1)), np.ones(3)))
    with pytest.raises(ValueError):
        binarize(RawDataset(np.zeros((3, 1)), np.array([1.0, 2.0, 2.0])), positive={9})


def test_scale_examples():
    d = Dataset(np.array([[-2.0, 5.0], [0.0, 5.0], [2.0, 5.0]]), np.array([1, -1, -1]))
    out, params = scale_features(d)
    np.testing.assert_array_equal(out.X, [[-1, 0], [0, 0], [1, 0]])
    np.testing.assert_array_equal(params.lo, [-2, 5])
    np.testing.assert_array_equal(params.hi, [2, 5])


def test_scale_with_training_params_may_leave_range():
    train = Dataset(np.array([[0.0], [1.0]]), np.array([1, -1]))
    test = Dataset(np.array([[2.0]]), np.array([1]))
    _, params = scale_features(train)
    out, _ = scale_features(test, params)
    assert out.X[0, 0] == 3.0


def test_scale_empty_raises():
    with pytest.raises(ValueError):
        fit_scaling(np.zeros((0, 3)))


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 30), st.integers(1, 5)),
              elements=st.floats(-1e5, 1e5, allow_subnormal=False)))
def test_scale_range_and_idempotence(X):
    d = Dataset(X, np.where(np.arange(X.shape[0]) % 2 == 0, 1, -1))
    once, _ = scale_features(d)
    assert once.X.min() >= -1.0 and once.X.max() <= 1.0
    twice, _ = scale_features(once)
    np.testing.assert_allclose(twice.X, once.X, atol=1e-12)


def test_shuffled_stream_determinism_and_permutation():
    ds = gaussian_stream(100, 3, 0)
    a, b = shuffled_stream(ds, 11), shuffled_stream(ds, 11)
    np.testing.assert_array_equal(a.X, b.X)
    key = lambda d: sorted(map(tuple, np.c_[d.X, d.y]))
    assert key(a) == key(ds)
    c = shuffled_stream(ds, 12)
    assert not np.array_equal(a.X, c.X)


def test_dataset_invariants():
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), np.array([1, 0]))
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), np.array([1]))
    ds = Dataset(np.arange(6.0).reshape(3, 2), np.array([1, -1, -1]))
    inst = ds.instances()
    assert len(inst) == 3 and inst[1].y == -1 and ds.dim == 2
    np.testing.assert_array_equal(inst[2].x, [4.0, 5.0])


def test_load_and_find_dataset(tmp_path, monkeypatch):
    (tmp_path / "toy.txt").write_text("2 1:1 2:4\n1 1:3\n2 2:2\n")
    monkeypatch.setenv("MOMENTAUC_DATA", str(tmp_path))
    assert find_dataset("toy") == tmp_path / "toy.txt"
    assert find_dataset("absent") is None
    ds = load_dataset(DatasetConfig("toy.txt"))
    assert ds.y.tolist() == [-1, 1, -1] and ds.name == "toy"
    np.testing.assert_allclose(ds.X, [[-1 / 3, 1], [1, -1], [-1, 0]])


def test_synthetic_streams_shapes():
    g = gaussian_stream(500, 5, 0)
    assert g.X.shape == (500, 5) and np.all(np.linalg.norm(g.X, axis=1) <= 1 + 1e-12)
    m = moons_stream(300, 1)
    assert m.X.shape == (300, 2) and set(m.y.tolist()) == {1, -1}
    np.testing.assert_array_equal(moons_stream(300, 1).X, m.X)
