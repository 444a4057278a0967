import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prism.dataset import (
    Dataset,
    apply_minmax,
    fit_minmax,
    kfold,
    kfold_indices,
    parse_libsvm,
    scale_dataset,
    serialize_libsvm,
    split,
    split_indices,
)
from prism.errors import (
    BadK,
    DatasetError,
    DegenerateSplit,
    DimensionMismatch,
    EmptyDataset,
    MalformedLine,
    SingleClass,
)


class TestParse:
    def test_basic_two_samples(self):
        d = parse_libsvm("+1 1:0.5 3:2.0\n-1 2:1.0")
        assert len(d) == 2 and d.n == 3
        np.testing.assert_array_equal(d.X[0], [0.5, 0.0, 2.0])
        np.testing.assert_array_equal(d.X[1], [0.0, 1.0, 0.0])
        np.testing.assert_array_equal(d.y, [1, -1])

    def test_empty_input(self):
        with pytest.raises(EmptyDataset):
            parse_libsvm("")

    def test_blank_lines_skipped(self):
        d = parse_libsvm("\n+1 1:1\n\n-1 1:2\n\n")
        assert len(d) == 2

    def test_single_class(self):
        with pytest.raises(SingleClass):
            parse_libsvm("+1 1:1\n+1 1:2")

    def test_three_label_values_rejected(self):
        with pytest.raises(DatasetError):
            parse_libsvm("1 1:1\n2 1:2\n3 1:3")

    def test_larger_label_maps_to_positive(self):
        d = parse_libsvm("2 1:1\n4 1:2\n2 1:3")
        np.testing.assert_array_equal(d.y, [-1, 1, -1])
        assert d.label_mapping == {"+1": 4.0, "-1": 2.0}

    @pytest.mark.parametrize("text,line", [
        ("+1 1:abc", 1),
        ("+1 1:1\n-1 x:1", 2),
        ("wat 1:1", 1),
        ("+1 2:1 1:2", 1),       # indices must increase
        ("+1 1:1 1:2", 1),       # duplicates forbidden
        ("+1 0:1", 1),           # 1-based indices
        ("+1 1:inf", 1),
    ])
    def test_malformed_lines(self, text, line):
        with pytest.raises(MalformedLine) as err:
            parse_libsvm(text)
        assert err.value.line_no == line

    def test_line_order_preserved(self):
        d = parse_libsvm("-1 1:9\n+1 1:8")
        assert d.y[0] == -1 and d.X[0, 0] == 9.0


class TestSerialize:
    def test_round_trip_simple(self):
        d = parse_libsvm("+1 1:0.5 3:2.0\n-1 2:1.0")
        again = parse_libsvm(serialize_libsvm(d))
        np.testing.assert_array_equal(again.X, d.X)
        np.testing.assert_array_equal(again.y, d.y)

    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_round_trip_random(self, data):
        n = data.draw(st.integers(1, 5))
        rows = data.draw(st.integers(2, 8))
        finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
        X = np.asarray([[data.draw(finite) for _ in range(n)] for _ in range(rows)])
        y = np.asarray([1] + [-1] + [data.draw(st.sampled_from([1, -1]))
                                     for _ in range(rows - 2)])
        d = Dataset(X, y)
        again = parse_libsvm(serialize_libsvm(d))
        assert again.n == d.n
        np.testing.assert_array_equal(again.X, d.X)
        np.testing.assert_array_equal(again.y, d.y)


class TestScaling:
    def test_single_sample_min_equals_max(self):
        d = Dataset(np.asarray([[1.0, 2.0], [1.0, 2.0]]), np.asarray([1, -1]))
        p = fit_minmax(d)
        np.testing.assert_array_equal(p.min, p.max)

    def test_extrema(self):
        d = Dataset(np.asarray([[0.0, 10.0], [2.0, 20.0]]), np.asarray([1, -1]))
        p = fit_minmax(d)
        np.testing.assert_array_equal(p.min, [0.0, 10.0])
        np.testing.assert_array_equal(p.max, [2.0, 20.0])

    def test_min_maps_to_zero_max_to_one(self):
        d = Dataset(np.asarray([[0.0, 10.0], [2.0, 20.0]]), np.asarray([1, -1]))
        p = fit_minmax(d)
        np.testing.assert_array_equal(apply_minmax(np.asarray([0.0, 10.0]), p), [0, 0])
        np.testing.assert_array_equal(apply_minmax(np.asarray([2.0, 20.0]), p), [1, 1])

    def test_constant_feature_maps_to_zero(self):
        d = Dataset(np.asarray([[5.0, 1.0], [5.0, 3.0]]), np.asarray([1, -1]))
        p = fit_minmax(d)
        out = apply_minmax(np.asarray([5.0, 2.0]), p)
        assert out[0] == 0.0 and out[1] == 0.5

    def test_out_of_range_not_clipped(self):
        p = fit_minmax(Dataset(np.asarray([[0.0], [2.0]]), np.asarray([1, -1])))
        assert apply_minmax(np.asarray([3.0]), p)[0] == 1.5

    def test_dimension_mismatch(self):
        p = fit_minmax(Dataset(np.asarray([[0.0], [2.0]]), np.asarray([1, -1])))
        with pytest.raises(DimensionMismatch):
            apply_minmax(np.asarray([1.0, 2.0]), p)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_fit_then_apply_lands_in_unit_box(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(0, 10, (12, 3))
        d = Dataset(X, np.asarray([1, -1] * 6))
        scaled = scale_dataset(d, fit_minmax(d))
        assert scaled.X.min() >= 0.0 and scaled.X.max() <= 1.0


class TestSplit:
    def test_sizes_round_half_up(self):
        d = Dataset(np.arange(345 * 2, dtype=float).reshape(345, 2),
                    np.asarray([1, -1] * 172 + [1]))
        train, test = split(d, 0.7, seed=1)
        assert len(train) == 242 and len(test) == 103

    def test_same_seed_same_partition(self):
        a = split_indices(100, 0.7, seed=5)
        b = split_indices(100, 0.7, seed=5)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_different_seeds_differ(self):
        a = split_indices(100, 0.7, seed=1)
        b = split_indices(100, 0.7, seed=2)
        assert set(a[0].tolist()) != set(b[0].tolist())

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(4, 60))
    def test_partition_property(self, seed, n):
        tr, te = split_indices(n, 0.5, seed)
        assert sorted(tr.tolist() + te.tolist()) == list(range(n))

    def test_single_class_train_rejected(self):
        d = Dataset(np.zeros((4, 1)), np.asarray([1, 1, 1, -1]))
        # keep drawing: with 0.5 fraction some seeds put the lone -1 in test
        with pytest.raises(DegenerateSplit):
            for seed in range(64):
                split(d, 0.5, seed)

    def test_stratified_keeps_class_ratio(self):
        d = Dataset(np.zeros((40, 1)), np.asarray([1] * 10 + [-1] * 30))
        train, _ = split(d, 0.5, seed=3, stratified=True)
        assert train.n_pos == 5 and train.n_neg == 15


class TestKFold:
    def test_five_folds_of_two(self):
        folds = kfold_indices(10, 5, seed=0)
        vals = np.concatenate([v for _, v in folds])
        assert sorted(vals.tolist()) == list(range(10))
        assert all(len(v) == 2 for _, v in folds)

    def test_leave_one_out(self):
        folds = kfold_indices(6, 6, seed=0)
        assert all(len(v) == 1 for _, v in folds)

    def test_345_by_5_gives_69s(self):
        folds = kfold_indices(345, 5, seed=7)
        assert [len(v) for _, v in folds] == [69] * 5

    @pytest.mark.parametrize("k,n", [(1, 10), (11, 10), (0, 3)])
    def test_bad_k(self, k, n):
        with pytest.raises(BadK):
            kfold_indices(n, k, seed=0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(5, 40), st.integers(2, 5))
    def test_folds_disjoint_and_exhaustive(self, seed, n, k):
        folds = kfold_indices(n, k, seed)
        vals = np.concatenate([v for _, v in folds])
        assert sorted(vals.tolist()) == list(range(n))
        sizes = [len(v) for _, v in folds]
        assert max(sizes) - min(sizes) <= 1
        for tr, va in folds:
            assert not set(tr.tolist()) & set(va.tolist())
            assert sorted(tr.tolist() + va.tolist()) == list(range(n))

    def test_dataset_variant(self):
        d = Dataset(np.arange(20, dtype=float).reshape(10, 2), np.asarray([1, -1] * 5))
        for tr, va in kfold(d, 5, seed=1):
            assert len(tr) == 8 and len(va) == 2
