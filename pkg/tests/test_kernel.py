import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prism.errors import DimensionMismatch, PrismError
from prism.kernel import KernelConfig, cross_gram, eval_kernel, gram

RBF1 = KernelConfig("rbf", 1.0)


class TestEval:
    def test_same_point_is_one(self):
        x = np.asarray([0.3, 0.7])
        for sigma in (0.1, 1.0, 50.0):
            assert eval_kernel(x, x, KernelConfig("rbf", sigma)) == 1.0

    def test_unit_distance_sigma_one(self):
        v = eval_kernel(np.asarray([0.0, 0.0]), np.asarray([1.0, 0.0]), RBF1)
        assert v == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_wide_kernel_approaches_one_monotonically(self):
        x, z = np.asarray([0.1, 0.2]), np.asarray([0.9, 0.4])
        vals = [eval_kernel(x, z, KernelConfig("rbf", s)) for s in (1, 2, 4, 8, 64)]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        assert vals[-1] == pytest.approx(1.0, abs=1e-3)

    def test_linear_is_dot(self):
        assert eval_kernel(np.asarray([1.0, 2.0]), np.asarray([3.0, 4.0]),
                           KernelConfig("linear")) == 11.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            eval_kernel(np.zeros(2), np.zeros(3), RBF1)

    def test_bad_sigma(self):
        with pytest.raises(PrismError):
            KernelConfig("rbf", 0.0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 100_000))
    def test_symmetry_and_range(self, seed):
        rng = np.random.default_rng(seed)
        x, z = rng.uniform(0, 1, 3), rng.uniform(0, 1, 3)
        sigma = float(rng.uniform(0.2, 4.0))
        cfg = KernelConfig("rbf", sigma)
        v = eval_kernel(x, z, cfg)
        assert v == eval_kernel(z, x, cfg)
        assert 0.0 < v <= 1.0
        assert (v == 1.0) == bool(np.all(x == z))


class TestGram:
    def test_single_point(self):
        K = gram(np.asarray([[0.5, 0.5]]), RBF1)
        np.testing.assert_array_equal(K.entries, [[1.0]])

    def test_two_identical_points_all_ones(self):
        K = gram(np.asarray([[0.2, 0.8], [0.2, 0.8]]), RBF1)
        np.testing.assert_array_equal(K.entries, np.ones((2, 2)))

    def test_matches_per_entry_eval(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(0, 1, (3, 2))
        K = gram(X, RBF1).entries
        for i in range(3):
            for j in range(3):
                assert K[i, j] == pytest.approx(eval_kernel(X[i], X[j], RBF1),
                                                abs=1e-12)

    def test_bitwise_symmetric(self):
        rng = np.random.default_rng(11)
        X = rng.uniform(0, 1, (17, 5))
        for cfg in (RBF1, KernelConfig("linear")):
            K = gram(X, cfg).entries
            assert np.array_equal(K, K.T)

    def test_rbf_diagonal_exactly_one(self):
        rng = np.random.default_rng(4)
        K = gram(rng.uniform(0, 1, (9, 3)), KernelConfig("rbf", 0.7)).entries
        assert np.all(np.diag(K) == 1.0)
        assert np.all(K > 0) and np.all(K <= 1.0)

    def test_positive_semidefinite(self):
        rng = np.random.default_rng(5)
        for sigma in (0.3, 1.0, 8.0):
            K = gram(rng.uniform(0, 1, (12, 4)), KernelConfig("rbf", sigma)).entries
            assert np.linalg.eigvalsh(K).min() >= -1e-8

    def test_cross_gram_matches_eval(self):
        rng = np.random.default_rng(6)
        A, B = rng.uniform(0, 1, (4, 3)), rng.uniform(0, 1, (5, 3))
        C = cross_gram(A, B, RBF1)
        assert C.shape == (4, 5)
        for i in range(4):
            for j in range(5):
                assert C[i, j] == pytest.approx(eval_kernel(A[i], B[j], RBF1),
                                                abs=1e-12)

    def test_gram_immutable(self):
        K = gram(np.asarray([[0.0], [1.0]]), RBF1)
        with pytest.raises(ValueError):
            K.entries[0, 0] = 5.0
