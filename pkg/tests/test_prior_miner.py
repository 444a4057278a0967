import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import blob_dataset
from prism.dataset import Dataset
from prism.errors import DimensionMismatch, NoOppositeClass, TooFewFeatures
from prism.prior_miner import (
    OFFSET_EPSILON,
    LinearPrior,
    angle_grid,
    mine_pair,
    mine_prior,
    prior_satisfied,
)


def exhaustive_reference(X, y, target, angle_step=0.1):
    """Independent plain-loop re-search over pairs x angles.

    Same documented tie rules: smallest angle within a pair, then smallest
    (i, j) across pairs."""
    n = X.shape[1]
    best = None  # (support, i, j, phi, c)
    for i in range(1, n):
        for j in range(i + 1, n + 1):
            pair_best = None
            k = 0
            while True:
                phi = k * angle_step
                if phi >= 2 * math.pi - 1e-12:
                    break
                cos_p, sin_p = math.cos(phi), math.sin(phi)
                m = min(cos_p * X[r, i - 1] + sin_p * X[r, j - 1]
                        for r in range(len(y)) if y[r] != target)
                c = -m + OFFSET_EPSILON
                support = sum(
                    1 for r in range(len(y))
                    if y[r] == target
                    and cos_p * X[r, i - 1] + sin_p * X[r, j - 1] + c <= 0)
                if pair_best is None or support > pair_best[0]:
                    pair_best = (support, phi, c)
                k += 1
            if best is None or pair_best[0] > best[0]:
                best = (pair_best[0], i, j, pair_best[1], pair_best[2])
    return best


class TestAngleGrid:
    def test_sixty_three_points_at_default_step(self):
        g = angle_grid(0.1)
        assert len(g) == 63
        assert g[0] == 0.0 and g[-1] == pytest.approx(6.2)

    def test_two_pi_excluded(self):
        assert angle_grid(math.pi / 2).tolist() == pytest.approx(
            [0.0, math.pi / 2, math.pi, 3 * math.pi / 2])


class TestMinePair:
    def test_separable_on_one_feature(self):
        # positives low on feature 1, negatives high: full support achievable
        X = np.asarray([[0.1, 0.5], [0.15, 0.1], [0.2, 0.9],
                        [0.8, 0.2], [0.9, 0.6], [0.85, 0.4]])
        y = np.asarray([1, 1, 1, -1, -1, -1])
        r = mine_pair(Dataset(X, y), 1, 2, target=+1)
        assert r.support == 3

    def test_coinciding_classes_zero_support(self):
        X = np.asarray([[0.5, 0.5], [0.5, 0.5], [0.5, 0.5], [0.5, 0.5]])
        y = np.asarray([1, 1, -1, -1])
        r = mine_pair(Dataset(X, y), 1, 2, target=+1)
        assert r.support == 0
        assert r.degenerate

    def test_no_opposite_class(self):
        d = Dataset(np.zeros((3, 2)), np.asarray([1, 1, 1]))
        with pytest.raises(NoOppositeClass):
            mine_pair(d, 1, 2, target=+1)

    def test_matches_reference_eight_points(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(0, 1, (8, 2))
        y = np.asarray([1, 1, 1, 1, -1, -1, -1, -1])
        r = mine_pair(Dataset(X, y), 1, 2, target=+1)
        support, i, j, phi, c = exhaustive_reference(X, y, +1)
        assert (r.support, r.phi) == (support, pytest.approx(phi))
        assert r.c == pytest.approx(c, abs=1e-12)

    def test_opposite_class_strictly_above(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(0, 1, (20, 2))
        y = np.asarray([1, -1] * 10)
        r = mine_pair(Dataset(X, y), 1, 2, target=+1)
        vals = X[:, 0] * r.coef_i + X[:, 1] * r.coef_j + r.c
        assert (vals[y == -1] > 0).all()


class TestMinePrior:
    def test_two_features_single_pair(self):
        d = blob_dataset(seed=2, n_features=2)
        prior, report = mine_prior(d, +1)
        assert len(report.pairs) == 1
        assert (prior.i, prior.j) == (1, 2)

    def test_pair_count(self):
        d = blob_dataset(seed=3, n_features=4)
        _, report = mine_prior(d, +1)
        assert len(report.pairs) == 6  # 4*3/2

    def test_too_few_features(self):
        d = Dataset(np.asarray([[0.1], [0.9]]), np.asarray([1, -1]))
        with pytest.raises(TooFewFeatures):
            mine_prior(d, +1)

    def test_matches_reference_three_features(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(0, 1, (12, 3))
        y = np.asarray([1] * 6 + [-1] * 6)
        prior, _ = mine_prior(Dataset(X, y), +1)
        support, i, j, phi, c = exhaustive_reference(X, y, +1)
        assert (prior.support, prior.i, prior.j) == (support, i, j)
        assert prior.phi == pytest.approx(phi)

    def test_deterministic(self):
        d = blob_dataset(seed=5)
        a, _ = mine_prior(d, +1)
        b, _ = mine_prior(d, +1)
        assert a == b

    def test_best_support_is_max_over_pairs(self):
        d = blob_dataset(seed=6)
        prior, report = mine_prior(d, -1)
        assert prior.support == max(r.support for r in report.pairs)
        assert all(p.support == prior.support for p in report.best)

    def test_unit_norm_coefficients(self):
        d = blob_dataset(seed=7)
        for target in (+1, -1):
            prior, _ = mine_prior(d, target)
            assert math.hypot(prior.coef_i, prior.coef_j) == pytest.approx(1.0,
                                                                           abs=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 100_000))
    def test_grid_membership_and_hard_constraint(self, seed):
        rng = np.random.default_rng(seed)
        N = int(rng.integers(6, 25))
        X = rng.uniform(0, 1, (N, 3))
        y = rng.choice([1, -1], N)
        if (y == 1).all() or (y == -1).all():
            y[0] *= -1
        d = Dataset(X, y)
        for target in (+1, -1):
            prior, _ = mine_prior(d, target)
            # phi on the 0.1 grid
            k = round(prior.phi / 0.1)
            assert prior.phi == pytest.approx(k * 0.1, abs=1e-12)
            # opposite class strictly above the line
            vals = prior.line_values(X)
            assert (vals[y != target] > 0).all()
            # support counts exactly the satisfied target points
            sat = [prior_satisfied(X[r], prior) for r in range(N)]
            assert prior.support == sum(s and y[r] == target
                                        for r, s in enumerate(sat))

    def test_finer_grid_never_loses_support(self):
        d = blob_dataset(seed=8)
        coarse, _ = mine_prior(d, +1, angle_step=0.1)
        fine, _ = mine_prior(d, +1, angle_step=0.05)
        assert fine.support >= coarse.support


class TestPriorSatisfied:
    def _prior(self):
        return LinearPrior(i=1, j=2, phi=0.0, c=-0.5, target_class=1, support=0,
                           coef_i=1.0, coef_j=0.0)

    def test_boundary_inclusive(self):
        assert prior_satisfied(np.asarray([0.5, 0.9]), self._prior())

    def test_just_above_excluded(self):
        assert not prior_satisfied(np.asarray([0.5 + 1e-9, 0.9]), self._prior())

    def test_opposite_minimum_stays_outside(self):
        # the point whose projection set the offset is strictly above
        X = np.asarray([[0.1, 0.0], [0.4, 0.0], [0.45, 0.0], [0.9, 0.0]])
        y = np.asarray([1, 1, -1, -1])
        r = mine_pair(Dataset(X, y), 1, 2, target=+1)
        prior = LinearPrior(1, 2, r.phi, r.c, 1, r.support, r.coef_i, r.coef_j)
        assert not prior_satisfied(X[2], prior)

    def test_random_points_match_inline_inequality(self):
        rng = np.random.default_rng(9)
        p = LinearPrior(i=1, j=3, phi=2.8, c=0.335, target_class=-1, support=0,
                        coef_i=float(np.cos(2.8)), coef_j=float(np.sin(2.8)))
        for _ in range(50):
            x = rng.uniform(0, 1, 3)
            expected = p.coef_i * x[0] + p.coef_j * x[2] + p.c <= 0
            assert prior_satisfied(x, p) == expected

    def test_dimension_check(self):
        with pytest.raises(DimensionMismatch):
            prior_satisfied(np.asarray([0.5]), self._prior())


class TestSerializationAndRendering:
    def test_dict_round_trip(self):
        d = blob_dataset(seed=10)
        prior, _ = mine_prior(d, +1)
        again = LinearPrior.from_dict(json.loads(json.dumps(prior.to_dict())))
        assert again == prior

    def test_render_shape(self):
        p = LinearPrior(i=1, j=4, phi=5.4, c=-0.0156, target_class=1, support=13,
                        coef_i=0.6347, coef_j=-0.7728)
        text = p.render()
        assert text == "0.6347·x(1) − 0.7728·x(4) − 0.0156 ≤ 0 ⇒ y = +1"

    def test_render_negative_class(self):
        p = LinearPrior(i=3, j=5, phi=1.7, c=0.0025, target_class=-1, support=4,
                        coef_i=-0.1288, coef_j=0.9917)
        assert p.render() == "−0.1288·x(3) + 0.9917·x(5) + 0.0025 ≤ 0 ⇒ y = −1"
