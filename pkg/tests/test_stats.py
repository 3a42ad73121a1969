"""Correlation and summary statistics against brute-force oracles."""

import numpy as np
import pytest

from oracles import pearson_textbook, ranks_mean_ties, spearman_textbook
from ticnn.stats import DegenerateInputError, mean_std, pearson, rank_average, spearman


class TestPearson:
    def test_perfect_positive(self):
        x = np.arange(10.0)
        assert pearson(x, x) == 1.0

    def test_perfect_negative(self):
        x = np.arange(10.0)
        assert pearson(x, -x + 5.0) == -1.0

    def test_hand_value(self):
        r = pearson([1.0, 2.0, 3.0], [1.0, 2.0, 4.0])
        assert abs(r - 0.981) < 1e-3

    def test_positive_affine_invariance(self, rng):
        x = rng.normal(size=25)
        y = rng.normal(size=25)
        r = pearson(x, y)
        assert abs(pearson(3.0 * x + 7.0, y) - r) <= 1e-12
        assert abs(pearson(x, 0.25 * y - 2.0) - r) <= 1e-12
        assert abs(pearson(-x, y) + r) <= 1e-12

    def test_constant_inputs_raise_not_zero(self):
        with pytest.raises(DegenerateInputError, match="first"):
            pearson([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
        with pytest.raises(DegenerateInputError, match="second"):
            pearson([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])

    def test_length_and_size_checks(self):
        with pytest.raises(ValueError, match="length"):
            pearson([1.0, 2.0], [1.0, 2.0, 3.0])
        with pytest.raises(ValueError, match="2 points"):
            pearson([1.0], [2.0])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            pearson([1.0, np.nan, 3.0], [1.0, 2.0, 3.0])
        with pytest.raises(ValueError, match="finite"):
            pearson([1.0, 2.0, 3.0], [1.0, np.inf, 3.0])


class TestSpearman:
    def test_monotone_transform_scores_one(self, rng):
        x = rng.normal(size=30)
        assert spearman(x, np.exp(x)) == 1.0
        assert spearman(x, x**3) == 1.0

    def test_reversal_scores_minus_one(self):
        assert spearman([1.0, 5.0, 9.0, 14.0], [4.0, 3.0, 2.0, 1.0]) == -1.0

    def test_matching_ties_score_one(self):
        assert spearman([1.0, 1.0, 2.0], [3.0, 3.0, 4.0]) == 1.0

    def test_constant_input_raises_with_context(self):
        with pytest.raises(DegenerateInputError, match="spearman undefined"):
            spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


class TestRankAverage:
    def test_distinct_values(self):
        np.testing.assert_array_equal(rank_average([30.0, 10.0, 20.0]), [3.0, 1.0, 2.0])

    def test_tied_values_share_mean_rank(self):
        np.testing.assert_array_equal(
            rank_average([5.0, 1.0, 5.0, 2.0]), [3.5, 1.0, 3.5, 2.0]
        )
        np.testing.assert_array_equal(rank_average([7.0, 7.0, 7.0]), [2.0, 2.0, 2.0])

    def test_matches_oracle_on_random_data(self, rng):
        for _ in range(50):
            x = rng.integers(0, 6, size=rng.integers(2, 20)).astype(float)
            np.testing.assert_array_equal(rank_average(x), ranks_mean_ties(x))


class TestMeanStd:
    def test_single_value(self):
        assert mean_std([4.2]) == (4.2, 0.0)

    def test_two_values_population_std(self):
        assert mean_std([0.0, 1.0]) == (0.5, 0.5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="nonempty"):
            mean_std([])


class TestBruteForceAgreement:
    def test_pearson_and_spearman_match_oracles(self):
        for seed in range(200):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(3, 40))
            if seed % 3 == 0:
                x = rng.integers(0, 5, size=n).astype(float)
                y = rng.integers(0, 5, size=n).astype(float)
            else:
                x = rng.normal(size=n)
                y = rng.normal(size=n)
            if np.ptp(x) == 0 or np.ptp(y) == 0:
                continue
            assert abs(pearson(x, y) - pearson_textbook(x, y)) <= 1e-12
            assert abs(spearman(x, y) - spearman_textbook(x, y)) <= 1e-12
