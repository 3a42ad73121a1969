"""Displacement-grid evaluation, loss summaries, and period detection."""

import numpy as np
import pytest

from conftest import make_toy_net
from ticnn.datasets import synthetic_digits
from ticnn.estimators import GapCnnClassifier
from ticnn.evalgrid import (
    AccuracyGrid,
    LossGrid,
    accuracy_vs_shift,
    detect_period,
    evaluate_grid,
    normalize_grids,
    relative_loss_grid,
    summarize,
)
from ticnn.transforms import GridSpec


def intensity_dataset(rng, n=24, size=8):
    """Two classes told apart by mean brightness; immune to translation."""
    labels = rng.integers(0, 2, size=n)
    base = np.where(labels[:, None, None, None] == 1, 0.9, 0.1)
    images = base + rng.normal(0.0, 0.01, size=(n, 1, size, size))
    return images, labels


def intensity_model(x):
    return (np.mean(x, axis=(1, 2, 3)) > 0.5).astype(int)


class TestEvaluateGrid:
    def test_shift_blind_oracle_scores_one_everywhere(self, rng):
        dataset = intensity_dataset(rng)
        acc = evaluate_grid(intensity_model, dataset, GridSpec(2))
        np.testing.assert_array_equal(acc.values, np.ones((5, 5)))
        loss = relative_loss_grid(acc)
        np.testing.assert_array_equal(loss.values, np.zeros((5, 5)))

    def test_zero_grid_equals_plain_accuracy(self, rng):
        images, labels = intensity_dataset(rng)
        # Weaken the oracle so accuracy is informative rather than saturated.
        noisy = images + rng.normal(0.0, 0.6, size=images.shape)
        acc = evaluate_grid(intensity_model, (noisy, labels), GridSpec(0))
        direct = float(np.mean(intensity_model(noisy) == labels))
        assert acc.values.shape == (1, 1)
        assert acc.center_value == direct

    def test_circular_backbone_grid_is_flat(self, rng):
        spec, network, store = make_toy_net(
            "final", channels=(6,), pool=None, input_size=12, num_classes=3,
            pad_mode="circular", seed=5,
        )
        images = rng.uniform(size=(18, 1, 12, 12))
        labels = rng.integers(0, 3, size=18)
        acc = evaluate_grid(
            lambda x: network.logits(x, store), (images, labels),
            GridSpec(3), translator="circular",
        )
        assert np.ptp(acc.values) <= 1e-6

    def test_estimator_interface_is_accepted(self, rng):
        train = synthetic_digits(n_per_class=2, noise=0.1, seed=0)
        clf = GapCnnClassifier(variant="final", channels=(4,), epochs=1, seed=0)
        clf.fit(train.images, train.labels)
        acc = evaluate_grid(clf, train, GridSpec(1))
        assert acc.values.shape == (3, 3)

    def test_empty_dataset_rejected(self):
        empty = (np.zeros((0, 1, 8, 8)), np.zeros(0, dtype=int))
        with pytest.raises(ValueError, match="empty"):
            evaluate_grid(intensity_model, empty, GridSpec(1))

    def test_label_count_mismatch_rejected(self, rng):
        images, labels = intensity_dataset(rng)
        with pytest.raises(ValueError, match="labels"):
            evaluate_grid(intensity_model, (images, labels[:-1]), GridSpec(1))

    def test_unknown_translator_rejected(self, rng):
        with pytest.raises(ValueError, match="translator"):
            evaluate_grid(intensity_model, intensity_dataset(rng), GridSpec(1), "fold")

    def test_unusable_model_rejected(self, rng):
        with pytest.raises(TypeError, match="model"):
            evaluate_grid(object(), intensity_dataset(rng), GridSpec(1))


class TestAccuracyVsShift:
    def test_oracle_flat_on_both_axes(self, rng):
        dataset = intensity_dataset(rng)
        for axis in ("x", "y"):
            curve = accuracy_vs_shift(intensity_model, dataset, range(5), axis=axis)
            np.testing.assert_array_equal(curve, np.ones(5))

    def test_bad_axis_rejected(self, rng):
        with pytest.raises(ValueError, match="axis"):
            accuracy_vs_shift(intensity_model, intensity_dataset(rng), range(3), axis="z")


class TestLossAndSummary:
    def test_relative_loss_hand_values(self):
        acc = AccuracyGrid(
            GridSpec(1, axes="horizontal"), np.array([[0.6, 0.9, 0.6]]), (0, 1)
        )
        loss = relative_loss_grid(acc)
        np.testing.assert_allclose(loss.values, [[0.3, 0.0, 0.3]])
        assert loss.values[0, 1] == 0.0

    def test_constant_grid_summary(self):
        acc = AccuracyGrid(GridSpec(1), np.full((3, 3), 0.7), (1, 1))
        s = summarize(acc)
        assert (s.mean_accuracy, s.std_accuracy) == (0.7, 0.0)
        assert (s.mean_loss, s.std_loss) == (0.0, 0.0)

    def test_two_cell_summary(self):
        acc = AccuracyGrid(
            GridSpec(1, axes="horizontal"), np.array([[1.0, 0.8]]), (0, 0)
        )
        s = summarize(acc)
        np.testing.assert_allclose(s.mean_accuracy, 0.9)
        np.testing.assert_allclose(s.mean_loss, 0.1)

    def test_center_outside_grid_rejected(self):
        with pytest.raises(ValueError, match="center"):
            AccuracyGrid(GridSpec(1), np.zeros((3, 3)), (3, 0))

    def test_out_of_range_accuracy_rejected(self):
        with pytest.raises(ValueError, match="0, 1"):
            AccuracyGrid(GridSpec(0), np.array([[1.2]]), (0, 0))


class TestNormalizeGrids:
    @staticmethod
    def loss(values):
        v = np.asarray(values, dtype=np.float64)
        return LossGrid(GridSpec(0), v, (0, 0))

    def test_min_max_rescale(self):
        scaled, degenerate = normalize_grids([self.loss([[0.0, 0.5]])])
        np.testing.assert_allclose(scaled[0].values, [[0.0, 1.0]])
        assert not degenerate

    def test_identical_grids_stay_identical(self):
        a, b = self.loss([[0.1, 0.4]]), self.loss([[0.1, 0.4]])
        scaled, _ = normalize_grids([a, b])
        np.testing.assert_array_equal(scaled[0].values, scaled[1].values)

    def test_joint_scale_keeps_smaller_grid_below_one(self):
        scaled, _ = normalize_grids([self.loss([[0.0, 1.0]]), self.loss([[0.0, 0.4]])])
        assert scaled[0].values.max() == 1.0
        assert scaled[1].values.max() < 1.0

    def test_degenerate_family_is_flagged(self):
        scaled, degenerate = normalize_grids([self.loss([[0.3, 0.3]])])
        assert degenerate
        np.testing.assert_array_equal(scaled[0].values, np.zeros((1, 2)))

    def test_empty_family_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            normalize_grids([])


class TestDetectPeriod:
    def test_cosine_with_period_three(self):
        curve = np.cos(2 * np.pi * np.arange(12) / 3.0)
        est = detect_period(curve)
        assert est.period == 3
        assert est.confidence > 0.9

    def test_constant_curve_has_no_period(self):
        est = detect_period(np.full(9, 0.25))
        assert est.period is None
        assert est.confidence == 0.0

    def test_too_short_curve_rejected(self):
        with pytest.raises(ValueError, match="3 samples"):
            detect_period([1.0, 2.0])

    def test_confidence_clipped_to_unit_interval(self):
        est = detect_period(np.cos(2 * np.pi * np.arange(30) / 5.0))
        assert 0.0 <= est.confidence <= 1.0
        assert est.period == 5


class TestPoolingAliasing:
    def test_trained_pooled_model_oscillates_with_pool_period(self):
        train = synthetic_digits(n_per_class=8, noise=0.25, seed=1)
        clf = GapCnnClassifier(
            variant="final", channels=(16,), pool_size=2, pad_mode="circular",
            lr=0.1, epochs=30, seed=1,
        )
        clf.fit(train.images, train.labels)
        curve = accuracy_vs_shift(clf, train, range(12))
        est = detect_period(curve)
        assert est.period == 2
        assert est.confidence >= 0.3

    def test_gap_grid_is_flat_while_flatten_grid_is_not(self):
        train = synthetic_digits(n_per_class=8, noise=0.25, seed=1)
        gap = GapCnnClassifier(
            variant="final", channels=(16,), pool_size=None, pad_mode="circular",
            lr=0.1, epochs=30, seed=1,
        )
        flat = GapCnnClassifier(
            variant="base", channels=(16,), pool_size=2, pad_mode="zero",
            lr=0.1, epochs=30, seed=1,
        )
        gap.fit(train.images, train.labels)
        flat.fit(train.images, train.labels)
        grid = GridSpec(4, step=2)
        gap_std = summarize(evaluate_grid(gap, train, grid)).std_accuracy
        flat_std = summarize(evaluate_grid(flat, train, grid)).std_accuracy
        assert gap_std <= 1e-6
        assert flat_std >= 10 * max(gap_std, 1e-7)
        assert flat_std > 0
