"""Accuracy over displacement grids, relative-loss summaries, periodicity.

A "model" is a callable mapping an image batch to logits (2-D) or predicted
labels (1-D), or an object exposing ``decision_function`` or ``predict``.
Grid values are indexed [iy, ix] following (shifts_y, shifts_x).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .transforms import GridSpec, circular_shift, translate_mosaic
from .validation import as_tensor4d, check_labels

TRANSLATORS = ("mosaic", "circular")


@dataclass(frozen=True)
class AccuracyGrid:
    """Top-1 accuracy per displacement; ``center`` is the (iy, ix) of (0, 0)."""

    grid: GridSpec
    values: np.ndarray
    center: tuple[int, int]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        iy, ix = self.center
        if not (0 <= iy < v.shape[0] and 0 <= ix < v.shape[1]):
            raise ValueError(f"center {self.center} outside grid shape {v.shape}")
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("accuracy values must lie in [0, 1]")

    @property
    def center_value(self) -> float:
        return float(self.values[self.center])


@dataclass(frozen=True)
class LossGrid:
    """Accuracy drop per displacement: center accuracy minus cell accuracy."""

    grid: GridSpec
    values: np.ndarray
    center: tuple[int, int]


@dataclass(frozen=True)
class RobustnessSummary:
    mean_accuracy: float
    std_accuracy: float
    mean_loss: float
    std_loss: float


@dataclass(frozen=True)
class PeriodEstimate:
    """Detected cycle length of a 1-D response, or None below the confidence bar."""

    period: int | None
    confidence: float


def _as_predict_fn(model):
    """Normalize the model interface to batch -> predicted labels."""
    if callable(model):
        raw = model
    elif hasattr(model, "decision_function"):
        raw = model.decision_function
    elif hasattr(model, "predict"):
        raw = model.predict
    else:
        raise TypeError("model must be callable or expose decision_function/predict")

    def predict(x):
        out = np.asarray(raw(x))
        if out.ndim == 2:
            return np.argmax(out, axis=1)
        if out.ndim == 1:
            return out
        raise ValueError(f"model output must be 1-D or 2-D, got shape {out.shape}")

    return predict


def _resolve_translator(translator):
    if callable(translator):
        return translator
    if translator == "mosaic":
        return translate_mosaic
    if translator == "circular":
        return circular_shift
    raise ValueError(f"translator must be one of {TRANSLATORS}, got {translator!r}")


def _unpack_dataset(dataset):
    if hasattr(dataset, "images") and hasattr(dataset, "labels"):
        images, labels = dataset.images, dataset.labels
    else:
        images, labels = dataset
    x = as_tensor4d(images, "images")
    if x.shape[0] == 0:
        raise ValueError("dataset is empty")
    y = check_labels(labels, num_classes=None)
    if y.shape[0] != x.shape[0]:
        raise ValueError(f"{x.shape[0]} images but {y.shape[0]} labels")
    return x, y


def evaluate_grid(model, dataset, grid: GridSpec, translator="mosaic") -> AccuracyGrid:
    """Translate the test set to every grid displacement and score the model."""
    predict = _as_predict_fn(model)
    shift_fn = _resolve_translator(translator)
    x, y = _unpack_dataset(dataset)
    sx, sy = grid.displacements()

    values = np.zeros((len(sy), len(sx)))
    for iy, dy in enumerate(sy):
        for ix, dx in enumerate(sx):
            pred = predict(shift_fn(x, dx, dy))
            values[iy, ix] = float(np.mean(pred == y))
    return AccuracyGrid(grid, values, grid.center_index())


def accuracy_vs_shift(model, dataset, shifts, axis: str = "x", translator="mosaic") -> np.ndarray:
    """Accuracy along a 1-D sweep of shifts on one axis (need not be symmetric)."""
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    predict = _as_predict_fn(model)
    shift_fn = _resolve_translator(translator)
    x, y = _unpack_dataset(dataset)

    out = np.zeros(len(tuple(shifts)))
    for i, s in enumerate(shifts):
        dx, dy = (int(s), 0) if axis == "x" else (0, int(s))
        pred = predict(shift_fn(x, dx, dy))
        out[i] = float(np.mean(pred == y))
    return out


def relative_loss_grid(grid: AccuracyGrid) -> LossGrid:
    """Accuracy at zero displacement minus accuracy at each cell; center exactly 0."""
    values = grid.center_value - grid.values
    values[grid.center] = 0.0
    return LossGrid(grid.grid, values, grid.center)


def summarize(grid: AccuracyGrid) -> RobustnessSummary:
    """Mean/std of accuracy and of loss w.r.t. center over the whole grid.

    Grids cover the full displacement space, so std is the population std.
    """
    acc = np.asarray(grid.values, dtype=np.float64)
    loss = relative_loss_grid(grid).values
    return RobustnessSummary(
        mean_accuracy=float(acc.mean()),
        std_accuracy=float(acc.std()),
        mean_loss=float(loss.mean()),
        std_loss=float(loss.std()),
    )


def normalize_grids(grids) -> tuple[list[LossGrid], bool]:
    """Jointly min-max scale a family of loss grids onto [0, 1].

    One shared (min, max) over the union of all cells preserves relative
    structure across the family. Returns (scaled grids, degenerate); a
    degenerate (all-equal) family comes back as all zeros with the flag set.
    """
    items = list(grids)
    if not items:
        raise ValueError("normalize_grids needs at least one grid")
    arrays = [np.asarray(g.values, dtype=np.float64) for g in items]
    lo = min(float(a.min()) for a in arrays)
    hi = max(float(a.max()) for a in arrays)
    if hi == lo:
        scaled = [np.zeros_like(a) for a in arrays]
        degenerate = True
    else:
        scaled = [(a - lo) / (hi - lo) for a in arrays]
        degenerate = False
    out = [LossGrid(g.grid, v, g.center) for g, v in zip(items, scaled)]
    return out, degenerate


def detect_period(curve, confidence_threshold: float = 0.3) -> PeriodEstimate:
    """Estimate the dominant cycle length of a 1-D response via autocorrelation.

    The autocorrelation at lag L is count-normalized (divided by n-L) so an
    exactly periodic series scores 1.0 regardless of length. Lags run from 1
    to len(curve)//3 so at least three cycles support the estimate. Ties
    within 1e-9 resolve to the smallest lag. Confidence is clipped to [0, 1];
    below the threshold the period is reported as None.
    """
    b = np.asarray(curve, dtype=np.float64).reshape(-1)
    n = b.size
    if n < 3:
        raise ValueError(f"period detection needs at least 3 samples, got {n}")
    b = b - b.mean()
    denom = float(np.mean(b * b))
    if denom == 0.0:
        return PeriodEstimate(None, 0.0)
    max_lag = n // 3
    scores = np.empty(max_lag)
    for lag in range(1, max_lag + 1):
        scores[lag - 1] = float(np.mean(b[:-lag] * b[lag:])) / denom
    best = float(scores.max())
    lag = 1 + int(np.argmax(scores >= best - 1e-9))
    confidence = min(1.0, max(0.0, best))
    if confidence < confidence_threshold:
        return PeriodEstimate(None, confidence)
    return PeriodEstimate(lag, confidence)
