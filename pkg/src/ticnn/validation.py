"""Shared input-validation helpers and error types."""

from __future__ import annotations

import numpy as np


class DimensionError(ValueError):
    """Shape or axis mismatch; the message names the offending axis."""


class NumericalError(RuntimeError):
    """An iterative numerical procedure failed to converge."""


def as_float_array(x, name: str = "input") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.size and not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def check_ndim(a: np.ndarray, ndim: int, name: str) -> np.ndarray:
    if a.ndim != ndim:
        raise DimensionError(f"{name} must have {ndim} axes, got shape {a.shape}")
    return a


def as_tensor4d(x, name: str = "input") -> np.ndarray:
    """Coerce to a (batch, channel, height, width) float64 array."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 3:
        a = a[np.newaxis]
    return check_ndim(a, 4, name)


def as_image_batch(x) -> tuple[np.ndarray, bool]:
    """Accept (c,h,w) or (n,c,h,w); return (batch, had_batch_axis)."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 3:
        return a[np.newaxis], False
    check_ndim(a, 4, "image batch")
    return a, True


def check_labels(labels, num_classes: int | None) -> np.ndarray:
    """Validate integer class labels; range-check only when num_classes given."""
    y = np.asarray(labels)
    if y.ndim != 1:
        raise DimensionError(f"labels must be 1-D, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        yi = y.astype(np.int64)
        if not np.array_equal(yi, y):
            raise ValueError("labels must be integers")
        y = yi
    if y.size and y.min() < 0:
        raise ValueError(f"label {int(y.min())} is negative")
    if num_classes is not None and y.size and y.max() >= num_classes:
        bad = int(y[y >= num_classes][0])
        raise ValueError(f"label {bad} out of range [0, {num_classes})")
    return y.astype(np.int64)
