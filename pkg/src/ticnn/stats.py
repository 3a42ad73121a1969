"""Correlation and summary statistics with explicit degenerate-input handling.

Constant inputs make a correlation undefined; those cases raise
``DegenerateInputError`` instead of silently returning 0 or NaN.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateInputError(ValueError):
    """A statistic is undefined for the given (constant) input."""


@dataclass(frozen=True)
class DiffStats:
    """Point-by-point curve comparison: mean/std of |diff| plus rank and linear correlation."""

    mean_abs_diff: float
    std_abs_diff: float
    spearman: float
    pearson: float


def _as_vector(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def mean_std(x) -> tuple[float, float]:
    """Mean and population standard deviation."""
    a = _as_vector(x, "x")
    if a.size == 0:
        raise ValueError("mean_std requires a nonempty sequence")
    m = float(a.mean())
    return m, float(np.sqrt(np.mean((a - m) ** 2)))


def pearson(x, y) -> float:
    """Product-moment correlation. Raises DegenerateInputError on constant input."""
    a = _as_vector(x, "x")
    b = _as_vector(y, "y")
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("pearson requires at least 2 points")
    a = a - a.mean()
    b = b - b.mean()
    sa = float(np.sum(a * a))
    sb = float(np.sum(b * b))
    if sa == 0.0:
        raise DegenerateInputError("pearson undefined: first input is constant")
    if sb == 0.0:
        raise DegenerateInputError("pearson undefined: second input is constant")
    # sqrt of the product (not product of sqrts) keeps r exactly +/-1 for
    # perfectly correlated inputs: sqrt(s*s) == s under round-to-nearest.
    r = float(np.sum(a * b) / np.sqrt(sa * sb))
    return min(1.0, max(-1.0, r))


def rank_average(x) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank positions."""
    a = _as_vector(x, "x")
    n = a.size
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and a[order[j + 1]] == a[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Pearson correlation of average ranks."""
    a = _as_vector(x, "x")
    b = _as_vector(y, "y")
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("spearman requires at least 2 points")
    try:
        return pearson(rank_average(a), rank_average(b))
    except DegenerateInputError as exc:
        raise DegenerateInputError(f"spearman undefined: {exc}") from None
