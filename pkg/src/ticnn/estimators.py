"""Scikit-learn style estimators wrapping the network trainer and the scaler.

GapCnnClassifier trains a small tapped-head conv net on square grayscale or
multi-channel images; MldsScale fits a perceptual difference scale from
quadruple judgments. Both follow the fit/predict/get_params conventions so
they compose with sklearn model selection utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .arch import VARIANTS, build_toy_variant
from .nn import Network, TrainConfig, init_parameters, train
from .ops import PoolSpec, softmax
from .perceptual import MLDSConfig, fit_mlds, mlds_log_likelihood
from .validation import DimensionError, check_labels


class GapCnnClassifier(ClassifierMixin, BaseEstimator):
    """Small conv classifier with a configurable read-out head.

    X is (n, channels, height, width) or (n, height, width); images must be
    square. Labels may be arbitrary hashables; they are encoded internally.
    """

    def __init__(
        self,
        variant: str = "final",
        channels: tuple[int, ...] = (8, 16),
        pool_size: int = 2,
        pad_mode: str = "circular",
        lr: float = 0.05,
        momentum: float = 0.9,
        epochs: int = 10,
        batch_size: int = 32,
        seed: int = 0,
    ):
        self.variant = variant
        self.channels = channels
        self.pool_size = pool_size
        self.pad_mode = pad_mode
        self.lr = lr
        self.momentum = momentum
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def _coerce_images(self, X) -> np.ndarray:
        x = np.asarray(X, dtype=np.float64)
        if x.ndim == 3:
            x = x[:, np.newaxis]
        if x.ndim != 4:
            raise DimensionError(f"X must be (n, c, h, w) or (n, h, w), got {x.shape}")
        if x.shape[2] != x.shape[3]:
            raise DimensionError(f"images must be square, got {x.shape[2]}x{x.shape[3]}")
        return x

    def fit(self, X, y):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        x = self._coerce_images(X)
        y = np.asarray(y)
        if y.shape != (x.shape[0],):
            raise DimensionError(f"y must be ({x.shape[0]},), got {y.shape}")
        self.classes_, encoded = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("fit needs at least 2 classes")

        spec = build_toy_variant(
            self.variant,
            channels=tuple(self.channels),
            pool=PoolSpec(self.pool_size) if self.pool_size else None,
            input_size=x.shape[2],
            num_classes=self.classes_.size,
            in_channels=x.shape[1],
            pad_mode=self.pad_mode,
        )
        self.spec_ = spec
        self.network_ = Network(spec)
        self.store_ = init_parameters(spec, seed=self.seed)
        config = TrainConfig(
            lr=self.lr,
            momentum=self.momentum,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
        )
        self.history_ = train(self.network_, self.store_, x, encoded, config)
        self.n_features_in_ = int(np.prod(x.shape[1:]))
        return self

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        x = self._coerce_images(X)
        if x.shape[2] != self.spec_.input_size:
            raise DimensionError(
                f"images are {x.shape[2]}x{x.shape[3]}, "
                f"model expects {self.spec_.input_size}x{self.spec_.input_size}"
            )
        return self.network_.logits(x, self.store_)

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return self.classes_[self.decision_function(X).argmax(axis=1)]


class MldsScale(TransformerMixin, BaseEstimator):
    """Difference scale fitted from pair-of-pairs judgments.

    fit takes X as (n, 4) quadruple index rows (strictly increasing) and y as
    the binary responses. transform maps level indices to fitted scale
    values; predict returns the response the fitted scale makes more likely.
    """

    def __init__(
        self,
        sigma: float = 0.29,
        n_levels: int | None = None,
        max_iter: int = 2000,
        tol: float = 1e-9,
    ):
        self.sigma = sigma
        self.n_levels = n_levels
        self.max_iter = max_iter
        self.tol = tol

    def _quadruples(self, X) -> np.ndarray:
        q = np.asarray(X)
        if q.ndim != 2 or q.shape[1] != 4:
            raise DimensionError(f"X must be (n, 4) quadruples, got {q.shape}")
        return q.astype(np.int64)

    def fit(self, X, y):
        q = self._quadruples(X)
        r = np.asarray(y)
        if r.shape != (q.shape[0],):
            raise DimensionError(f"y must be ({q.shape[0]},), got {r.shape}")
        if not np.isin(r, (0, 1)).all():
            raise ValueError("responses must be 0 or 1")
        n_levels = self.n_levels if self.n_levels is not None else int(q.max()) + 1
        config = MLDSConfig(sigma=self.sigma, max_iter=self.max_iter, tol=self.tol)
        judgments = np.column_stack([q, r.astype(np.int64)])
        self.scale_ = fit_mlds(judgments, n_levels, config)
        self.log_likelihood_ = mlds_log_likelihood(self.scale_, judgments, self.sigma)
        self.n_levels_ = n_levels
        self.n_features_in_ = 4
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "scale_")
        idx = np.asarray(X, dtype=np.int64).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_levels_):
            raise ValueError(f"level indices must lie in [0, {self.n_levels_})")
        return self.scale_[idx]

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "scale_")
        q = self._quadruples(X)
        psi = self.scale_
        delta = (psi[q[:, 3]] - psi[q[:, 2]]) - (psi[q[:, 1]] - psi[q[:, 0]])
        return (delta > 0).astype(np.int64)

    def score(self, X, y) -> float:
        """Mean per-judgment log likelihood of the fitted scale."""
        check_is_fitted(self, "scale_")
        q = self._quadruples(X)
        r = check_labels(y, 2)
        judgments = np.column_stack([q, r])
        return mlds_log_likelihood(self.scale_, judgments, self.sigma) / q.shape[0]
