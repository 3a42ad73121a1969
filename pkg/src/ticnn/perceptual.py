"""Deep-feature perceptual distance and distortion response curves.

The distance taps feature maps (or their GAP vectors) out of a convolutional
trunk and sums weighted squared differences of channel-unit-normalized
activations, averaged over spatial positions. Response curves trace that
distance along a sequence of progressively distorted images by four methods:
direct distance to the reference, its cumulative sum, accumulated
consecutive-step distances, and a difference-scaling fit to simulated
pairwise-interval judgments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr

from .nn import Network, ParameterStore
from .ops import global_avg_pool
from .stats import DegenerateInputError, DiffStats, mean_std, pearson, spearman
from .validation import DimensionError, NumericalError, as_image_batch

CURVE_METHODS = ("origdist", "cumsum", "sequential", "mlds")
METRIC_VARIANTS = ("lbase", "lmulti", "lflat")
DEFAULT_LEVEL_STEP = 0.07

_EPS = 1e-10


@dataclass(frozen=True)
class MetricTap:
    """One tapped activation: a stage's feature map or its GAP vector."""

    stage: int
    reduce: str = "map"

    def __post_init__(self):
        if self.reduce not in ("map", "gap"):
            raise ValueError(f"tap reduce must be 'map' or 'gap', got {self.reduce!r}")
        if self.stage < 0:
            raise ValueError(f"tap stage must be >= 0, got {self.stage}")


@dataclass(frozen=True)
class MetricConfig:
    """Backbone (network + parameters), tap list, per-channel weights, normalize flag.

    ``weights`` is one nonnegative per-channel vector per tap, or None for
    uniform 1.0. ``normalize`` unit-normalizes each spatial position's channel
    vector before differencing.
    """

    network: Network
    store: ParameterStore
    taps: tuple[MetricTap, ...]
    weights: tuple[np.ndarray, ...] | None = None
    normalize: bool = True

    def __post_init__(self):
        n_stages = len(self.network.spec.stages)
        if not self.taps:
            raise ValueError("metric needs at least one tap")
        for tap in self.taps:
            if tap.stage >= n_stages:
                raise ValueError(f"tap stage {tap.stage} outside backbone with {n_stages} stages")
        if self.weights is not None:
            if len(self.weights) != len(self.taps):
                raise ValueError(
                    f"{len(self.weights)} weight vectors for {len(self.taps)} taps"
                )
            frozen = []
            for tap, w in zip(self.taps, self.weights):
                w = np.asarray(w, dtype=np.float64)
                want = self.network.spec.stages[tap.stage].convs[-1].out_channels
                if w.shape != (want,):
                    raise DimensionError(
                        f"tap on stage {tap.stage} needs {want} channel weights, got shape {w.shape}"
                    )
                if np.any(w < 0):
                    raise ValueError(f"negative weight in tap on stage {tap.stage}")
                frozen.append(w)
            object.__setattr__(self, "weights", tuple(frozen))


def variant_metric(variant: str, network: Network, store: ParameterStore) -> MetricConfig:
    """Named tap configuration over a shared trunk.

    lbase taps every post-pool feature map; lmulti taps their GAP vectors;
    lflat taps the last feature map plus every GAP vector. There is no
    separate 'final' metric: its formulation coincides with lflat's tail,
    so lflat is the canonical name.
    """
    key = variant.lower()
    if key in ("final", "lfinal"):
        raise ValueError("no 'final' metric; its formulation is covered by 'lflat'")
    if key in ("base", "multi", "flat"):
        key = "l" + key
    if key not in METRIC_VARIANTS:
        raise ValueError(f"metric variant must be one of {METRIC_VARIANTS}, got {variant!r}")
    n_stages = len(network.spec.stages)
    if n_stages == 0:
        raise ValueError("backbone has no stages to tap")
    if key == "lbase":
        taps = tuple(MetricTap(si, "map") for si in range(n_stages))
    elif key == "lmulti":
        taps = tuple(MetricTap(si, "gap") for si in range(n_stages))
    else:
        taps = (MetricTap(n_stages - 1, "map"),) + tuple(
            MetricTap(si, "gap") for si in range(n_stages)
        )
    return MetricConfig(network, store, taps)


def _tap_activations(config: MetricConfig, x: np.ndarray) -> list[np.ndarray]:
    feats = config.network.stage_features(x, config.store)
    out = []
    for tap in config.taps:
        f = feats[tap.stage]
        out.append(global_avg_pool(f) if tap.reduce == "gap" else f)
    return out


def _unit_channels(f: np.ndarray) -> np.ndarray:
    norm = np.sqrt(np.sum(f * f, axis=1, keepdims=True))
    return f / (norm + _EPS)


def lpips_distance(config: MetricConfig, x, y):
    """Weighted squared distance between tapped activations of x and y.

    Sum over taps of the spatial mean of the per-channel weighted squared
    difference; GAP taps contribute through their single spatial position.
    Accepts single images or batches (scalar or per-sample vector out).
    """
    xb, x_batched = as_image_batch(x)
    yb, y_batched = as_image_batch(y)
    if xb.shape != yb.shape:
        raise DimensionError(f"inputs differ in shape: {xb.shape} vs {yb.shape}")
    fx = _tap_activations(config, xb)
    fy = _tap_activations(config, yb)

    total = np.zeros(xb.shape[0])
    for ti, (ax, ay) in enumerate(zip(fx, fy)):
        if config.normalize:
            ax, ay = _unit_channels(ax), _unit_channels(ay)
        sq = (ax - ay) ** 2
        if config.weights is not None:
            sq = sq * config.weights[ti][np.newaxis, :, np.newaxis, np.newaxis]
        total += sq.sum(axis=1).mean(axis=(1, 2))
    if x_batched or y_batched:
        return total
    return float(total[0])


def make_distance(config: MetricConfig):
    """Bind a MetricConfig into a plain (x, y) -> distance callable."""

    def distance(x, y):
        return lpips_distance(config, x, y)

    return distance


@dataclass(frozen=True)
class ResponseCurve:
    """Distance response at each distortion level; level 0 maps to value 0."""

    levels: np.ndarray
    values: np.ndarray
    method: str
    degenerate: bool = False

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=np.float64)
        va = np.asarray(self.values, dtype=np.float64)
        if lv.shape != va.shape or lv.ndim != 1:
            raise DimensionError(
                f"levels and values must be equal-length 1-D, got {lv.shape} and {va.shape}"
            )
        if lv.size >= 2 and np.any(np.diff(lv) <= 0):
            raise ValueError("levels must be strictly increasing")
        if not np.all(np.isfinite(va)):
            raise ValueError("curve values must be finite")
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "values", va)


@dataclass(frozen=True)
class MLDSConfig:
    """Simulated difference-scaling setup: observer noise, trial count, seed.

    The fitted scale is anchored to ``anchor`` at its first and last level.
    ``max_iter``/``tol`` bound the gradient ascent in fit_mlds.
    """

    sigma: float = 0.29
    trials: int = 2000
    seed: int = 0
    anchor: tuple[float, float] = (0.0, 1.0)
    max_iter: int = 5000
    tol: float = 1e-10

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.anchor[1] <= self.anchor[0]:
            raise ValueError(f"anchor must be increasing, got {self.anchor}")


def _resolve_metric(metric):
    if isinstance(metric, MetricConfig):
        return make_distance(metric)
    if callable(metric):
        return metric
    raise TypeError("metric must be a MetricConfig or a callable (x, y) -> distance")


def build_response_curve(
    method: str,
    images,
    metric,
    mlds: MLDSConfig | None = None,
    levels=None,
) -> ResponseCurve:
    """Trace the metric along an ordered distortion sequence I_0..I_N.

    I_0 is the pristine reference. Methods: 'origdist' is D(I_0, I_n);
    'cumsum' its running sum; 'sequential' the running sum of consecutive-step
    distances D(I_{n-1}, I_n); 'mlds' a difference-scaling fit to judgments
    simulated from the origdist responses. Levels default to 0.07-unit steps.
    """
    key = method.lower()
    if key not in CURVE_METHODS:
        raise ValueError(f"method must be one of {CURVE_METHODS}, got {method!r}")
    seq = [np.asarray(im, dtype=np.float64) for im in images]
    n_levels = len(seq)
    if n_levels < 3:
        raise ValueError(f"need at least 3 images (reference + 2 levels), got {n_levels}")
    if levels is None:
        levels = DEFAULT_LEVEL_STEP * np.arange(n_levels)
    levels = np.asarray(levels, dtype=np.float64)
    if levels.shape != (n_levels,):
        raise DimensionError(f"{n_levels} images but levels shape {levels.shape}")
    if key == "mlds" and mlds is None:
        raise ValueError("method 'mlds' requires an MLDSConfig")
    distance = _resolve_metric(metric)

    if key == "sequential":
        steps = [0.0] + [float(distance(seq[m - 1], seq[m])) for m in range(1, n_levels)]
        return ResponseCurve(levels, np.cumsum(steps), key)

    orig = np.array([float(distance(seq[0], im)) for im in seq])
    if key == "origdist":
        return ResponseCurve(levels, orig, key)
    if key == "cumsum":
        return ResponseCurve(levels, np.cumsum(orig), key)

    peak = float(np.max(np.abs(orig)))
    if peak == 0.0:
        # No signal to scale: identical images leave the observer at chance.
        return ResponseCurve(levels, np.zeros(n_levels), key, degenerate=True)
    judgments = simulate_mlds(orig / peak, mlds)
    fitted = fit_mlds(judgments, n_levels, mlds)
    return ResponseCurve(levels, fitted, key)


def simulate_mlds(true_scale, config: MLDSConfig) -> np.ndarray:
    """Simulate interval-comparison judgments from a planted scale.

    Each trial draws a uniform quadruple of levels i<j<k<l and answers
    "second interval larger" when (psi_l - psi_k) - (psi_j - psi_i) plus
    Gaussian noise of width sigma is positive, i.e. with probability
    ndtr(delta / sigma). Returns an integer array of rows (i, j, k, l, choice).
    """
    psi = np.asarray(true_scale, dtype=np.float64).reshape(-1)
    n_levels = psi.size
    if n_levels < 4:
        raise ValueError(f"need at least 4 levels to form quadruples, got {n_levels}")
    rng = np.random.default_rng(config.seed)
    keys = rng.random((config.trials, n_levels))
    quads = np.sort(np.argsort(keys, axis=1)[:, :4], axis=1)
    delta = (psi[quads[:, 3]] - psi[quads[:, 2]]) - (psi[quads[:, 1]] - psi[quads[:, 0]])
    choice = (delta + config.sigma * rng.standard_normal(config.trials)) > 0
    return np.column_stack([quads, choice.astype(np.int64)])


def _check_judgments(judgments, num_levels: int) -> tuple[np.ndarray, np.ndarray]:
    j = np.asarray(judgments)
    if j.ndim != 2 or j.shape[1] != 5:
        raise DimensionError(f"judgments must be (trials, 5) rows i,j,k,l,choice, got {j.shape}")
    if j.shape[0] == 0:
        raise ValueError("judgments are empty")
    quads = j[:, :4].astype(np.int64)
    choice = j[:, 4].astype(np.int64)
    if quads.min() < 0 or quads.max() >= num_levels:
        raise ValueError(f"judgment level index outside [0, {num_levels})")
    if np.any(np.diff(quads, axis=1) <= 0):
        raise ValueError("each judgment needs strictly increasing levels i<j<k<l")
    if not np.all((choice == 0) | (choice == 1)):
        raise ValueError("choice column must be 0 or 1")
    return quads, choice


def _psi_from_z(z: np.ndarray, anchor: tuple[float, float]) -> tuple[np.ndarray, np.ndarray, float]:
    """Anchored monotone scale from free increments via softplus-cumsum."""
    d = np.logaddexp(0.0, z)
    u = np.cumsum(d)
    total = u[-1]
    psi = anchor[0] + (anchor[1] - anchor[0]) * np.concatenate(([0.0], u / total))
    return psi, d, total


def mlds_log_likelihood(psi, judgments, sigma: float) -> float:
    """Bernoulli log-likelihood of the judgments under scale psi."""
    psi = np.asarray(psi, dtype=np.float64).reshape(-1)
    quads, choice = _check_judgments(judgments, psi.size)
    delta = (psi[quads[:, 3]] - psi[quads[:, 2]]) - (psi[quads[:, 1]] - psi[quads[:, 0]])
    p = np.clip(ndtr(delta / sigma), 1e-12, 1.0 - 1e-12)
    return float(np.sum(np.where(choice == 1, np.log(p), np.log1p(-p))))


def fit_mlds(judgments, num_levels: int, config: MLDSConfig) -> np.ndarray:
    """Maximum-likelihood monotone scale from interval judgments.

    Maximizes the Bernoulli likelihood with sigma fixed, over a scale
    anchored at the config's endpoints and kept monotone by a
    softplus-cumsum reparameterization. The ascent runs through L-BFGS-B
    (judgments inconsistent with any monotone scale push increments toward
    the zero boundary, where fixed-step ascent creeps exponentially slowly);
    raises NumericalError (reporting the final gradient norm) if the
    iteration cap passes without meeting the tolerance.
    """
    if num_levels < 4:
        raise ValueError(f"need at least 4 levels, got {num_levels}")
    quads, choice = _check_judgments(judgments, num_levels)
    sigma = config.sigma
    span = config.anchor[1] - config.anchor[0]
    sign = np.where(choice == 1, 1.0, -1.0)

    def score_and_grad(z):
        psi, d, total = _psi_from_z(z, config.anchor)
        delta = (psi[quads[:, 3]] - psi[quads[:, 2]]) - (psi[quads[:, 1]] - psi[quads[:, 0]])
        arg = delta / sigma
        # d/darg log Phi(sign * arg) = sign * phi(arg) / Phi(sign * arg)
        p = np.clip(ndtr(sign * arg), 1e-12, 1.0)
        ll = float(np.sum(np.log(p)))
        phi = np.exp(-0.5 * arg * arg) / np.sqrt(2.0 * np.pi)
        g_delta = sign * phi / p / sigma

        g_psi = np.zeros(num_levels)
        np.add.at(g_psi, quads[:, 3], g_delta)
        np.add.at(g_psi, quads[:, 2], -g_delta)
        np.add.at(g_psi, quads[:, 1], -g_delta)
        np.add.at(g_psi, quads[:, 0], g_delta)
        # psi_m = anchor0 + span * u_{m-1} / total with u = cumsum(d):
        # dpsi_m/dd_i = span * (1[i < m] - u_{m-1} / total) / total.
        gm = g_psi[1:] * span
        g_d = (np.cumsum(gm[::-1])[::-1] - np.sum(gm * (np.cumsum(d) / total))) / total
        g_z = g_d / (1.0 + np.exp(-z))
        return ll, g_z

    def objective(z):
        ll, g_z = score_and_grad(z)
        return -ll, -g_z

    result = minimize(
        objective,
        np.zeros(num_levels - 1),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": config.max_iter, "ftol": config.tol, "gtol": config.tol},
    )
    if result.status == 1:  # iteration/evaluation cap, not a converged stop
        raise NumericalError(
            f"difference-scaling fit hit the {config.max_iter}-iteration cap "
            f"(final gradient norm {float(np.linalg.norm(result.jac)):.3e})"
        )
    return _psi_from_z(result.x, config.anchor)[0]


def fit_weights(config: MetricConfig, pairs, targets, ridge: float = 1e-8) -> MetricConfig:
    """Least-squares per-channel weights against a target distance signal.

    Solves ridge-regularized normal equations over the per-channel distance
    contributions of each (x, y) pair, clips negatives to zero, and returns
    a new config carrying the fitted weights.
    """
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if len(pairs) != targets.size:
        raise ValueError(f"{len(pairs)} pairs but {targets.size} targets")
    widths = [
        config.network.spec.stages[t.stage].convs[-1].out_channels for t in config.taps
    ]
    rows = []
    for x, y in pairs:
        xb, _ = as_image_batch(x)
        yb, _ = as_image_batch(y)
        fx = _tap_activations(config, xb)
        fy = _tap_activations(config, yb)
        feats = []
        for ax, ay in zip(fx, fy):
            if config.normalize:
                ax, ay = _unit_channels(ax), _unit_channels(ay)
            # Per-channel contribution: spatial mean of the squared difference.
            feats.append(((ax - ay) ** 2).mean(axis=(2, 3))[0])
        rows.append(np.concatenate(feats))
    a = np.stack(rows)
    gram = a.T @ a + ridge * np.eye(a.shape[1])
    w = np.linalg.solve(gram, a.T @ targets)
    w = np.clip(w, 0.0, None)
    split = np.split(w, np.cumsum(widths)[:-1])
    return MetricConfig(config.network, config.store, config.taps, tuple(split), config.normalize)


def compare_curves(model_curve, reference_curve) -> DiffStats:
    """Per-curve max normalization, then mean/std of |difference| and correlations."""
    a = np.asarray(getattr(model_curve, "values", model_curve), dtype=np.float64).reshape(-1)
    b = np.asarray(getattr(reference_curve, "values", reference_curve), dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DimensionError(f"curves differ in length: {a.size} vs {b.size}")
    pa, pb = float(np.max(np.abs(a))), float(np.max(np.abs(b)))
    if pa == 0.0 or pb == 0.0:
        which = "model" if pa == 0.0 else "reference"
        raise DegenerateInputError(f"{which} curve has zero maximum; cannot normalize")
    a, b = a / pa, b / pb
    mu, sd = mean_std(np.abs(a - b))
    return DiffStats(mu, sd, spearman(a, b), pearson(a, b))
