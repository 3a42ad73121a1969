"""Test bench for translation robustness of conv nets with tapped read-out heads.

The package covers four concerns: building and training the classifier
variants (arch, nn, ops), transforming and evaluating images over shift
grids (transforms, evalgrid), perceptual distance and difference scaling
(perceptual, stats), and reproducible experiment IO (datasets, fileio, cli,
estimators).
"""

from .arch import (
    ArchitectureError,
    ArchitectureSpec,
    ConvSpec,
    ParamReport,
    StageSpec,
    Tap,
    VARIANTS,
    build_toy_variant,
    build_vgg16_variant,
    count_parameters,
)
from .datasets import Dataset, IdxFormatError, load_dataset, synthetic_digits
from .estimators import GapCnnClassifier, MldsScale
from .evalgrid import (
    AccuracyGrid,
    LossGrid,
    PeriodEstimate,
    RobustnessSummary,
    accuracy_vs_shift,
    detect_period,
    evaluate_grid,
    normalize_grids,
    relative_loss_grid,
    summarize,
)
from .nn import (
    Network,
    Parameter,
    ParameterStore,
    TrainConfig,
    copy_backbone,
    cross_entropy,
    evaluate,
    freeze_backbone,
    init_parameters,
    train,
)
from .ops import PoolSpec
from .perceptual import (
    CURVE_METHODS,
    MetricConfig,
    MetricTap,
    MLDSConfig,
    ResponseCurve,
    build_response_curve,
    compare_curves,
    fit_mlds,
    lpips_distance,
    make_distance,
    mlds_log_likelihood,
    simulate_mlds,
    variant_metric,
)
from .stats import DegenerateInputError, DiffStats, mean_std, pearson, rank_average, spearman
from .transforms import (
    AffineParams,
    GridSpec,
    apply_affine,
    apply_aperture,
    circular_shift,
    make_affine,
    make_rotation,
    make_scale,
    make_translation,
    translate_mosaic,
)
from .validation import DimensionError, NumericalError

__version__ = "0.1.0"

__all__ = [
    "accuracy_vs_shift",
    "AccuracyGrid",
    "AffineParams",
    "apply_affine",
    "apply_aperture",
    "ArchitectureError",
    "ArchitectureSpec",
    "build_response_curve",
    "build_toy_variant",
    "build_vgg16_variant",
    "circular_shift",
    "compare_curves",
    "ConvSpec",
    "copy_backbone",
    "count_parameters",
    "cross_entropy",
    "CURVE_METHODS",
    "Dataset",
    "DegenerateInputError",
    "detect_period",
    "DiffStats",
    "DimensionError",
    "evaluate",
    "evaluate_grid",
    "fit_mlds",
    "freeze_backbone",
    "GapCnnClassifier",
    "GridSpec",
    "IdxFormatError",
    "init_parameters",
    "load_dataset",
    "LossGrid",
    "lpips_distance",
    "make_affine",
    "make_distance",
    "make_rotation",
    "make_scale",
    "make_translation",
    "mean_std",
    "MetricConfig",
    "MetricTap",
    "mlds_log_likelihood",
    "MLDSConfig",
    "MldsScale",
    "Network",
    "normalize_grids",
    "NumericalError",
    "Parameter",
    "ParameterStore",
    "ParamReport",
    "pearson",
    "PeriodEstimate",
    "PoolSpec",
    "rank_average",
    "relative_loss_grid",
    "ResponseCurve",
    "RobustnessSummary",
    "simulate_mlds",
    "spearman",
    "StageSpec",
    "summarize",
    "synthetic_digits",
    "Tap",
    "train",
    "TrainConfig",
    "translate_mosaic",
    "variant_metric",
    "VARIANTS",
]
