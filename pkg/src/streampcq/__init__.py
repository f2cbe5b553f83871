"""streampcq: bitstream-layer quality assessment for trisoup-lifting
coded point clouds.

The model reads three features straight out of a compressed stream (the
attribute QP, attribute bits per point and the trisoup node size) and
maps them to a predicted mean opinion score with a closed-form texture
term times a logistic geometry attenuation.  The package also ships the
calibration pipeline that fits the constants from a labeled dataset, the
subjective-score post-processing chain, and the evaluation protocol
(cross-validation, randomized trials, ablation, significance tests).
"""

from .bitstream import (
    FeatureVector,
    SyntaxDescriptorProfile,
    extract_features,
    load_profile,
    load_sidecar,
    read_tlv_units,
)
from .calibration import (
    CalibrationOptions,
    Dataset,
    DatasetRecord,
    FitDiagnostics,
    calibrate_full,
    fit_geometry_attenuation,
    fit_linear,
    fit_quadratic,
    fit_tc_model,
    fit_texture_model,
)
from .estimator import TrisoupLiftingRegressor
from .evaluation import (
    Comparison,
    EvalReport,
    SignificanceMatrix,
    ablation,
    ftest_variance_ratio,
    loocv,
    nonlinear_map,
    random_trials,
    significance_from_scores,
    significance_matrix,
)
from .metrics import plcc, rmse, srcc
from .model import (
    ModelParams,
    Prediction,
    default_params,
    estimate_tc,
    geometry_attenuation,
    intercept_of_tqp,
    nmos,
    predict,
    predict_scores,
    slope_of_tqp,
    texture_mos,
)
from .pointcloud import compute_reference_tc, read_ply
from .subjective import (
    MosTable,
    RatingMatrix,
    compute_mos,
    rescale_to_range,
    screen_observers,
    zscore,
)
from .synthetic import make_synthetic_dataset

__version__ = "0.1.0"

__all__ = [
    "CalibrationOptions",
    "Comparison",
    "Dataset",
    "DatasetRecord",
    "EvalReport",
    "FeatureVector",
    "FitDiagnostics",
    "ModelParams",
    "MosTable",
    "Prediction",
    "RatingMatrix",
    "SignificanceMatrix",
    "SyntaxDescriptorProfile",
    "TrisoupLiftingRegressor",
    "ablation",
    "calibrate_full",
    "compute_mos",
    "compute_reference_tc",
    "default_params",
    "estimate_tc",
    "extract_features",
    "fit_geometry_attenuation",
    "fit_linear",
    "fit_quadratic",
    "fit_tc_model",
    "fit_texture_model",
    "ftest_variance_ratio",
    "geometry_attenuation",
    "intercept_of_tqp",
    "load_profile",
    "load_sidecar",
    "loocv",
    "make_synthetic_dataset",
    "nmos",
    "nonlinear_map",
    "plcc",
    "predict",
    "predict_scores",
    "random_trials",
    "read_ply",
    "read_tlv_units",
    "rescale_to_range",
    "rmse",
    "screen_observers",
    "significance_from_scores",
    "significance_matrix",
    "slope_of_tqp",
    "srcc",
    "texture_mos",
    "zscore",
    "__version__",
]
