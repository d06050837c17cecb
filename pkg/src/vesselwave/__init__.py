"""Retinal vessel segmentation with 2-D Morlet wavelet features.

Pipeline: load the working channel, invert it, extend the aperture border,
compute maximum Morlet response moduli over orientations at several scales,
z-score the per-image feature space, then classify each pixel with either a
Gaussian-mixture Bayes classifier or a linear minimum squared error
classifier.  Performance is measured with pooled, FOV-restricted ROC
analysis.
"""

from .classify import (
    GaussianMixture,
    GmmModel,
    LmseModel,
    ModelBundle,
    TrainingSet,
    bayes_decide,
    fit_gmm,
    fit_lmse,
    gmm_posterior,
    lmse_score,
    load_model,
    save_model,
    subsample,
)
from .errors import (
    DataError,
    DatasetError,
    ModelError,
    ParameterError,
    PipelineError,
    TrainingError,
)
from .evaluate import RocCurve, accuracy, confusion, observer_point, roc
from .features import FeatureStack, NormalizationStats, build_stack, normalize
from .imgio import derive_mask, extend_border, invert, load_channel, load_mask
from .pipeline import RunConfig, evaluate_split, leave_one_out, segment, train
from .synth import generate_dataset
from .wavelet import MorletParams, cwt_response, max_modulus, morlet_kernel

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "DatasetError",
    "FeatureStack",
    "GaussianMixture",
    "GmmModel",
    "LmseModel",
    "ModelBundle",
    "ModelError",
    "MorletParams",
    "NormalizationStats",
    "ParameterError",
    "PipelineError",
    "RocCurve",
    "RunConfig",
    "TrainingError",
    "TrainingSet",
    "accuracy",
    "bayes_decide",
    "build_stack",
    "confusion",
    "cwt_response",
    "derive_mask",
    "evaluate_split",
    "extend_border",
    "fit_gmm",
    "fit_lmse",
    "generate_dataset",
    "gmm_posterior",
    "invert",
    "leave_one_out",
    "lmse_score",
    "load_channel",
    "load_mask",
    "load_model",
    "max_modulus",
    "morlet_kernel",
    "normalize",
    "observer_point",
    "roc",
    "save_model",
    "segment",
    "subsample",
    "train",
    "__version__",
]
