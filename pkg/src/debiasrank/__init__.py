"""De-biased learning-to-rank from position-confounded click logs."""

from .core import (
    FeatureSchema,
    FeatureSpec,
    HashConfig,
    Impression,
    ImpressionLog,
    LinearModel,
    logit,
    predict_proba,
    sigmoid,
)
from .errors import DebiasRankError
from .featurizer import (
    SparseFeatureVector,
    extended_schema,
    featurize,
    featurize_batch,
    featurize_string_reference,
    hash_interaction,
    quantize,
    unhash_interaction,
)
from .metrics import auc, propensity_auc, relevance_auc, standard_auc
from .scorer import counterfactual_score, counterfactual_scores, explain, rerank
from .simulator import GroundTruth, SimulationConfig, generate, relevance_labels
from .stats import (
    PositionPropensityTable,
    PriorTable,
    coec,
    fit_position_ctr,
    fit_priors,
    global_ctr,
    ucoec,
)
from .trainer import Dataset, TrainConfig, build_dataset, fit, gradient, objective, sweep

__version__ = "0.1.0"

__all__ = [
    "DebiasRankError",
    "Dataset",
    "FeatureSchema",
    "FeatureSpec",
    "GroundTruth",
    "HashConfig",
    "Impression",
    "ImpressionLog",
    "LinearModel",
    "PositionPropensityTable",
    "PriorTable",
    "SimulationConfig",
    "SparseFeatureVector",
    "TrainConfig",
    "auc",
    "build_dataset",
    "coec",
    "counterfactual_score",
    "counterfactual_scores",
    "explain",
    "extended_schema",
    "featurize",
    "featurize_batch",
    "featurize_string_reference",
    "fit",
    "fit_position_ctr",
    "fit_priors",
    "generate",
    "global_ctr",
    "gradient",
    "hash_interaction",
    "logit",
    "objective",
    "predict_proba",
    "propensity_auc",
    "quantize",
    "relevance_auc",
    "relevance_labels",
    "rerank",
    "sigmoid",
    "standard_auc",
    "sweep",
    "ucoec",
    "unhash_interaction",
]
