"""Exception hierarchy. Every error carries a short category used by the CLI."""


class DebiasRankError(Exception):
    """Base class for all toolkit errors."""

    category = "error"


class ConfigError(DebiasRankError):
    category = "config"


class SchemaError(DebiasRankError):
    """Schema/featurizer disagreement, e.g. a bin exceeding max_bins."""

    category = "schema"


class DomainError(DebiasRankError):
    """Raw feature value outside the domain of its declared kind."""

    category = "domain"


class EncodingError(DebiasRankError):
    """Invalid (feature, bin, rank) triple passed to the interaction hash."""

    category = "encoding"


class DecodingError(DebiasRankError):
    """Interaction id that does not decode under the hash config."""

    category = "decoding"


class InvalidFeatureError(DebiasRankError):
    """Feature vector contains an id the model's hash config cannot decode."""

    category = "invalid-feature"


class EmptyInputError(DebiasRankError):
    category = "empty-input"


class DivisionHazardError(DebiasRankError):
    """Zero denominator with zero smoothing."""

    category = "division-hazard"


class DegenerateLabelsError(DebiasRankError):
    """Labels contain a single class where both are required."""

    category = "degenerate-labels"


class OptimizationError(DebiasRankError):
    category = "optimization"


class NumericError(DebiasRankError):
    """Non-finite intermediate produced during optimization."""

    category = "numeric"


class StratumError(DebiasRankError):
    """Requested rank stratum is empty."""

    category = "stratum"


class EmptyTrainError(DebiasRankError):
    """No rows fall inside the training window."""

    category = "empty-train"
