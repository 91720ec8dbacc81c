"""Domain types and the linear click model.

The model is a sparse logistic regression over binary interaction features:
a rank one-hot, one id per quantized item feature, and one id per
(feature, rank) conjunction. The logit is the plain sum of the weights of
the active ids plus an unregularized intercept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Iterator, Sequence

import numpy as np

from .errors import ConfigError, InvalidFeatureError, SchemaError

if TYPE_CHECKING:  # pragma: no cover
    from .featurizer import SparseFeatureVector
    from .stats import PositionPropensityTable, PriorTable

FEATURE_KINDS = ("categorical", "proportion", "similarity", "heavy_tailed", "rank")


@dataclass(frozen=True)
class FeatureSpec:
    """One declared raw feature column: its name, kind, and bin budget."""

    name: str
    kind: str
    max_bins: int

    def __post_init__(self) -> None:
        if self.kind not in FEATURE_KINDS:
            raise SchemaError(f"unknown feature kind {self.kind!r} for {self.name!r}")
        if self.max_bins < 1:
            raise SchemaError(f"max_bins must be >= 1 for {self.name!r}")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered feature declaration. Exactly one column must have kind 'rank'."""

    specs: tuple[FeatureSpec, ...]

    def __post_init__(self) -> None:
        names = [s.name for s in self.specs]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        rank_cols = [i for i, s in enumerate(self.specs) if s.kind == "rank"]
        if len(rank_cols) != 1:
            raise SchemaError(
                f"schema must declare exactly one rank column, found {len(rank_cols)}"
            )

    @property
    def rank_index(self) -> int:
        return next(i for i, s in enumerate(self.specs) if s.kind == "rank")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.specs)

    def __len__(self) -> int:
        return len(self.specs)

    def __iter__(self) -> Iterator[FeatureSpec]:
        return iter(self.specs)

    def __getitem__(self, i: int) -> FeatureSpec:
        return self.specs[i]


@dataclass(frozen=True)
class HashConfig:
    """Parameters of the reversible interaction-id encoding.

    An id encodes a (feature, bin, rank) triple as
    ``((f * max_bins_per_feature + b) * rank_multiplier) + k``. The
    multiplier must exceed the largest encodable rank (overflow slot
    included) so the rank can be recovered by ``id mod rank_multiplier``.
    Ranks above ``max_rank`` all share the overflow slot ``max_rank + 1``.
    """

    rank_multiplier: int = 10_000
    max_bins_per_feature: int = 64
    max_rank: int = 50

    def __post_init__(self) -> None:
        if self.max_rank < 1 or self.max_bins_per_feature < 1:
            raise ConfigError("max_rank and max_bins_per_feature must be >= 1")
        if self.rank_multiplier <= self.max_rank + 1:
            raise ConfigError(
                f"rank_multiplier ({self.rank_multiplier}) must exceed "
                f"max_rank + 1 ({self.max_rank + 1})"
            )

    @property
    def overflow_rank(self) -> int:
        return self.max_rank + 1

    def clip_rank(self, rank):
        """Map ranks above max_rank onto the shared overflow slot."""
        return np.minimum(rank, self.overflow_rank)


@dataclass(frozen=True)
class Impression:
    """One logged (user, item, rank, click) event with raw feature values.

    ``raw_features`` is aligned with the schema; the entry at the schema's
    rank column equals ``rank``.
    """

    day: int
    session_id: str
    user_id: str
    item_id: str
    rank: int
    clicked: bool
    raw_features: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ConfigError(f"rank must be >= 1, got {self.rank}")
        if self.day < 1:
            raise ConfigError(f"day must be >= 1, got {self.day}")


@dataclass
class ImpressionLog:
    """Columnar impression log: one numpy array per field.

    This is the in-memory working form; it behaves as a sequence of
    :class:`Impression` rows while keeping featurization and statistics
    vectorized. ``features`` columns follow ``schema`` order and the rank
    column mirrors ``rank``.
    """

    day: np.ndarray
    session_id: np.ndarray
    user_id: np.ndarray
    item_id: np.ndarray
    rank: np.ndarray
    clicked: np.ndarray
    features: np.ndarray
    schema: FeatureSchema

    def __post_init__(self) -> None:
        n = len(self.day)
        for name in ("session_id", "user_id", "item_id", "rank", "clicked"):
            if len(getattr(self, name)) != n:
                raise ConfigError(f"column {name} has mismatched length")
        if self.features.shape != (n, len(self.schema)):
            raise SchemaError(
                f"feature block shape {self.features.shape} does not match "
                f"{n} rows x {len(self.schema)} schema columns"
            )

    @classmethod
    def from_impressions(
        cls, rows: Sequence[Impression], schema: FeatureSchema
    ) -> "ImpressionLog":
        feats = np.array([r.raw_features for r in rows], dtype=np.float64)
        if len(rows) == 0:
            feats = np.empty((0, len(schema)), dtype=np.float64)

        def strs(values):
            return np.array(values, dtype=str) if rows else np.empty(0, dtype="<U1")

        return cls(
            day=np.array([r.day for r in rows], dtype=np.int64),
            session_id=strs([r.session_id for r in rows]),
            user_id=strs([r.user_id for r in rows]),
            item_id=strs([r.item_id for r in rows]),
            rank=np.array([r.rank for r in rows], dtype=np.int64),
            clicked=np.array([r.clicked for r in rows], dtype=bool),
            features=feats,
            schema=schema,
        )

    def __len__(self) -> int:
        return len(self.day)

    def __getitem__(self, i: int) -> Impression:
        return Impression(
            day=int(self.day[i]),
            session_id=str(self.session_id[i]),
            user_id=str(self.user_id[i]),
            item_id=str(self.item_id[i]),
            rank=int(self.rank[i]),
            clicked=bool(self.clicked[i]),
            raw_features=tuple(float(v) for v in self.features[i]),
        )

    def __iter__(self) -> Iterator[Impression]:
        for i in range(len(self)):
            yield self[i]

    def select(self, mask: np.ndarray) -> "ImpressionLog":
        """Row subset; ``mask`` is a boolean or index array."""
        return ImpressionLog(
            day=self.day[mask],
            session_id=self.session_id[mask],
            user_id=self.user_id[mask],
            item_id=self.item_id[mask],
            rank=self.rank[mask],
            clicked=self.clicked[mask],
            features=self.features[mask],
            schema=self.schema,
        )


def as_log(log, schema: FeatureSchema | None = None) -> ImpressionLog:
    """Coerce a sequence of Impression (or an ImpressionLog) to columnar form."""
    if isinstance(log, ImpressionLog):
        return log
    rows = list(log)
    if schema is None:
        raise SchemaError("a schema is required to build a log from impression rows")
    return ImpressionLog.from_impressions(rows, schema)


@dataclass(frozen=True)
class LinearModel:
    """Intercept + weight table over interaction ids, plus scoring context.

    The priors and position table fitted on the training window travel with
    the model so new impressions can be featurized (and therefore scored)
    without access to the original log.
    """

    intercept: float
    weights: dict[int, float]
    hash_config: HashConfig
    schema: FeatureSchema
    c_value: float
    priors: "PriorTable | None" = None
    position_table: "PositionPropensityTable | None" = None
    # sorted id/value arrays derived from `weights` for vectorized scoring
    _weight_ids: np.ndarray = field(init=False, repr=False, compare=False)
    _weight_values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.c_value <= 0:
            raise ConfigError("c_value must be > 0")
        ids = np.fromiter(self.weights.keys(), dtype=np.int64, count=len(self.weights))
        vals = np.fromiter(
            self.weights.values(), dtype=np.float64, count=len(self.weights)
        )
        order = np.argsort(ids)
        ids, vals = ids[order], vals[order]
        if not np.isfinite(self.intercept) or not np.all(np.isfinite(vals)):
            raise ConfigError("model weights must be finite")
        if ids.size:
            if ids[0] < 0:
                raise InvalidFeatureError(f"negative interaction id {ids[0]}")
            ks = ids % self.hash_config.rank_multiplier
            bad = ks > self.hash_config.overflow_rank
            if bad.any():
                raise InvalidFeatureError(
                    f"id {int(ids[np.argmax(bad)])} decodes to rank "
                    f"{int(ks[np.argmax(bad)])} above the overflow slot"
                )
        object.__setattr__(self, "_weight_ids", ids)
        object.__setattr__(self, "_weight_values", vals)

    def weight_lookup(self, ids: np.ndarray) -> np.ndarray:
        """Per-id weights (0 for ids the model never saw). Vectorized."""
        pos = np.searchsorted(self._weight_ids, ids)
        pos = np.minimum(pos, max(len(self._weight_ids) - 1, 0))
        if len(self._weight_ids) == 0:
            return np.zeros(np.shape(ids), dtype=np.float64)
        hit = self._weight_ids[pos] == ids
        return np.where(hit, self._weight_values[pos], 0.0)


def sigmoid(z):
    """Numerically stable logistic function for scalars or arrays."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


def logit(model: LinearModel, features: "SparseFeatureVector | Iterable[int]") -> float:
    """Sum of the model weights over the active ids, plus the intercept.

    Ids absent from the weight table contribute 0. Every id must decode
    under the model's hash config.
    """
    ids = np.asarray(getattr(features, "ids", features), dtype=np.int64)
    if ids.size:
        if (ids < 0).any():
            raise InvalidFeatureError("negative interaction id in feature vector")
        ks = ids % model.hash_config.rank_multiplier
        if (ks > model.hash_config.overflow_rank).any():
            bad = int(ids[np.argmax(ks > model.hash_config.overflow_rank)])
            raise InvalidFeatureError(f"id {bad} does not decode under the hash config")
    return float(model.intercept + model.weight_lookup(ids).sum())


def predict_proba(
    model: LinearModel, features: "SparseFeatureVector | Iterable[int]"
) -> float:
    """Click probability sigma(logit), strictly inside (0, 1)."""
    p = sigmoid(logit(model, features))
    # sigma saturates to exactly 0/1 in float past ~|z| = 37; clamp open interval
    tiny = math.ulp(0.0)
    return min(max(p, tiny), 1.0 - 2**-53)
