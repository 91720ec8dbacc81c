"""Raw impressions -> sparse binary interaction vectors.

Three steps: type-aware quantization of each feature column, a rank
one-hot, and a full cross of every quantized feature with the rank. Each
emitted indicator is encoded as a single integer id via

    id = ((f * B_max + b) * M) + k

where f is the feature's position in the (extended) schema, b its bin, k
the display rank (0 is the reserved "no rank" slot used by base item
features), B_max the per-feature bin budget, and M the rank multiplier.
The encoding is reversible with integer div/mod, which keeps every learned
weight attributable to a (feature, bin, rank) triple.

A row therefore expands to exactly 2d + 1 ids for d non-rank features:
one rank id, d base ids at rank slot 0, and d crossed ids at the clipped
display rank.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator

import numpy as np

from .core import FeatureSchema, FeatureSpec, HashConfig, Impression, ImpressionLog
from .errors import DecodingError, DomainError, EncodingError, SchemaError

if TYPE_CHECKING:  # pragma: no cover
    from .stats import PositionPropensityTable, PriorTable

# Prior-derived columns appended to the declared schema when a fitted
# PriorTable is supplied. All are non-negative with long tails, hence
# logarithmic bins.
DERIVED_SPECS = (
    FeatureSpec("coec", "heavy_tailed", 16),
    FeatureSpec("ucoec", "heavy_tailed", 32),
    FeatureSpec("user_impressions", "heavy_tailed", 32),
)


def extended_schema(schema: FeatureSchema, with_derived: bool = True) -> FeatureSchema:
    """Declared schema plus the prior-derived columns (in fixed order)."""
    if not with_derived:
        return schema
    derived_names = {s.name for s in DERIVED_SPECS}
    clash = derived_names.intersection(schema.names)
    if clash:
        raise SchemaError(
            f"declared feature names {sorted(clash)} collide with derived columns"
        )
    return FeatureSchema(schema.specs + DERIVED_SPECS)


@dataclass(frozen=True)
class SparseFeatureVector:
    """Strictly increasing interaction ids, each with implicit value 1."""

    ids: tuple[int, ...]

    def __post_init__(self) -> None:
        for a, b in zip(self.ids, self.ids[1:]):
            if b <= a:
                raise SchemaError("ids must be strictly increasing")
        if self.ids and self.ids[0] < 0:
            raise SchemaError("ids must be non-negative")

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class FeatureMatrix:
    """Featurized batch: row i holds the sorted ids of input row i.

    Every row has the same width (2d + 1), so the batch is a dense integer
    matrix; iterating yields :class:`SparseFeatureVector` rows.
    """

    ids: np.ndarray  # (n_rows, 2d + 1) int64, sorted within each row

    def __len__(self) -> int:
        return self.ids.shape[0]

    @property
    def width(self) -> int:
        return self.ids.shape[1]

    def __getitem__(self, i: int) -> SparseFeatureVector:
        return SparseFeatureVector(tuple(int(v) for v in self.ids[i]))

    def __iter__(self) -> Iterator[SparseFeatureVector]:
        for i in range(len(self)):
            yield self[i]

    def same_as(self, other: "FeatureMatrix") -> bool:
        return np.array_equal(self.ids, other.ids)


def quantize(value: float, kind: str) -> int:
    """Map a raw scalar to its integer bin for the given feature kind.

    categorical -> identity (integers in [0, 10)); proportion on [0, 1] ->
    floor(v * 20); similarity on [-1, 1] -> floor((v + 1) * 5);
    heavy_tailed -> floor(ln(1 + max(0, v)) * 2).
    """
    if kind == "rank":
        raise SchemaError("rank columns are one-hot encoded, not quantized")
    v = np.float64(value)
    if not np.isfinite(v):
        raise DomainError(f"non-finite value {value!r} for kind {kind!r}")
    if kind == "categorical":
        if v != np.floor(v) or v < 0 or v >= 10:
            raise DomainError(
                f"categorical values must be integers in [0, 10), got {value!r}"
            )
        return int(v)
    if kind == "proportion":
        if v < 0.0 or v > 1.0:
            raise DomainError(f"proportion values must lie in [0, 1], got {value!r}")
        return int(np.floor(v * 20.0))
    if kind == "similarity":
        if v < -1.0 or v > 1.0:
            raise DomainError(f"similarity values must lie in [-1, 1], got {value!r}")
        return int(np.floor((v + 1.0) * 5.0))
    if kind == "heavy_tailed":
        return int(np.floor(np.log(1.0 + np.maximum(np.float64(0.0), v)) * 2.0))
    raise SchemaError(f"unknown feature kind {kind!r}")


def _quantize_column(values: np.ndarray, kind: str, name: str) -> np.ndarray:
    """Vectorized quantize over one column; names the first offending row."""
    v = np.asarray(values, dtype=np.float64)

    def first_bad(mask, reason):
        row = int(np.argmax(mask))
        raise DomainError(f"{reason} in column {name!r} at row {row}: {v[row]!r}")

    bad = ~np.isfinite(v)
    if bad.any():
        first_bad(bad, "non-finite value")
    if kind == "categorical":
        bad = (v != np.floor(v)) | (v < 0) | (v >= 10)
        if bad.any():
            first_bad(bad, "categorical value outside integer [0, 10)")
        return v.astype(np.int64)
    if kind == "proportion":
        bad = (v < 0.0) | (v > 1.0)
        if bad.any():
            first_bad(bad, "proportion outside [0, 1]")
        return np.floor(v * 20.0).astype(np.int64)
    if kind == "similarity":
        bad = (v < -1.0) | (v > 1.0)
        if bad.any():
            first_bad(bad, "similarity outside [-1, 1]")
        return np.floor((v + 1.0) * 5.0).astype(np.int64)
    if kind == "heavy_tailed":
        return np.floor(np.log(1.0 + np.maximum(0.0, v)) * 2.0).astype(np.int64)
    raise SchemaError(f"unknown feature kind {kind!r}")


def hash_interaction(feature_index: int, bin_: int, rank: int, cfg: HashConfig) -> int:
    """Encode a (feature, bin, rank) triple as one integer id.

    Pure integer arithmetic; rank slot 0 is reserved for "no rank" (base
    item features).
    """
    if feature_index < 0:
        raise EncodingError(f"feature index must be >= 0, got {feature_index}")
    if not 0 <= bin_ < cfg.max_bins_per_feature:
        raise EncodingError(
            f"bin {bin_} outside [0, {cfg.max_bins_per_feature}) for feature "
            f"{feature_index}"
        )
    if not 0 <= rank <= cfg.overflow_rank:
        raise EncodingError(
            f"rank {rank} outside [0, {cfg.overflow_rank}] (overflow slot included)"
        )
    return (
        feature_index * cfg.max_bins_per_feature + bin_
    ) * cfg.rank_multiplier + rank


def unhash_interaction(
    id_: int, cfg: HashConfig, n_features: int | None = None
) -> tuple[int, int, int]:
    """Exact left inverse of :func:`hash_interaction`: id -> (f, bin, rank)."""
    if id_ < 0:
        raise DecodingError(f"interaction ids are non-negative, got {id_}")
    rank = id_ % cfg.rank_multiplier
    rest = id_ // cfg.rank_multiplier
    bin_ = rest % cfg.max_bins_per_feature
    feature_index = rest // cfg.max_bins_per_feature
    if rank > cfg.overflow_rank:
        raise DecodingError(f"id {id_} decodes to rank {rank} above the overflow slot")
    if n_features is not None and feature_index >= n_features:
        raise DecodingError(
            f"id {id_} decodes to feature index {feature_index} outside the schema"
        )
    return int(feature_index), int(bin_), int(rank)


def _check_hash_config(ext: FeatureSchema, cfg: HashConfig) -> None:
    worst = max(s.max_bins for s in ext)
    if cfg.max_bins_per_feature < worst:
        raise SchemaError(
            f"hash config allows {cfg.max_bins_per_feature} bins per feature but "
            f"the schema declares up to {worst}"
        )


def _derived_columns(log: ImpressionLog, priors: "PriorTable") -> list[np.ndarray]:
    coec_col = priors.coec_values(log.item_id)
    ucoec_col = priors.ucoec_values(log.item_id)
    activity_col = priors.activity_values(log.user_id)
    return [coec_col, ucoec_col, activity_col]


def _value_columns(
    log: ImpressionLog, priors: "PriorTable | None", ext: FeatureSchema
) -> list[np.ndarray]:
    """One value array per extended-schema column (rank column included as-is)."""
    cols = [log.features[:, j] for j in range(len(log.schema))]
    if priors is not None:
        cols.extend(_derived_columns(log, priors))
    if len(cols) != len(ext):
        raise SchemaError(
            f"expected {len(ext)} value columns, built {len(cols)}"
        )
    return cols


def featurize_batch(
    log: ImpressionLog,
    priors: "PriorTable | None",
    position_table: "PositionPropensityTable | None",
    schema: FeatureSchema,
    cfg: HashConfig,
    override_rank: int | None = None,
) -> FeatureMatrix:
    """Columnar featurization: the fast integer-arithmetic kernel.

    Quantizes whole columns, then combines bins with the (clipped) rank
    column arithmetically. When ``priors`` is given, the coec / ucoec /
    user_impressions columns are injected before quantization.
    ``override_rank`` substitutes every display rank (used for the rank-1
    counterfactual). The first invalid row aborts with its row index.
    """
    if log.schema.names != schema.names:
        raise SchemaError("log schema does not match the requested schema")
    ext = extended_schema(schema, with_derived=priors is not None)
    _check_hash_config(ext, cfg)
    if priors is not None and position_table is None:
        raise SchemaError("a fitted position table must accompany the priors")

    n = len(log)
    if override_rank is None:
        k_eff = cfg.clip_rank(log.rank.astype(np.int64))
    else:
        if override_rank < 1:
            raise DomainError(f"override rank must be >= 1, got {override_rank}")
        k_eff = np.full(n, int(cfg.clip_rank(override_rank)), dtype=np.int64)

    cols = _value_columns(log, priors, ext)
    rank_idx = ext.rank_index
    b_max = cfg.max_bins_per_feature
    m = cfg.rank_multiplier

    blocks = [(rank_idx * b_max) * m + k_eff]
    for f, spec in enumerate(ext):
        if spec.kind == "rank":
            continue
        bins = _quantize_column(cols[f], spec.kind, spec.name)
        over = bins >= spec.max_bins
        if over.any():
            row = int(np.argmax(over))
            raise SchemaError(
                f"bin {int(bins[row])} >= max_bins {spec.max_bins} for column "
                f"{spec.name!r} at row {row}"
            )
        base = (f * b_max + bins) * m
        blocks.append(base)
        blocks.append(base + k_eff)

    ids = np.column_stack(blocks) if n else np.empty((0, 2 * (len(ext) - 1) + 1), np.int64)
    ids.sort(axis=1)
    return FeatureMatrix(ids=ids.astype(np.int64, copy=False))


def featurize(
    impression: Impression,
    priors: "PriorTable | None",
    position_table: "PositionPropensityTable | None",
    schema: FeatureSchema,
    cfg: HashConfig,
    override_rank: int | None = None,
) -> SparseFeatureVector:
    """Featurize one impression (same path as the batch kernel)."""
    log = ImpressionLog.from_impressions([impression], schema)
    return featurize_batch(log, priors, position_table, schema, cfg, override_rank)[0]


def featurize_string_reference(
    log: ImpressionLog,
    priors: "PriorTable | None",
    position_table: "PositionPropensityTable | None",
    schema: FeatureSchema,
    cfg: HashConfig,
    override_rank: int | None = None,
) -> FeatureMatrix:
    """String-keyed featurization baseline; bit-identical to the fast kernel.

    Builds every interaction key as text ("price:b5:xr12"), interns it in a
    vocabulary, and re-encodes to the integer ids of
    :func:`hash_interaction`. Exists only as the benchmark foil for the
    vectorized kernel.
    """
    if log.schema.names != schema.names:
        raise SchemaError("log schema does not match the requested schema")
    ext = extended_schema(schema, with_derived=priors is not None)
    _check_hash_config(ext, cfg)
    if priors is not None and position_table is None:
        raise SchemaError("a fitted position table must accompany the priors")
    if override_rank is not None and override_rank < 1:
        raise DomainError(f"override rank must be >= 1, got {override_rank}")

    cols = _value_columns(log, priors, ext)
    rank_idx = ext.rank_index
    rank_name = ext[rank_idx].name
    non_rank = [(f, s) for f, s in enumerate(ext) if s.kind != "rank"]
    overflow = cfg.overflow_rank

    vocab: dict[str, int] = {}

    def intern(key: str, f: int, b: int, k: int) -> int:
        id_ = vocab.get(key)
        if id_ is None:
            id_ = hash_interaction(f, b, k, cfg)
            vocab[key] = id_
        return id_

    n = len(log)
    out = np.empty((n, 2 * len(non_rank) + 1), dtype=np.int64)
    for i in range(n):
        k = override_rank if override_rank is not None else int(log.rank[i])
        k = min(k, overflow)
        row_ids = [intern(f"{rank_name}:r{k}", rank_idx, 0, k)]
        for f, spec in non_rank:
            try:
                b = quantize(cols[f][i], spec.kind)
            except DomainError as exc:
                raise DomainError(f"{exc} (column {spec.name!r}, row {i})") from exc
            if b >= spec.max_bins:
                raise SchemaError(
                    f"bin {b} >= max_bins {spec.max_bins} for column "
                    f"{spec.name!r} at row {i}"
                )
            stem = f"{spec.name}:b{b}"
            row_ids.append(intern(stem, f, b, 0))
            row_ids.append(intern(f"{stem}:xr{k}", f, b, k))
        row_ids.sort()
        out[i] = row_ids
    return FeatureMatrix(ids=out)
