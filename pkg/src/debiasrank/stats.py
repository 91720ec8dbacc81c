"""Statistical prior features computed from a training log.

Position CTR baselines give the clicks an average item would collect at
each display rank; COEC divides an item's observed clicks by that
positional expectation, turning a visibility-confounded click count into a
normalized utility signal (1.0 = exactly as expected for its slots).
UCOEC further divides by the global CTR. All estimators use additive
(alpha, beta) smoothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ImpressionLog
from .errors import DivisionHazardError, EmptyInputError

DEFAULT_ALPHA = 1.0
DEFAULT_BETA = 20.0


@dataclass
class PositionPropensityTable:
    """Per-rank expected CTR baselines with additive smoothing.

    Ranks observed in the fitting log have explicit entries; every other
    rank (and everything above ``k_max``) inherits the overflow slot
    ``k_max + 1``.
    """

    expected_ctr: dict[int, float]
    smoothing_alpha: float
    smoothing_beta: float
    k_max: int
    _dense: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.smoothing_alpha < 0 or self.smoothing_beta <= 0:
            raise DivisionHazardError(
                "position smoothing requires alpha >= 0 and beta > 0"
            )
        overflow = self.k_max + 1
        if overflow not in self.expected_ctr:
            raise EmptyInputError("position table is missing the overflow slot")
        for k, v in self.expected_ctr.items():
            if v < 0 or not np.isfinite(v):
                raise DivisionHazardError(f"expected CTR at rank {k} must be >= 0")
        fallback = self.expected_ctr[overflow]
        dense = np.full(overflow + 1, fallback, dtype=np.float64)
        for k, v in self.expected_ctr.items():
            dense[k] = v
        object.__setattr__(self, "_dense", dense)

    @property
    def overflow_rank(self) -> int:
        return self.k_max + 1

    def expected(self, rank: int) -> float:
        """Expected CTR for one rank (overflow value for unseen ranks)."""
        if rank < 1:
            raise EmptyInputError(f"rank must be >= 1, got {rank}")
        return float(self._dense[min(rank, self.overflow_rank)])

    def expected_array(self, ranks: np.ndarray) -> np.ndarray:
        k = np.minimum(np.asarray(ranks, dtype=np.int64), self.overflow_rank)
        return self._dense[k]


def fit_position_ctr(
    log: ImpressionLog,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    k_max: int = 50,
) -> PositionPropensityTable:
    """Fit (clicks_k + alpha) / (impressions_k + beta) for every observed rank."""
    if len(log) == 0:
        raise EmptyInputError("cannot fit position CTR on an empty log")
    overflow = k_max + 1
    k_eff = np.minimum(log.rank, overflow)
    impressions = np.bincount(k_eff, minlength=overflow + 1)
    clicks = np.bincount(k_eff, weights=log.clicked.astype(np.float64),
                         minlength=overflow + 1)
    table: dict[int, float] = {}
    for k in range(1, overflow + 1):
        if impressions[k] > 0 or k == overflow:
            table[k] = (clicks[k] + alpha) / (impressions[k] + beta)
    return PositionPropensityTable(
        expected_ctr=table, smoothing_alpha=alpha, smoothing_beta=beta, k_max=k_max
    )


@dataclass
class PriorTable:
    """Per-item COEC (with raw accumulators), global CTR, and user activity.

    The click / expected-click accumulators allow the table to be refit
    incrementally and make the serialized form self-describing. User
    impression counts feed the derived user-activity feature.
    """

    coec: dict[str, float]
    global_ctr: float
    clicks: dict[str, float]
    expected_clicks: dict[str, float]
    user_impressions: dict[str, int]
    smoothing_alpha: float = DEFAULT_ALPHA
    smoothing_beta: float = DEFAULT_BETA
    _item_keys: np.ndarray = field(init=False, repr=False, compare=False)
    _item_coec: np.ndarray = field(init=False, repr=False, compare=False)
    _user_keys: np.ndarray = field(init=False, repr=False, compare=False)
    _user_counts: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        for item, v in self.coec.items():
            if v < 0 or not np.isfinite(v):
                raise DivisionHazardError(f"COEC for {item!r} must be finite and >= 0")
        if not 0.0 <= self.global_ctr <= 1.0:
            raise DivisionHazardError(
                f"global CTR must lie in [0, 1], got {self.global_ctr}"
            )
        items = sorted(self.coec)
        object.__setattr__(self, "_item_keys", np.array(items, dtype=str))
        object.__setattr__(
            self,
            "_item_coec",
            np.array([self.coec[i] for i in items], dtype=np.float64),
        )
        users = sorted(self.user_impressions)
        object.__setattr__(self, "_user_keys", np.array(users, dtype=str))
        object.__setattr__(
            self,
            "_user_counts",
            np.array([self.user_impressions[u] for u in users], dtype=np.float64),
        )

    @property
    def cold_start_coec(self) -> float:
        """COEC assigned to items unseen during fitting: alpha / beta."""
        if self.smoothing_beta == 0:
            raise DivisionHazardError("cold-start COEC undefined with beta = 0")
        return self.smoothing_alpha / self.smoothing_beta

    def coec_for(self, item_id: str) -> float:
        return self.coec.get(item_id, self.cold_start_coec)

    def _lookup(self, keys: np.ndarray, values: np.ndarray, queries: np.ndarray,
                default: float) -> np.ndarray:
        queries = np.asarray(queries, dtype=str)
        if len(keys) == 0:
            return np.full(len(queries), default, dtype=np.float64)
        pos = np.searchsorted(keys, queries)
        pos = np.minimum(pos, len(keys) - 1)
        hit = keys[pos] == queries
        return np.where(hit, values[pos], default)

    def coec_values(self, item_ids: np.ndarray) -> np.ndarray:
        return self._lookup(self._item_keys, self._item_coec, item_ids,
                            self.cold_start_coec)

    def ucoec_values(self, item_ids: np.ndarray) -> np.ndarray:
        if self.global_ctr <= 0:
            raise DivisionHazardError("UCOEC undefined: global CTR is 0")
        return self.coec_values(item_ids) / self.global_ctr

    def activity_values(self, user_ids: np.ndarray) -> np.ndarray:
        return self._lookup(self._user_keys, self._user_counts, user_ids, 0.0)


def global_ctr(log: ImpressionLog) -> float:
    """Total clicks over total impressions."""
    if len(log) == 0:
        raise EmptyInputError("cannot compute global CTR on an empty log")
    return float(log.clicked.sum()) / len(log)


def coec(
    item_id: str,
    log: ImpressionLog,
    position_table: PositionPropensityTable,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
) -> float:
    """(item clicks + alpha) / (sum of positional expected CTR + beta).

    With alpha = beta = 0 this is the exact clicks-over-expected-clicks
    ratio; > 1 means the item out-clicked the average item shown at the
    same positions.
    """
    mask = log.item_id == np.asarray(item_id, dtype=str)
    if not mask.any():
        raise EmptyInputError(f"item {item_id!r} has no impressions in the log")
    clicks = float(log.clicked[mask].sum())
    expected = float(position_table.expected_array(log.rank[mask]).sum())
    denom = expected + beta
    if denom == 0:
        raise DivisionHazardError(
            f"COEC denominator is 0 for item {item_id!r} with beta = 0"
        )
    return (clicks + alpha) / denom


def ucoec(item_id: str, priors: PriorTable) -> float:
    """COEC normalized by global CTR."""
    if priors.global_ctr <= 0:
        raise DivisionHazardError("UCOEC undefined: global CTR is 0")
    return priors.coec_for(item_id) / priors.global_ctr


def fit_priors(
    log: ImpressionLog,
    position_table: PositionPropensityTable,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
) -> PriorTable:
    """Fold the training log into COEC, global CTR, and user-activity tables."""
    if len(log) == 0:
        raise EmptyInputError("cannot fit priors on an empty log")
    items, item_codes = np.unique(np.asarray(log.item_id, dtype=str),
                                  return_inverse=True)
    clicked = log.clicked.astype(np.float64)
    item_clicks = np.bincount(item_codes, weights=clicked, minlength=len(items))
    item_expected = np.bincount(
        item_codes,
        weights=position_table.expected_array(log.rank),
        minlength=len(items),
    )
    denom = item_expected + beta
    if (denom == 0).any():
        bad = items[int(np.argmax(denom == 0))]
        raise DivisionHazardError(
            f"COEC denominator is 0 for item {bad!r} with beta = 0"
        )
    coec_vals = (item_clicks + alpha) / denom

    users, user_codes = np.unique(np.asarray(log.user_id, dtype=str),
                                  return_inverse=True)
    user_counts = np.bincount(user_codes, minlength=len(users))

    return PriorTable(
        coec={str(i): float(v) for i, v in zip(items, coec_vals)},
        global_ctr=global_ctr(log),
        clicks={str(i): float(v) for i, v in zip(items, item_clicks)},
        expected_clicks={str(i): float(v) for i, v in zip(items, item_expected)},
        user_impressions={str(u): int(c) for u, c in zip(users, user_counts)},
        smoothing_alpha=alpha,
        smoothing_beta=beta,
    )
