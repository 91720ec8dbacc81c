"""AUC measurements: standard (biased past), relevance (de-biased), propensity.

All three reduce to the Mann-Whitney AUC with 0.5 credit for ties. They
differ only in which scores and labels are compared:

* standard: model probability at the observed rank vs. observed clicks —
  accuracy on the logged, position-confounded distribution.
* relevance: counterfactual rank-1 score vs. a position-free relevance
  signal. In simulation mode the signal is a label drawn from the known
  latent relevance; in log mode it is clicks restricted to one rank
  stratum, where position is constant by construction.
* propensity: the score "-rank" vs. clicks — how much of the click signal
  rank alone explains, i.e. how extreme the bias regime is.
"""

from __future__ import annotations

import numpy as np

from .core import ImpressionLog, LinearModel
from .errors import ConfigError, DegenerateLabelsError, StratumError
from .scorer import counterfactual_scores, observed_scores
from .simulator import GroundTruth, relevance_labels


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean rank of their block."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    n = len(values)
    starts = np.empty(n, dtype=bool)
    starts[0] = True
    starts[1:] = sorted_vals[1:] != sorted_vals[:-1]
    group_start = np.flatnonzero(starts)
    group_size = np.diff(np.append(group_start, n))
    avg = group_start + (group_size + 1) / 2.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(avg, group_size)
    return ranks


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(score_pos = score_neg)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ConfigError("scores and labels must be 1-d arrays of equal length")
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabelsError(
            f"AUC needs both classes, got {n_pos} positives / {n_neg} negatives"
        )
    ranks = _average_ranks(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def standard_auc(model: LinearModel, log: ImpressionLog) -> float:
    """AUC of the model at the observed rank against observed clicks."""
    return auc(observed_scores(model, log), log.clicked)


def relevance_auc(
    model: LinearModel,
    log: ImpressionLog,
    truth: GroundTruth | None = None,
    rank_stratum: int | None = None,
    seed: int = 0,
) -> float:
    """AUC of counterfactual rank-1 scores against a position-free signal.

    Exactly one of ``truth`` (simulation mode: labels drawn from latent
    relevance) or ``rank_stratum`` (log mode: clicks within a single rank)
    must be provided.
    """
    if (truth is None) == (rank_stratum is None):
        raise ConfigError("provide exactly one of truth or rank_stratum")
    if truth is not None:
        labels = relevance_labels(truth, log, seed)
        return auc(counterfactual_scores(model, log), labels)
    stratum = log.select(log.rank == rank_stratum)
    if len(stratum) == 0:
        raise StratumError(f"rank stratum {rank_stratum} is empty")
    return auc(counterfactual_scores(model, stratum), stratum.clicked)


def propensity_auc(log: ImpressionLog) -> float:
    """AUC achieved by rank alone (lower rank scored higher)."""
    return auc(-log.rank.astype(np.float64), log.clicked)
