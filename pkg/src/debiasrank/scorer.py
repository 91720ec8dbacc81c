"""Counterfactual scoring, reranking, and weight explanation.

Scoring applies the do(K=1) intervention: the impression is featurized as
if it had been displayed at rank 1 (rank one-hot and all crossed ids
computed at k=1, base item ids untouched) and then pushed through the
model. The rank-1 propensity weight shifts every item's logit by the same
constant, so it cannot reorder items; what remains is the item's utility
in the top slot.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import (
    Impression,
    ImpressionLog,
    LinearModel,
    as_log,
    predict_proba,
    sigmoid,
)
from .errors import ConfigError
from .featurizer import extended_schema, featurize, featurize_batch, unhash_interaction


def _batch_scores(
    model: LinearModel, log: ImpressionLog, override_rank: int | None
) -> np.ndarray:
    matrix = featurize_batch(
        log,
        model.priors,
        model.position_table,
        model.schema,
        model.hash_config,
        override_rank=override_rank,
    )
    z = model.intercept + model.weight_lookup(matrix.ids).sum(axis=1)
    return sigmoid(z)


def observed_scores(model: LinearModel, log: ImpressionLog) -> np.ndarray:
    """Click probabilities at the logged display rank."""
    return _batch_scores(model, log, override_rank=None)


def counterfactual_scores(model: LinearModel, log: ImpressionLog) -> np.ndarray:
    """do(K=1) click probabilities for every row."""
    return _batch_scores(model, log, override_rank=1)


def counterfactual_score(model: LinearModel, impression: Impression) -> float:
    """do(K=1) click probability for one impression.

    Independent of the logged rank field by construction.
    """
    vec = featurize(
        impression,
        model.priors,
        model.position_table,
        model.schema,
        model.hash_config,
        override_rank=1,
    )
    return predict_proba(model, vec)


def rerank(model: LinearModel, candidates) -> list[str]:
    """Order candidate items by descending counterfactual score.

    Candidates must share a session; ties break by item_id ascending so
    output is deterministic.
    """
    log = as_log(candidates, getattr(candidates, "schema", None) or model.schema)
    if len(log) == 0:
        return []
    if len(np.unique(np.asarray(log.session_id, dtype=str))) > 1:
        raise ConfigError("rerank candidates must share a single session")
    scores = counterfactual_scores(model, log)
    items = [str(i) for i in log.item_id]
    order = sorted(range(len(items)), key=lambda j: (-scores[j], items[j]))
    return [items[j] for j in order]


class ExplainTerm(NamedTuple):
    feature: str
    bin: int
    rank: int
    weight: float


def explain(
    model: LinearModel, impression: Impression, top_n: int | None = None
) -> list[ExplainTerm]:
    """Decompose an impression's logit into named weight contributions.

    Each active id is decoded back to its (feature, bin, rank) triple and
    joined with the schema; zero contributions are dropped, the rest sort
    by descending magnitude. The returned weights plus the intercept
    reconstruct the logit exactly (truncation by ``top_n`` aside).
    """
    vec = featurize(
        impression, model.priors, model.position_table, model.schema, model.hash_config
    )
    ext = extended_schema(model.schema, with_derived=model.priors is not None)
    terms = []
    for id_ in vec.ids:
        w = model.weights.get(id_, 0.0)
        if w == 0.0:
            continue
        f, b, k = unhash_interaction(id_, model.hash_config, n_features=len(ext))
        terms.append(ExplainTerm(ext[f].name, b, k, float(w)))
    terms.sort(key=lambda t: (-abs(t.weight), t.feature, t.bin, t.rank))
    return terms if top_n is None else terms[:top_n]
