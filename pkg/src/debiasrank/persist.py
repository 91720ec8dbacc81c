"""File formats: impression CSV, truth sidecar, schema, config, model file.

The model file is a versioned, diff-able text format. Floats are written
with ``repr`` (shortest round-tripping decimal) so save -> load is
lossless.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
import pandas as pd

from .core import FeatureSchema, FeatureSpec, HashConfig, ImpressionLog, LinearModel
from .errors import ConfigError, SchemaError
from .simulator import GroundTruth, SimulationConfig
from .stats import PositionPropensityTable, PriorTable

MODEL_MAGIC = "debiasrank-model"
MODEL_VERSION = 1
WEIGHT_WRITE_THRESHOLD = 1e-12

FIXED_COLUMNS = ("day", "session_id", "user_id", "item_id", "rank", "clicked")


# ---------------------------------------------------------------- schema ----

def write_schema(path, schema: FeatureSchema) -> None:
    lines = [f"{s.name}\t{s.kind}\t{s.max_bins}" for s in schema]
    Path(path).write_text("\n".join(lines) + "\n")


def read_schema(path) -> FeatureSchema:
    specs = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise SchemaError(f"schema line needs name<TAB>kind<TAB>max_bins: {raw!r}")
        specs.append(FeatureSpec(parts[0], parts[1], int(parts[2])))
    return FeatureSchema(tuple(specs))


# ------------------------------------------------------------- log CSV -----

def write_log_csv(path, log: ImpressionLog) -> None:
    """Header CSV: fixed columns then the non-rank feature columns in
    schema order (the rank feature reads from the fixed rank column)."""
    data = {
        "day": log.day,
        "session_id": log.session_id,
        "user_id": log.user_id,
        "item_id": log.item_id,
        "rank": log.rank,
        "clicked": log.clicked.astype(np.int64),
    }
    for j, spec in enumerate(log.schema):
        if spec.kind == "rank":
            continue
        data[spec.name] = log.features[:, j]
    pd.DataFrame(data).to_csv(path, index=False)


def read_log_csv(path, schema: FeatureSchema) -> ImpressionLog:
    df = pd.read_csv(
        path, dtype={"session_id": str, "user_id": str, "item_id": str}
    )
    for col in FIXED_COLUMNS:
        if col not in df.columns:
            raise SchemaError(f"log is missing fixed column {col!r}")
    n = len(df)
    features = np.empty((n, len(schema)), dtype=np.float64)
    for j, spec in enumerate(schema):
        if spec.kind == "rank":
            features[:, j] = df["rank"].to_numpy(dtype=np.float64)
            continue
        if spec.name not in df.columns:
            raise SchemaError(f"log is missing feature column {spec.name!r}")
        features[:, j] = df[spec.name].to_numpy(dtype=np.float64)
    return ImpressionLog(
        day=df["day"].to_numpy(dtype=np.int64),
        session_id=df["session_id"].to_numpy(dtype=str),
        user_id=df["user_id"].to_numpy(dtype=str),
        item_id=df["item_id"].to_numpy(dtype=str),
        rank=df["rank"].to_numpy(dtype=np.int64),
        clicked=df["clicked"].to_numpy(dtype=np.int64).astype(bool),
        features=features,
        schema=schema,
    )


# ---------------------------------------------------------------- truth ----

def write_truth(path, truth: GroundTruth) -> None:
    with open(path, "w") as fh:
        fh.write("user_id\titem_id\tr\n")
        for (u, i) in sorted(truth.relevance):
            fh.write(f"{u}\t{i}\t{truth.relevance[(u, i)]!r}\n")


def read_truth(path) -> GroundTruth:
    relevance: dict[tuple[str, str], float] = {}
    with open(path) as fh:
        header = fh.readline()
        if header.strip() != "user_id\titem_id\tr":
            raise SchemaError("truth file must start with 'user_id\\titem_id\\tr'")
        for raw in fh:
            u, i, r = raw.rstrip("\n").split("\t")
            relevance[(u, i)] = float(r)
    return GroundTruth(relevance=relevance, quality={})


# --------------------------------------------------------------- config ----

def write_sim_config(path, config: SimulationConfig) -> None:
    lines = []
    for f in dataclasses.fields(SimulationConfig):
        value = getattr(config, f.name)
        if f.name == "propensity_grid":
            value = ",".join(repr(v) for v in value)
        lines.append(f"{f.name}={value!r}" if isinstance(value, float)
                     else f"{f.name}={value}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_sim_config(path) -> SimulationConfig:
    known = {f.name: f for f in dataclasses.fields(SimulationConfig)}
    kwargs = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config lines must be key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if key == "propensity_grid":
            kwargs[key] = tuple(float(v) for v in value.split(","))
        elif known[key].type in ("int", int):
            kwargs[key] = int(value)
        else:
            kwargs[key] = float(value)
    return SimulationConfig(**kwargs)


# ---------------------------------------------------------------- model ----

def save_model(path, model: LinearModel, split_day: int) -> None:
    if model.priors is None or model.position_table is None:
        raise ConfigError("model must carry priors and a position table to be saved")
    priors, pos = model.priors, model.position_table
    cfg = model.hash_config
    lines = [
        f"{MODEL_MAGIC}\t{MODEL_VERSION}",
        f"c_value\t{model.c_value!r}",
        f"split_day\t{split_day}",
        f"rank_multiplier\t{cfg.rank_multiplier}",
        f"max_bins_per_feature\t{cfg.max_bins_per_feature}",
        f"max_rank\t{cfg.max_rank}",
        f"pos_alpha\t{pos.smoothing_alpha!r}",
        f"pos_beta\t{pos.smoothing_beta!r}",
        f"prior_alpha\t{priors.smoothing_alpha!r}",
        f"prior_beta\t{priors.smoothing_beta!r}",
        f"intercept\t{model.intercept!r}",
        f"global_ctr\t{priors.global_ctr!r}",
        "[schema]",
    ]
    lines += [f"{s.name}\t{s.kind}\t{s.max_bins}" for s in model.schema]
    lines.append("[position_ctr]")
    lines += [
        f"{k}\t{model.position_table.expected_ctr[k]!r}"
        for k in sorted(pos.expected_ctr)
    ]
    lines.append("[item_priors]")
    lines += [
        f"{item}\t{priors.clicks[item]!r}\t{priors.expected_clicks[item]!r}"
        for item in sorted(priors.clicks)
    ]
    lines.append("[user_activity]")
    lines += [f"{u}\t{priors.user_impressions[u]}" for u in sorted(priors.user_impressions)]
    lines.append("[weights]")
    lines += [
        f"{id_}\t{model.weights[id_]!r}"
        for id_ in sorted(model.weights)
        if abs(model.weights[id_]) > WEIGHT_WRITE_THRESHOLD
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> tuple[LinearModel, int]:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith(MODEL_MAGIC):
        raise ConfigError(f"{path} is not a model file")
    version = int(text[0].split("\t")[1])
    if version != MODEL_VERSION:
        raise ConfigError(f"unsupported model file version {version}")

    header: dict[str, str] = {}
    i = 1
    while i < len(text) and not text[i].startswith("["):
        key, value = text[i].split("\t")
        header[key] = value
        i += 1

    sections: dict[str, list[str]] = {}
    current = None
    for line in text[i:]:
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif line.strip():
            sections[current].append(line)

    for required in ("schema", "position_ctr", "item_priors", "user_activity",
                     "weights"):
        if required not in sections:
            raise ConfigError(f"model file is missing the [{required}] section")

    cfg = HashConfig(
        rank_multiplier=int(header["rank_multiplier"]),
        max_bins_per_feature=int(header["max_bins_per_feature"]),
        max_rank=int(header["max_rank"]),
    )
    specs = []
    for line in sections["schema"]:
        name, kind, max_bins = line.split("\t")
        specs.append(FeatureSpec(name, kind, int(max_bins)))
    schema = FeatureSchema(tuple(specs))

    position = PositionPropensityTable(
        expected_ctr={
            int(k): float(v)
            for k, v in (line.split("\t") for line in sections["position_ctr"])
        },
        smoothing_alpha=float(header["pos_alpha"]),
        smoothing_beta=float(header["pos_beta"]),
        k_max=cfg.max_rank,
    )

    clicks: dict[str, float] = {}
    expected: dict[str, float] = {}
    for line in sections["item_priors"]:
        item, c, e = line.split("\t")
        clicks[item] = float(c)
        expected[item] = float(e)
    alpha = float(header["prior_alpha"])
    beta = float(header["prior_beta"])
    priors = PriorTable(
        coec={
            item: (clicks[item] + alpha) / (expected[item] + beta) for item in clicks
        },
        global_ctr=float(header["global_ctr"]),
        clicks=clicks,
        expected_clicks=expected,
        user_impressions={
            u: int(c)
            for u, c in (line.split("\t") for line in sections["user_activity"])
        },
        smoothing_alpha=alpha,
        smoothing_beta=beta,
    )

    weights = {}
    for line in sections["weights"]:
        id_, w = line.split("\t")
        weights[int(id_)] = float(w)

    model = LinearModel(
        intercept=float(header["intercept"]),
        weights=weights,
        hash_config=cfg,
        schema=schema,
        c_value=float(header["c_value"]),
        priors=priors,
        position_table=position,
    )
    return model, int(header["split_day"])
