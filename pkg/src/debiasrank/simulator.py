"""Position-based click simulator with known latent relevance.

Clicks follow the PBM factorization: P(click | u, i, k) =
examination(k) * relevance(u, i). The examination curve defaults to the
grid-layout attention pattern (non-monotonic "golden triangle" values,
normalized to rank 1) scaled by ``base_examination``. The logging policy
is deliberately confounded: slates are ordered by item quality plus
Gaussian noise, so display rank correlates with relevance and a model can
shortcut via rank. Raw features are noisy functions of item quality and
user type, which keeps intrinsic relevance partially recoverable from
content alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FeatureSchema, FeatureSpec, ImpressionLog
from .errors import ConfigError, DomainError

# Grid-layout examination pattern, read row-major, normalized to rank 1.
GOLDEN_TRIANGLE_GRID = (
    1.00, 0.57, 0.40, 0.31,
    0.23, 0.18, 0.16, 0.13,
    0.11, 0.10, 0.09, 0.08,
)

# Raw feature columns emitted by the simulator (rank column first).
SIMULATOR_SCHEMA = FeatureSchema(
    (
        FeatureSpec("rank", "rank", 1),
        FeatureSpec("price", "heavy_tailed", 16),
        FeatureSpec("rating", "proportion", 21),
        FeatureSpec("review_volume", "heavy_tailed", 24),
        FeatureSpec("device", "categorical", 10),
        FeatureSpec("activity_level", "heavy_tailed", 16),
    )
)

N_USER_TYPES = 4

# Latent relevance: r(u, i) = sigmoid(REL_SCALE * q_i + AFF_SCALE * affinity
# + REL_OFFSET); affinity is a small per-(item, user type) taste term.
REL_SCALE = 2.0
AFF_SCALE = 0.3
REL_OFFSET = -0.9


@dataclass(frozen=True)
class SimulationConfig:
    n_items: int = 1200
    n_users: int = 2000
    n_sessions: int = 100_000
    slate_size: int = 12
    days: int = 45
    propensity_grid: tuple[float, ...] = GOLDEN_TRIANGLE_GRID
    base_examination: float = 0.55
    logging_policy_noise: float = 0.9
    confounding_strength: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n_items", "n_users", "n_sessions", "slate_size", "days"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.slate_size > self.n_items:
            raise ConfigError("slate_size cannot exceed n_items")
        if len(self.propensity_grid) < 2:
            raise ConfigError("propensity_grid needs at least two entries")
        if any(not 0.0 < g <= 1.0 for g in self.propensity_grid):
            raise ConfigError("propensity_grid values must lie in (0, 1]")
        if not 0.0 <= self.base_examination <= 1.0:
            raise ConfigError("base_examination must lie in [0, 1]")
        if self.logging_policy_noise < 0:
            raise ConfigError("logging_policy_noise must be >= 0")
        if not 0.0 <= self.confounding_strength <= 1.0:
            raise ConfigError("confounding_strength must lie in [0, 1]")


def examination_curve(config: SimulationConfig, n_ranks: int) -> np.ndarray:
    """Absolute examination probability for ranks 1..n_ranks.

    Ranks beyond the grid decay geometrically with the ratio of the last
    two grid values.
    """
    grid = np.asarray(config.propensity_grid, dtype=np.float64)
    if n_ranks <= len(grid):
        rel = grid[:n_ranks]
    else:
        ratio = grid[-1] / grid[-2]
        extra = grid[-1] * ratio ** np.arange(1, n_ranks - len(grid) + 1)
        rel = np.concatenate([grid, extra])
    return np.clip(config.base_examination * rel, 0.0, 1.0)


@dataclass
class GroundTruth:
    """Latent relevance for every (user, item) pair observed in the log,
    plus the per-item quality scalar the logging policy leaned on."""

    relevance: dict[tuple[str, str], float]
    quality: dict[str, float]


def relevance_labels(
    truth: GroundTruth, log: ImpressionLog, seed: int
) -> np.ndarray:
    """Bernoulli(r) draw per impression, independent of rank."""
    r = np.empty(len(log), dtype=np.float64)
    rel = truth.relevance
    for j, (u, i) in enumerate(zip(log.user_id, log.item_id)):
        key = (str(u), str(i))
        if key not in rel:
            raise DomainError(f"no ground-truth relevance for pair {key}")
        r[j] = rel[key]
    rng = np.random.default_rng(seed)
    return rng.random(len(log)) < r


def generate(config: SimulationConfig) -> tuple[ImpressionLog, GroundTruth]:
    """Simulate a click log under the PBM with a confounded logging policy."""
    rng = np.random.default_rng(config.seed)
    n_items, n_users = config.n_items, config.n_users
    n_sessions, slate = config.n_sessions, config.slate_size

    # Item side: quality and quality-correlated content features. The
    # numeric features are long-tailed on purpose: tail bins are rare, so
    # their crossed-with-rank weights are estimated from very few clicks.
    quality = rng.normal(0.0, 1.0, n_items)
    price = np.exp(1.5 - 0.45 * quality + 1.1 * rng.normal(size=n_items))
    # rating tracks the quality percentile with heavy noise: evenly
    # supported bins, but a weak proxy on its own (quality recovery needs
    # several features combined)
    q_pct = (np.argsort(np.argsort(quality)) + 0.5) / n_items
    rating = np.clip(0.15 + 0.70 * q_pct + 0.22 * rng.normal(size=n_items), 0.0, 1.0)
    review_volume = np.floor(
        np.exp(2.5 + 1.0 * quality + 1.3 * rng.normal(size=n_items))
    )
    affinity = rng.normal(0.0, 1.0, (n_items, N_USER_TYPES))

    # User side: type drives affinity and (noisily) the device feature.
    user_type = rng.integers(0, N_USER_TYPES, n_users)
    activity_level = np.exp(rng.normal(0.8, 1.1, n_users))

    session_user = rng.integers(0, n_users, n_sessions)
    session_day = 1 + (np.arange(n_sessions, dtype=np.int64) * config.days) // n_sessions
    device = user_type[session_user].astype(np.int64)
    scramble = rng.random(n_sessions) < 0.3
    device[scramble] = rng.integers(0, N_USER_TYPES, int(scramble.sum()))

    # Each session sees a uniform random candidate slate (the filtered-list
    # setting); the confounded logging policy then orders the candidates by
    # confounding * standardized quality + noise, so display rank
    # correlates with quality without being deterministic.
    zq = (quality - quality.mean()) / max(quality.std(), 1e-12)
    slate_items = np.empty((n_sessions, slate), dtype=np.int64)
    chunk = 4096
    for start in range(0, n_sessions, chunk):
        stop = min(start + chunk, n_sessions)
        m = stop - start
        draw = rng.random((m, n_items))
        candidates = np.argpartition(draw, slate - 1, axis=1)[:, :slate]
        score = config.confounding_strength * zq[candidates]
        score = score + config.logging_policy_noise * rng.normal(size=(m, slate))
        order = np.argsort(-score, axis=1, kind="stable")
        slate_items[start:stop] = np.take_along_axis(candidates, order, axis=1)

    # Flatten sessions x slots into impressions.
    sess_idx = np.repeat(np.arange(n_sessions, dtype=np.int64), slate)
    item_idx = slate_items.ravel()
    ranks = np.tile(np.arange(1, slate + 1, dtype=np.int64), n_sessions)
    user_idx = session_user[sess_idx]

    zr = (
        REL_SCALE * quality[item_idx]
        + AFF_SCALE * affinity[item_idx, user_type[user_idx]]
        + REL_OFFSET
    )
    relevance = 1.0 / (1.0 + np.exp(-zr))
    exam = examination_curve(config, slate)[ranks - 1]
    clicked = rng.random(len(ranks)) < exam * relevance

    item_ids = np.array([f"i{j:05d}" for j in range(n_items)])
    user_ids = np.array([f"u{j:05d}" for j in range(n_users)])
    session_ids = np.array([f"s{j:07d}" for j in range(n_sessions)])

    features = np.column_stack(
        [
            ranks.astype(np.float64),
            price[item_idx],
            rating[item_idx],
            review_volume[item_idx],
            device[sess_idx].astype(np.float64),
            activity_level[user_idx],
        ]
    )

    log = ImpressionLog(
        day=session_day[sess_idx],
        session_id=session_ids[sess_idx],
        user_id=user_ids[user_idx],
        item_id=item_ids[item_idx],
        rank=ranks,
        clicked=clicked,
        features=features,
        schema=SIMULATOR_SCHEMA,
    )

    rel_map: dict[tuple[str, str], float] = {}
    u_arr, i_arr = log.user_id, log.item_id
    for j in range(len(log)):
        rel_map[(str(u_arr[j]), str(i_arr[j]))] = float(relevance[j])
    truth = GroundTruth(
        relevance=rel_map,
        quality={str(item_ids[j]): float(quality[j]) for j in range(n_items)},
    )
    return log, truth
