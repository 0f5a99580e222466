"""Volume anomaly detection over per-minute tweet counts.

A one-feature isolation forest is fit on the counts of the occupied minute
windows of one trend; the highest-scoring windows, as many as the outlier
factor allows, are anomalous and every tweet inside them is an attack tweet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable, Sequence

import numpy as np

from .stream import TweetRecord

EULER_GAMMA = 0.5772156649
MIN_WINDOWS = 4


class DegenerateInputError(ValueError):
    """Raised by fit() when no split value exists (all samples identical)."""


class UnsortedInputError(ValueError):
    pass


@dataclass(frozen=True)
class MinuteWindow:
    window_start: datetime
    tweet_ids: tuple[int, ...]

    @property
    def count(self) -> int:
        return len(self.tweet_ids)


@dataclass(frozen=True)
class ForestParams:
    tree_count: int = 100
    subsample_size: int = 256
    outlier_factor: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.tree_count < 1:
            raise ValueError("tree_count must be positive")
        if self.subsample_size < 2:
            raise ValueError("subsample_size must be at least 2")
        if not 0.0 < self.outlier_factor <= 0.5:
            raise ValueError("outlier_factor must lie in (0, 0.5]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class Node:
    """Internal node when ``split`` is set, otherwise a leaf holding ``size`` samples."""

    size: int
    split: float | None = None
    left: "Node | None" = None
    right: "Node | None" = None

    def depth(self) -> int:
        if self.split is None:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())


@dataclass(frozen=True)
class IsolationForest:
    trees: tuple[Node, ...]
    trained_size: int
    params: ForestParams

    @property
    def sample_size(self) -> int:
        return min(self.params.subsample_size, self.trained_size)


@dataclass(frozen=True)
class WindowVerdict:
    window: MinuteWindow
    anomaly_score: float
    is_anomalous: bool


def harmonic(i: float) -> float:
    return math.log(i) + EULER_GAMMA


def average_path_length(n: int) -> float:
    """c(n): mean unsuccessful-search path length in a BST of n nodes.

    The closed form is applied for every n >= 2, so c(2) = 2*gamma - 1.
    """
    if n < 2:
        return 0.0
    return 2.0 * harmonic(n - 1) - 2.0 * (n - 1) / n


def group_minute_windows(tweets: Iterable[TweetRecord]) -> list[MinuteWindow]:
    windows: list[MinuteWindow] = []
    current: datetime | None = None
    ids: list[int] = []
    last: datetime | None = None
    for tweet in tweets:
        if last is not None and tweet.created_at < last:
            raise UnsortedInputError(f"tweet {tweet.tweet_id} is out of time order")
        last = tweet.created_at
        minute = tweet.created_at.replace(second=0, microsecond=0)
        if minute != current:
            if current is not None:
                windows.append(MinuteWindow(current, tuple(ids)))
            current, ids = minute, []
        ids.append(tweet.tweet_id)
    if current is not None:
        windows.append(MinuteWindow(current, tuple(ids)))
    return windows


def _build_tree(values: np.ndarray, depth: int, limit: int, rng: np.random.Generator) -> Node:
    n = len(values)
    if n <= 1 or depth >= limit:
        return Node(n)
    lo, hi = values.min(), values.max()
    if lo == hi:
        return Node(n)
    split = rng.uniform(lo, hi)
    while split <= lo:  # uniform() is half-open; the split must be strictly inside
        split = rng.uniform(lo, hi)
    mask = values < split
    return Node(
        n,
        float(split),
        _build_tree(values[mask], depth + 1, limit, rng),
        _build_tree(values[~mask], depth + 1, limit, rng),
    )


def fit(samples: Sequence[float], params: ForestParams = ForestParams()) -> IsolationForest:
    data = np.asarray(samples, dtype=float)
    if data.ndim != 1 or len(data) < 2:
        raise ValueError("fit needs at least two samples")
    if np.all(data == data[0]):
        raise DegenerateInputError("all samples are identical")
    rng = np.random.default_rng(params.seed)
    psi = min(params.subsample_size, len(data))
    limit = math.ceil(math.log2(psi))
    trees = []
    for _ in range(params.tree_count):
        sub = data[rng.choice(len(data), size=psi, replace=False)]
        trees.append(_build_tree(sub, 0, limit, rng))
    return IsolationForest(tuple(trees), len(data), params)


def path_length(tree: Node, value: float) -> float:
    depth = 0
    node = tree
    while node.split is not None:
        node = node.left if value < node.split else node.right
        depth += 1
    return depth + average_path_length(node.size)


def score(forest: IsolationForest, value: float) -> float:
    mean_h = sum(path_length(t, value) for t in forest.trees) / len(forest.trees)
    return 2.0 ** (-mean_h / average_path_length(forest.sample_size))


def score_windows(windows: Sequence[MinuteWindow], params: ForestParams) -> list[float] | None:
    """Anomaly score per window, or None when the input is degenerate."""
    counts = [w.count for w in windows]
    if len(counts) < MIN_WINDOWS or len(set(counts)) == 1:
        return None
    forest = fit(counts, params)
    cache: dict[int, float] = {}
    out = []
    for c in counts:
        if c not in cache:
            cache[c] = score(forest, c)
        out.append(cache[c])
    return out


def anomaly_budget(n_windows: int, outlier_factor: float) -> int:
    # Guard against float noise such as 0.1 * 30 = 3.0000000000000004.
    return math.ceil(round(outlier_factor * n_windows, 9))


def select_top(windows: Sequence[MinuteWindow], scores: Sequence[float], outlier_factor: float) -> set[int]:
    """Indices of the top-scoring windows; ties go to the larger count, then the earlier window."""
    k = anomaly_budget(len(windows), outlier_factor)
    order = sorted(
        range(len(windows)),
        key=lambda i: (-scores[i], -windows[i].count, windows[i].window_start),
    )
    return set(order[:k])


def detect_anomalous_windows(windows: Sequence[MinuteWindow], params: ForestParams = ForestParams()) -> list[WindowVerdict]:
    scores = score_windows(windows, params)
    if scores is None:
        # No information to rank on; report the neutral score.
        return [WindowVerdict(w, 0.5, False) for w in windows]
    flagged = select_top(windows, scores, params.outlier_factor)
    return [WindowVerdict(w, s, i in flagged) for i, (w, s) in enumerate(zip(windows, scores))]


def flag_attack_tweets(trend_stream: Sequence[TweetRecord], params: ForestParams = ForestParams()) -> set[int]:
    verdicts = detect_anomalous_windows(group_minute_windows(trend_stream), params)
    return {tid for v in verdicts if v.is_anomalous for tid in v.window.tweet_ids}

