"""Fake-trend decisions: attack labeling per trend, deletion join, two-rule tree.

A trend is fake when at least ``min_attack_tweets`` of its tweets are attack
tweets and more than ``deletion_ratio`` of those attack tweets were deleted.
"""

from __future__ import annotations

import bisect
import enum
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Iterable, Iterator, Mapping, Sequence

from . import anomaly, lexicon
from ._io import atomic_write, format_ts, parse_ts
from .anomaly import ForestParams
from .stream import (
    DEFAULT_HORIZON,
    DeletionNotice,
    StreamEvent,
    TrendTimeline,
    TweetRecord,
    extract_trend_mentions,
)


class Mode(str, enum.Enum):
    SAMPLE_1PCT = "sample_1pct"
    FULL = "full"


class Detector(str, enum.Enum):
    LEXICON = "lexicon"
    ISOLATION_FOREST = "isolation_forest"


DETECTOR_FOR_MODE = {Mode.SAMPLE_1PCT: Detector.LEXICON, Mode.FULL: Detector.ISOLATION_FOREST}


@dataclass(frozen=True)
class Thresholds:
    min_attack_tweets: int = 4
    deletion_ratio: float = 0.45
    gap: timedelta = timedelta(seconds=60)
    horizon: timedelta = DEFAULT_HORIZON


class DeletionIndex(dict):
    """tweet_id -> deleted_at. A later notice for the same tweet replaces the earlier one."""

    def add(self, notice: DeletionNotice) -> None:
        self[notice.tweet_id] = notice.deleted_at


@dataclass(frozen=True)
class TrendVerdict:
    trend_name: str
    attack_tweet_count: int
    deleted_attack_count: int
    deletion_ratio: float
    is_fake: bool
    detector: Detector
    decided_at: datetime | None

    def to_json(self) -> str:
        return json.dumps(
            {
                "trend_name": self.trend_name,
                "attack_tweet_count": self.attack_tweet_count,
                "deleted_attack_count": self.deleted_attack_count,
                "deletion_ratio": self.deletion_ratio,
                "is_fake": self.is_fake,
                "detector": self.detector.value,
                "decided_at": format_ts(self.decided_at) if self.decided_at else None,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_dict(cls, obj: Mapping) -> "TrendVerdict":
        decided = obj.get("decided_at")
        return cls(
            trend_name=obj["trend_name"],
            attack_tweet_count=int(obj["attack_tweet_count"]),
            deleted_attack_count=int(obj["deleted_attack_count"]),
            deletion_ratio=float(obj["deletion_ratio"]),
            is_fake=bool(obj["is_fake"]),
            detector=Detector(obj["detector"]),
            decided_at=parse_ts(decided) if decided else None,
        )


@dataclass(frozen=True)
class AttackEvent:
    trend_name: str
    window_start: datetime
    window_end: datetime
    participant_ids: frozenset[int]
    tweet_ids: frozenset[int]
    deleted_tweet_ids: frozenset[int]

    @property
    def key(self) -> tuple[str, datetime]:
        return self.trend_name, self.window_start

    def to_json(self) -> str:
        return json.dumps(
            {
                "trend_name": self.trend_name,
                "window_start": format_ts(self.window_start),
                "window_end": format_ts(self.window_end),
                "participant_ids": sorted(self.participant_ids),
                "tweet_ids": sorted(self.tweet_ids),
                "deleted_tweet_ids": sorted(self.deleted_tweet_ids),
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_dict(cls, obj: Mapping) -> "AttackEvent":
        return cls(
            trend_name=obj["trend_name"],
            window_start=parse_ts(obj["window_start"]),
            window_end=parse_ts(obj["window_end"]),
            participant_ids=frozenset(obj["participant_ids"]),
            tweet_ids=frozenset(obj["tweet_ids"]),
            deleted_tweet_ids=frozenset(obj["deleted_tweet_ids"]),
        )


def build_deletion_index(events: Iterable[StreamEvent]) -> DeletionIndex:
    index = DeletionIndex()
    for event in events:
        if isinstance(event, DeletionNotice):
            index.add(event)
    return index


def is_fake(attack_count: int, deletion_ratio: float, thresholds: Thresholds = Thresholds()) -> bool:
    return attack_count >= thresholds.min_attack_tweets and deletion_ratio > thresholds.deletion_ratio


def classify_trend(
    trend: str,
    attack_ids: Iterable[int],
    deletions: Mapping[int, datetime],
    thresholds: Thresholds = Thresholds(),
    detector: Detector = Detector.LEXICON,
    decided_at: datetime | None = None,
) -> TrendVerdict:
    attack_ids = set(attack_ids)
    count = len(attack_ids)
    deleted = sum(1 for tid in attack_ids if tid in deletions)
    ratio = deleted / count if count else 0.0
    return TrendVerdict(trend, count, deleted, ratio, is_fake(count, ratio, thresholds), detector, decided_at)


def extract_attack_events(
    trend_stream: Sequence[TweetRecord],
    deletions: Mapping[int, datetime],
    gap: timedelta = timedelta(seconds=60),
    trend_name: str | None = None,
) -> list[AttackEvent]:
    """Split a trend's time-sorted attack tweets into bursts.

    Consecutive tweets no more than ``gap`` apart share a burst.
    """
    events: list[AttackEvent] = []
    burst: list[TweetRecord] = []

    def close():
        events.append(
            AttackEvent(
                trend_name=trend_name or "",
                window_start=burst[0].created_at,
                window_end=burst[-1].created_at,
                participant_ids=frozenset(t.author_id for t in burst),
                tweet_ids=frozenset(t.tweet_id for t in burst),
                deleted_tweet_ids=frozenset(t.tweet_id for t in burst if t.tweet_id in deletions),
            )
        )

    for tweet in trend_stream:
        if burst and tweet.created_at - burst[-1].created_at > gap:
            close()
            burst = []
        burst.append(tweet)
    if burst:
        close()
    return events


# ------------------------------------------------------------- detection

@dataclass
class TrendStream:
    tweets: list[TweetRecord] = field(default_factory=list)
    mentions: list[tuple[str, ...]] = field(default_factory=list)


@dataclass
class TrendResult:
    verdict: TrendVerdict
    attack_ids: frozenset[int]
    events: list[AttackEvent]


@dataclass
class Detection:
    mode: Mode
    results: dict[str, TrendResult]
    deletions: DeletionIndex
    tweet_ids: list[int]

    @property
    def verdicts(self) -> list[TrendVerdict]:
        return [self.results[name].verdict for name in sorted(self.results)]

    @property
    def attack_tweet_ids(self) -> set[int]:
        return {tid for r in self.results.values() for tid in r.attack_ids}

    def fake_events(self) -> list[AttackEvent]:
        return [e for name in sorted(self.results) if self.results[name].verdict.is_fake
                for e in self.results[name].events]

    def all_events(self) -> list[AttackEvent]:
        return [e for name in sorted(self.results) for e in self.results[name].events]


class _CandidateCache:
    """Memoizes trend candidates by the snapshot range a timestamp's horizon covers."""

    def __init__(self, timeline: TrendTimeline, horizon: timedelta):
        self.times = [s.observed_at for s in timeline.snapshots]
        self.snapshots = timeline.snapshots
        self.horizon = horizon
        self.cache: dict[tuple[int, int], frozenset[str]] = {}

    def __call__(self, t: datetime) -> frozenset[str]:
        i = bisect.bisect_left(self.times, t - self.horizon)
        j = bisect.bisect_right(self.times, t + self.horizon)
        key = (i, j)
        names = self.cache.get(key)
        if names is None:
            names = frozenset(n for s in self.snapshots[i:j] for _, n in s.entries)
            self.cache[key] = names
        return names


def collect_trend_streams(
    events: Iterable[StreamEvent], timeline: TrendTimeline, horizon: timedelta = DEFAULT_HORIZON
) -> tuple[dict[str, TrendStream], DeletionIndex, list[int]]:
    """Single pass: route tweets to the trends they mention and index deletions."""
    streams: dict[str, TrendStream] = {}
    deletions = DeletionIndex()
    tweet_ids: list[int] = []
    candidates = _CandidateCache(timeline, horizon)
    for event in events:
        if isinstance(event, DeletionNotice):
            deletions.add(event)
            continue
        tweet_ids.append(event.tweet_id)
        active = candidates(event.created_at)
        if not active:
            continue
        mentions = tuple(extract_trend_mentions(event.text, active))
        for name in mentions:
            stream = streams.setdefault(name, TrendStream())
            stream.tweets.append(event)
            stream.mentions.append(mentions)
    return streams, deletions, tweet_ids


def label_attacks(stream: TrendStream, mode: Mode, params: ForestParams, deletions: Mapping[int, datetime]) -> set[int]:
    if mode is Mode.FULL:
        return anomaly.flag_attack_tweets(stream.tweets, params)
    # 1% path: an attack tweet is a deleted lexicon tweet.
    return {
        t.tweet_id
        for t, m in zip(stream.tweets, stream.mentions)
        if t.tweet_id in deletions and lexicon.classify_tweet(t, m).is_lexicon
    }


def classify_stream(
    name: str,
    stream: TrendStream,
    mode: Mode,
    params: ForestParams,
    deletions: Mapping[int, datetime],
    thresholds: Thresholds,
) -> TrendResult:
    attack_ids = label_attacks(stream, mode, params, deletions)
    attack_tweets = [t for t in stream.tweets if t.tweet_id in attack_ids]
    if attack_tweets:
        decided_at = max(
            max(t.created_at for t in attack_tweets),
            max((deletions[t.tweet_id] for t in attack_tweets if t.tweet_id in deletions), default=attack_tweets[0].created_at),
        )
    else:
        decided_at = stream.tweets[-1].created_at
    verdict = classify_trend(name, attack_ids, deletions, thresholds, DETECTOR_FOR_MODE[mode], decided_at)
    events = extract_attack_events(attack_tweets, deletions, thresholds.gap, trend_name=name)
    return TrendResult(verdict, frozenset(attack_ids), events)


def detect(
    events: Iterable[StreamEvent],
    timeline: TrendTimeline,
    mode: Mode | str = Mode.FULL,
    params: ForestParams = ForestParams(),
    thresholds: Thresholds = Thresholds(),
    threads: int = 1,
) -> Detection:
    mode = Mode(mode)
    streams, deletions, tweet_ids = collect_trend_streams(events, timeline, thresholds.horizon)
    names = sorted(streams)

    def run(name: str) -> TrendResult:
        return classify_stream(name, streams[name], mode, params, deletions, thresholds)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(zip(names, pool.map(run, names)))
    else:
        results = {name: run(name) for name in names}
    return Detection(mode, results, deletions, tweet_ids)


def classify_all_trends(
    events: Iterable[StreamEvent],
    timeline: TrendTimeline,
    mode: Mode | str = Mode.FULL,
    params: ForestParams = ForestParams(),
    thresholds: Thresholds = Thresholds(),
) -> list[TrendVerdict]:
    return detect(events, timeline, mode, params, thresholds).verdicts


# ------------------------------------------------------------------ I/O

def write_verdicts(path, verdicts: Iterable[TrendVerdict]) -> None:
    with atomic_write(path) as fh:
        for v in verdicts:
            fh.write(v.to_json() + "\n")


def read_verdicts(path) -> list[TrendVerdict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(TrendVerdict.from_dict(json.loads(line)))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}: line {line_no}: invalid verdict ({exc})") from None
    return out


def write_events(path, events: Iterable[AttackEvent]) -> None:
    with atomic_write(path) as fh:
        for e in events:
            fh.write(e.to_json() + "\n")


def read_events(path) -> Iterator[AttackEvent]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield AttackEvent.from_dict(json.loads(line))
