"""Event data model, replay-file parsing, and trend timeline lookups.

Replay files are newline-delimited JSON, one tweet or deletion notice per
line. Trend timelines and account statuses are CSV. Everything parsed here is
immutable, so the structures can be shared across reader threads.
"""

from __future__ import annotations

import bisect
import csv
import enum
import heapq
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Iterator, Union

from ._io import atomic_write, format_ts, parse_ts
from .text import keyword_pattern, turkish_fold

logger = logging.getLogger(__name__)

DEFAULT_HORIZON = timedelta(hours=24)
DEFAULT_SKEW = timedelta(seconds=60)


class StreamError(ValueError):
    """Base class for replay input errors."""


class MalformedLineError(StreamError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class UnknownEventTypeError(StreamError):
    def __init__(self, line_no: int, event_type):
        self.line_no = line_no
        self.event_type = event_type
        super().__init__(f"line {line_no}: unknown event type {event_type!r}")


class OrderingError(StreamError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}")


class TimelineError(ValueError):
    def __init__(self, row_no: int, reason: str):
        self.row_no = row_no
        super().__init__(f"row {row_no}: {reason}")


@dataclass(frozen=True)
class TweetRecord:
    tweet_id: int
    author_id: int
    author_handle: str
    created_at: datetime
    account_created_at: datetime
    text: str
    is_retweet: bool = False

    @property
    def timestamp(self) -> datetime:
        return self.created_at


@dataclass(frozen=True)
class DeletionNotice:
    tweet_id: int
    author_id: int
    deleted_at: datetime

    @property
    def timestamp(self) -> datetime:
        return self.deleted_at


StreamEvent = Union[TweetRecord, DeletionNotice]


class Status(str, enum.Enum):
    ACTIVE = "active"
    SUSPENDED = "suspended"
    NOT_FOUND = "not_found"


@dataclass(frozen=True)
class AccountStatus:
    account_id: int
    status: Status
    checked_at: datetime


@dataclass(frozen=True)
class TrendSnapshot:
    observed_at: datetime
    entries: tuple[tuple[int, str], ...]

    @property
    def names(self) -> list[str]:
        return [name for _, name in self.entries]

    def top(self, n: int) -> list[str]:
        return [name for rank, name in self.entries if rank <= n]


@dataclass(frozen=True)
class TrendTimeline:
    snapshots: tuple[TrendSnapshot, ...] = ()
    _times: tuple[datetime, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        snaps = tuple(sorted(self.snapshots, key=lambda s: s.observed_at))
        object.__setattr__(self, "snapshots", snaps)
        object.__setattr__(self, "_times", tuple(s.observed_at for s in snaps))

    def __len__(self) -> int:
        return len(self.snapshots)

    def snapshot_at(self, t: datetime) -> TrendSnapshot | None:
        """Latest snapshot observed at or before ``t``."""
        i = bisect.bisect_right(self._times, t)
        return self.snapshots[i - 1] if i else None

    def between(self, lo: datetime, hi: datetime) -> tuple[TrendSnapshot, ...]:
        i = bisect.bisect_left(self._times, lo)
        j = bisect.bisect_right(self._times, hi)
        return self.snapshots[i:j]

    def trend_names(self) -> set[str]:
        return {name for s in self.snapshots for _, name in s.entries}


# ---------------------------------------------------------------- events

_TWEET_FIELDS = {
    "type", "id", "author_id", "handle", "created_at",
    "account_created_at", "text", "is_retweet",
}
_DELETE_FIELDS = {"type", "tweet_id", "author_id", "deleted_at"}


def _require_int(obj: dict, key: str, line_no: int) -> int:
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedLineError(line_no, f"field {key!r} must be an integer")
    return value


def _require_ts(obj: dict, key: str, line_no: int) -> datetime:
    try:
        return parse_ts(obj[key])
    except (TypeError, ValueError) as exc:
        raise MalformedLineError(line_no, f"field {key!r}: {exc}") from None


def _check_fields(obj: dict, expected: set[str], line_no: int) -> None:
    missing = expected - obj.keys()
    if missing:
        raise MalformedLineError(line_no, f"missing fields: {', '.join(sorted(missing))}")
    extra = obj.keys() - expected
    if extra:
        raise MalformedLineError(line_no, f"unexpected fields: {', '.join(sorted(extra))}")


def parse_stream_event(line: str, line_no: int = 1) -> StreamEvent:
    """Parse one replay line into a validated event."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLineError(line_no, f"invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise MalformedLineError(line_no, "event must be a JSON object")
    kind = obj.get("type")
    if kind == "tweet":
        _check_fields(obj, _TWEET_FIELDS, line_no)
        for key in ("handle", "text"):
            if not isinstance(obj[key], str):
                raise MalformedLineError(line_no, f"field {key!r} must be a string")
        if not isinstance(obj["is_retweet"], bool):
            raise MalformedLineError(line_no, "field 'is_retweet' must be a boolean")
        tweet = TweetRecord(
            tweet_id=_require_int(obj, "id", line_no),
            author_id=_require_int(obj, "author_id", line_no),
            author_handle=obj["handle"],
            created_at=_require_ts(obj, "created_at", line_no),
            account_created_at=_require_ts(obj, "account_created_at", line_no),
            text=obj["text"],
            is_retweet=obj["is_retweet"],
        )
        if tweet.created_at < tweet.account_created_at:
            raise MalformedLineError(line_no, "created_at precedes account_created_at")
        return tweet
    if kind == "delete":
        _check_fields(obj, _DELETE_FIELDS, line_no)
        return DeletionNotice(
            tweet_id=_require_int(obj, "tweet_id", line_no),
            author_id=_require_int(obj, "author_id", line_no),
            deleted_at=_require_ts(obj, "deleted_at", line_no),
        )
    if kind is None:
        raise MalformedLineError(line_no, "missing field 'type'")
    raise UnknownEventTypeError(line_no, kind)


def serialize_event(event: StreamEvent) -> str:
    if isinstance(event, TweetRecord):
        obj = {
            "type": "tweet",
            "id": event.tweet_id,
            "author_id": event.author_id,
            "handle": event.author_handle,
            "created_at": format_ts(event.created_at),
            "account_created_at": format_ts(event.account_created_at),
            "text": event.text,
            "is_retweet": event.is_retweet,
        }
    else:
        obj = {
            "type": "delete",
            "tweet_id": event.tweet_id,
            "author_id": event.author_id,
            "deleted_at": format_ts(event.deleted_at),
        }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def iter_stream(lines: Iterable[str], skew: timedelta = DEFAULT_SKEW) -> Iterator[StreamEvent]:
    """Parse replay lines into a non-decreasing event sequence.

    Events up to ``skew`` behind the latest timestamp seen are buffered and
    re-sorted (ties keep file order); anything older raises OrderingError.
    Duplicate tweet ids and deletions that precede their in-stream tweet are
    rejected as malformed.
    """
    heap: list[tuple[datetime, int, StreamEvent]] = []
    latest: datetime | None = None
    emitted_until: datetime | None = None
    tweet_times: dict[int, datetime] = {}

    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        event = parse_stream_event(line, line_no)
        ts = event.timestamp
        if latest is not None and ts < latest - skew:
            raise OrderingError(
                line_no, f"event at {format_ts(ts)} is more than {skew} behind {format_ts(latest)}"
            )
        if isinstance(event, TweetRecord):
            if event.tweet_id in tweet_times:
                raise MalformedLineError(line_no, f"duplicate tweet id {event.tweet_id}")
            tweet_times[event.tweet_id] = event.created_at
        else:
            posted = tweet_times.get(event.tweet_id)
            if posted is not None and event.deleted_at < posted:
                raise MalformedLineError(line_no, f"deletion of tweet {event.tweet_id} precedes its creation")
        if emitted_until is not None and ts < emitted_until:
            raise OrderingError(line_no, f"event at {format_ts(ts)} arrived after later events were released")
        heapq.heappush(heap, (ts, line_no, event))
        if latest is None or ts > latest:
            latest = ts
        while heap and heap[0][0] < latest - skew:
            ts0, _, ev = heapq.heappop(heap)
            emitted_until = ts0
            yield ev
    while heap:
        yield heapq.heappop(heap)[2]


def read_stream(path, skew: timedelta = DEFAULT_SKEW) -> Iterator[StreamEvent]:
    with open(path, encoding="utf-8") as fh:
        yield from iter_stream(fh, skew=skew)


def write_stream(path, events: Iterable[StreamEvent]) -> None:
    with atomic_write(path) as fh:
        for event in events:
            fh.write(serialize_event(event))
            fh.write("\n")


# -------------------------------------------------------------- timeline

TIMELINE_HEADER = ["observed_at", "rank", "trend_name"]
STATUS_HEADER = ["account_id", "status", "checked_at"]


def _read_csv(path, header: list[str], error_cls):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            return []
        if [c.strip() for c in first] != header:
            raise error_cls(1, f"expected header {','.join(header)}, got {','.join(first)}")
        rows = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise error_cls(row_no, f"expected {len(header)} columns, got {len(row)}")
            rows.append((row_no, row))
        return rows


def load_trend_timeline(path) -> TrendTimeline:
    """Load a ranked trend timeline CSV, grouping rows into snapshots."""
    groups: dict[datetime, list[tuple[int, int, str]]] = {}
    for row_no, (ts_text, rank_text, name) in _read_csv(path, TIMELINE_HEADER, TimelineError):
        try:
            ts = parse_ts(ts_text)
        except ValueError as exc:
            raise TimelineError(row_no, str(exc)) from None
        try:
            rank = int(rank_text)
        except ValueError:
            raise TimelineError(row_no, f"rank {rank_text!r} is not an integer") from None
        if not name.strip():
            raise TimelineError(row_no, "empty trend name")
        groups.setdefault(ts, []).append((row_no, rank, name))

    snapshots = []
    for ts, rows in groups.items():
        seen_ranks: set[int] = set()
        seen_names: set[str] = set()
        prev = 0
        for row_no, rank, name in rows:
            if rank in seen_ranks:
                raise TimelineError(row_no, f"duplicate rank {rank} at {format_ts(ts)}")
            if rank <= prev or (prev == 0 and rank != 1):
                raise TimelineError(row_no, f"non-monotonic rank {rank} at {format_ts(ts)}")
            if name in seen_names:
                raise TimelineError(row_no, f"duplicate trend {name!r} at {format_ts(ts)}")
            seen_ranks.add(rank)
            seen_names.add(name)
            prev = rank
        snapshots.append(TrendSnapshot(ts, tuple((rank, name) for _, rank, name in rows)))
    return TrendTimeline(tuple(snapshots))


def write_trend_timeline(path, timeline: TrendTimeline) -> None:
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TIMELINE_HEADER)
        for snap in timeline.snapshots:
            for rank, name in snap.entries:
                writer.writerow([format_ts(snap.observed_at), rank, name])


def load_account_statuses(path) -> dict[int, AccountStatus]:
    statuses: dict[int, AccountStatus] = {}
    for row_no, (id_text, status_text, ts_text) in _read_csv(path, STATUS_HEADER, TimelineError):
        try:
            account_id = int(id_text)
            status = Status(status_text.strip())
            checked_at = parse_ts(ts_text)
        except ValueError as exc:
            raise TimelineError(row_no, str(exc)) from None
        if account_id in statuses:
            raise TimelineError(row_no, f"duplicate status for account {account_id}")
        statuses[account_id] = AccountStatus(account_id, status, checked_at)
    return statuses


def write_account_statuses(path, statuses: Iterable[AccountStatus]) -> None:
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STATUS_HEADER)
        for st in sorted(statuses, key=lambda s: s.account_id):
            writer.writerow([st.account_id, st.status.value, format_ts(st.checked_at)])


# ------------------------------------------------------------- lookups

def trends_active_at(timeline: TrendTimeline, t: datetime, horizon: timedelta = DEFAULT_HORIZON) -> set[str]:
    """Trend names listed in any snapshot within ``horizon`` of ``t`` on either side.

    The forward window matters: attack tweets are posted (and deleted) before
    the keyword shows up on the list.
    """
    if horizon < timedelta(0):
        raise ValueError("horizon must be non-negative")
    return {name for snap in timeline.between(t - horizon, t + horizon) for _, name in snap.entries}


def extract_trend_mentions(text: str, candidates: Iterable[str]) -> list[str]:
    """Candidates whose keyword occurs in ``text`` under Turkish case folding.

    Returned in sorted order so downstream grouping is deterministic.
    """
    folded = turkish_fold(text)
    found = []
    for name in sorted(set(candidates)):
        key = turkish_fold(name).lstrip("#").split()
        if not key or key[0] not in folded:
            continue
        if keyword_pattern(name).search(folded):
            found.append(name)
    return found


def mention_spans(text: str, mentions: Iterable[str]) -> list[tuple[int, int]]:
    """Character spans in ``text`` covered by the given trend keywords."""
    folded = turkish_fold(text)
    spans = []
    for name in mentions:
        spans.extend(m.span() for m in keyword_pattern(name).finditer(folded))
    return sorted(spans)
