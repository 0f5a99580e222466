"""Per-account aggregation of attack evidence into bot records."""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from typing import Iterable, Mapping

from ._io import atomic_write, format_ts, parse_ts
from .stream import AccountStatus, Status, StreamEvent, TweetRecord
from .trends import AttackEvent

logger = logging.getLogger(__name__)

BOTS_HEADER = [
    "account_id", "handle", "account_created_at", "first_attack_at", "last_attack_at",
    "attack_count", "status", "undeleted_tweet_count", "last_undeleted_tweet_at",
    "silent_gap_months", "default_handle",
]

_DEFAULT_HANDLE = re.compile(r"[0-9]{8,}")


class LedgerSchemaError(ValueError):
    pass


@dataclass(frozen=True)
class BotRecord:
    account_id: int
    handle: str
    account_created_at: datetime
    first_attack_at: datetime
    last_attack_at: datetime
    attack_count: int
    status: Status
    undeleted_tweet_count: int
    last_undeleted_tweet_at: datetime | None
    silent_gap_months: int | None
    default_handle: bool


def months_between(earlier: datetime, later: datetime) -> int:
    """Whole calendar months from ``earlier`` to ``later`` (negative if reversed)."""
    months = (later.year - earlier.year) * 12 + (later.month - earlier.month)
    if months > 0 and (later.day, later.time()) < (earlier.day, earlier.time()):
        months -= 1
    elif months < 0 and (later.day, later.time()) > (earlier.day, earlier.time()):
        months += 1
    return months


def has_default_handle(handle: str) -> bool:
    """True when the handle carries 8 or more consecutive digits, as auto-assigned handles do."""
    return _DEFAULT_HANDLE.search(handle) is not None


def silent_gap(record: BotRecord) -> int | None:
    """Months the profile looked idle before the last attack; None without visible tweets."""
    if record.last_undeleted_tweet_at is None:
        return None
    return max(0, months_between(record.last_undeleted_tweet_at, record.last_attack_at))


def time_to_first_attack(record: BotRecord) -> timedelta:
    return record.first_attack_at - record.account_created_at


def accumulate(
    events: Iterable[AttackEvent],
    tweets: Iterable[StreamEvent],
    deletions: Mapping[int, datetime],
    statuses: Mapping[int, AccountStatus],
    fake_trends: set[str] | None = None,
) -> list[BotRecord]:
    """Build one record per participant of the given attack events.

    ``events`` should already be restricted to fake trends; passing
    ``fake_trends`` filters them here instead. ``tweets`` is a pass over the
    replay stream (deletion notices in it are ignored) and supplies attack
    times, profile fields and the undeleted-tweet counts.
    """
    event_keys: dict[int, set[tuple[str, datetime]]] = {}
    attack_tweet_ids: set[int] = set()
    for event in events:
        if fake_trends is not None and event.trend_name not in fake_trends:
            continue
        attack_tweet_ids |= event.tweet_ids
        for account in event.participant_ids:
            event_keys.setdefault(account, set()).add(event.key)
    if not event_keys:
        return []

    first: dict[int, datetime] = {}
    last: dict[int, datetime] = {}
    profile: dict[int, TweetRecord] = {}
    undeleted: dict[int, int] = {}
    last_visible: dict[int, datetime] = {}
    for tweet in tweets:
        if not isinstance(tweet, TweetRecord) or tweet.author_id not in event_keys:
            continue
        aid = tweet.author_id
        prev = profile.get(aid)
        if prev is None or tweet.created_at >= prev.created_at:
            profile[aid] = tweet
        if tweet.tweet_id in attack_tweet_ids:
            ts = tweet.created_at
            if aid not in first or ts < first[aid]:
                first[aid] = ts
            if aid not in last or ts > last[aid]:
                last[aid] = ts
        if tweet.tweet_id not in deletions:
            undeleted[aid] = undeleted.get(aid, 0) + 1
            if aid not in last_visible or tweet.created_at > last_visible[aid]:
                last_visible[aid] = tweet.created_at

    missing_status = 0
    records = []
    for aid in sorted(event_keys):
        if aid not in first:
            logger.warning("account %d has attack events but none of its tweets were replayed", aid)
            continue
        st = statuses.get(aid)
        if st is None:
            missing_status += 1
        p = profile[aid]
        rec = BotRecord(
            account_id=aid,
            handle=p.author_handle,
            account_created_at=p.account_created_at,
            first_attack_at=first[aid],
            last_attack_at=last[aid],
            attack_count=len(event_keys[aid]),
            status=st.status if st else Status.ACTIVE,
            undeleted_tweet_count=undeleted.get(aid, 0),
            last_undeleted_tweet_at=last_visible.get(aid),
            silent_gap_months=None,
            default_handle=has_default_handle(p.author_handle),
        )
        records.append(replace(rec, silent_gap_months=silent_gap(rec)))
    if missing_status:
        logger.warning("%d ledger accounts have no status row; treating them as active", missing_status)
    return records


def merge_ledgers(*ledgers: Iterable[BotRecord]) -> list[BotRecord]:
    """Combine ledgers built from disjoint event shards."""
    merged: dict[int, BotRecord] = {}
    for ledger in ledgers:
        for rec in ledger:
            cur = merged.get(rec.account_id)
            if cur is None:
                merged[rec.account_id] = rec
                continue
            combined = replace(
                cur,
                first_attack_at=min(cur.first_attack_at, rec.first_attack_at),
                last_attack_at=max(cur.last_attack_at, rec.last_attack_at),
                attack_count=cur.attack_count + rec.attack_count,
            )
            merged[rec.account_id] = replace(combined, silent_gap_months=silent_gap(combined))
    return [merged[k] for k in sorted(merged)]


# ------------------------------------------------------------------ CSV

def _opt_ts(ts: datetime | None) -> str:
    return format_ts(ts) if ts is not None else ""


def write_bots_csv(path, records: Iterable[BotRecord]) -> None:
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BOTS_HEADER)
        for r in sorted(records, key=lambda r: r.account_id):
            writer.writerow([
                r.account_id, r.handle, format_ts(r.account_created_at),
                format_ts(r.first_attack_at), format_ts(r.last_attack_at), r.attack_count,
                r.status.value, r.undeleted_tweet_count, _opt_ts(r.last_undeleted_tweet_at),
                "" if r.silent_gap_months is None else r.silent_gap_months,
                "true" if r.default_handle else "false",
            ])


def read_bots_csv(path) -> list[BotRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in BOTS_HEADER if c not in header]
        if missing:
            raise LedgerSchemaError(f"{path}: missing columns: {', '.join(missing)}")
        records = []
        for row_no, row in enumerate(reader, start=2):
            try:
                records.append(BotRecord(
                    account_id=int(row["account_id"]),
                    handle=row["handle"],
                    account_created_at=parse_ts(row["account_created_at"]),
                    first_attack_at=parse_ts(row["first_attack_at"]),
                    last_attack_at=parse_ts(row["last_attack_at"]),
                    attack_count=int(row["attack_count"]),
                    status=Status(row["status"]),
                    undeleted_tweet_count=int(row["undeleted_tweet_count"]),
                    last_undeleted_tweet_at=parse_ts(row["last_undeleted_tweet_at"]) if row["last_undeleted_tweet_at"] else None,
                    silent_gap_months=int(row["silent_gap_months"]) if row["silent_gap_months"] else None,
                    default_handle=row["default_handle"] == "true",
                ))
            except (TypeError, ValueError) as exc:
                raise LedgerSchemaError(f"{path}: row {row_no}: {exc}") from None
        return records
