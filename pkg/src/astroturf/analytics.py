"""Aggregates behind the prevalence, lifecycle and bot-characteristic figures.

Everything here is a pure fold over immutable inputs. Calendars are UTC;
quarters are calendar quarters.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

from ._io import atomic_write
from .ledger import BotRecord, months_between
from .stream import Status, TrendTimeline
from .trends import TrendVerdict

TOP_N = 5
ATTACK_BUCKETS = [str(i) for i in range(1, 10)] + ["10+"]
UNDELETED_BUCKETS = ["0", "1-9", "10-99", "100-999", "1000+"]
SILENT_BUCKETS = [str(i) for i in range(25)] + ["25+", "no visible tweets"]
NO_VISIBLE = "no visible tweets"


@dataclass
class ReportBundle:
    daily_fake_share: dict[str, float] = field(default_factory=dict)
    monthly_first_attack: dict[str, int] = field(default_factory=dict)
    monthly_last_attack: dict[str, int] = field(default_factory=dict)
    monthly_creation: dict[str, int] = field(default_factory=dict)
    first_last_quarter_matrix: dict[tuple[str, str], int] = field(default_factory=dict)
    time_to_first_attack_bins: dict[str, int] = field(default_factory=dict)
    attacks_histogram: dict[str, tuple[int, int]] = field(default_factory=dict)
    undeleted_histogram: dict[str, int] = field(default_factory=dict)
    silent_gap_histogram: dict[str, int] = field(default_factory=dict)
    default_handle_share: float = 0.0
    ledger_size: int = 0

    def to_dict(self) -> dict:
        return {
            "ledger_size": self.ledger_size,
            "daily_fake_share": self.daily_fake_share,
            "monthly_first_attack": self.monthly_first_attack,
            "monthly_last_attack": self.monthly_last_attack,
            "monthly_creation": self.monthly_creation,
            "first_last_quarter_matrix": [
                {"first_quarter": f, "last_quarter": l, "count": c}
                for (f, l), c in sorted(self.first_last_quarter_matrix.items())
            ],
            "time_to_first_attack_bins": self.time_to_first_attack_bins,
            "attacks_histogram": {
                k: {"total": t, "still_active": a} for k, (t, a) in self.attacks_histogram.items()
            },
            "undeleted_histogram": self.undeleted_histogram,
            "silent_gap_histogram": self.silent_gap_histogram,
            "default_handle_share": self.default_handle_share,
        }


def month_key(ts) -> str:
    return f"{ts.year:04d}-{ts.month:02d}"


def quarter_key(ts) -> str:
    return f"{ts.year:04d}Q{(ts.month - 1) // 3 + 1}"


def daily_top_sets(timeline: TrendTimeline, top_n: int = TOP_N) -> dict[date, set[str]]:
    days: dict[date, set[str]] = {}
    for snap in timeline.snapshots:
        days.setdefault(snap.observed_at.date(), set()).update(snap.top(top_n))
    return days


def daily_fake_share_top5(timeline: TrendTimeline, verdicts: Iterable[TrendVerdict]) -> dict[str, float]:
    """Share of fake trends among the distinct trends ranked 1-5 at any point that day."""
    fake = {v.trend_name for v in verdicts if v.is_fake}
    out = {}
    for day, names in sorted(daily_top_sets(timeline).items()):
        if names:
            out[day.isoformat()] = len(names & fake) / len(names)
    return out


def _sorted_counts(counter: Counter) -> dict[str, int]:
    return {k: counter[k] for k in sorted(counter)}


def lifecycle_histograms(ledger: Sequence[BotRecord]) -> dict:
    first = Counter(month_key(r.first_attack_at) for r in ledger)
    last = Counter(month_key(r.last_attack_at) for r in ledger)
    created = Counter(month_key(r.account_created_at) for r in ledger if r.status is Status.ACTIVE)
    quarters = Counter((quarter_key(r.first_attack_at), quarter_key(r.last_attack_at)) for r in ledger)
    return {
        "monthly_first_attack": _sorted_counts(first),
        "monthly_last_attack": _sorted_counts(last),
        "monthly_creation": _sorted_counts(created),
        "first_last_quarter_matrix": {k: quarters[k] for k in sorted(quarters)},
    }


def first_attack_bin(record: BotRecord) -> str:
    months = max(0, months_between(record.account_created_at, record.first_attack_at))
    lo = months // 3 * 3
    return f"{lo}-{lo + 3}"


def time_to_first_attack_bins(ledger: Sequence[BotRecord]) -> dict[str, int]:
    counts = Counter(first_attack_bin(r) for r in ledger)
    return {k: counts[k] for k in sorted(counts, key=lambda s: int(s.split("-")[0]))}


def attack_bucket(count: int) -> str:
    return str(count) if count < 10 else "10+"


def undeleted_bucket(count: int) -> str:
    if count == 0:
        return "0"
    if count < 10:
        return "1-9"
    if count < 100:
        return "10-99"
    if count < 1000:
        return "100-999"
    return "1000+"


def silent_bucket(gap: int | None) -> str:
    if gap is None:
        return NO_VISIBLE
    return str(gap) if gap <= 24 else "25+"


def characteristics(ledger: Sequence[BotRecord]) -> dict:
    attacks = {b: [0, 0] for b in ATTACK_BUCKETS}
    undeleted = dict.fromkeys(UNDELETED_BUCKETS, 0)
    silent = dict.fromkeys(SILENT_BUCKETS, 0)
    default = 0
    for r in ledger:
        cell = attacks[attack_bucket(r.attack_count)]
        cell[0] += 1
        cell[1] += r.status is Status.ACTIVE
        undeleted[undeleted_bucket(r.undeleted_tweet_count)] += 1
        silent[silent_bucket(r.silent_gap_months)] += 1
        default += r.default_handle
    return {
        "attacks_histogram": {k: (t, a) for k, (t, a) in attacks.items()},
        "undeleted_histogram": undeleted,
        "silent_gap_histogram": silent,
        "default_handle_share": default / len(ledger) if ledger else 0.0,
    }


def build_report(timeline: TrendTimeline, verdicts: Sequence[TrendVerdict], ledger: Sequence[BotRecord]) -> ReportBundle:
    life = lifecycle_histograms(ledger)
    chars = characteristics(ledger)
    return ReportBundle(
        daily_fake_share=daily_fake_share_top5(timeline, verdicts),
        time_to_first_attack_bins=time_to_first_attack_bins(ledger),
        ledger_size=len(ledger),
        **life,
        **chars,
    )


def write_report(out_dir, report: ReportBundle, timeline: TrendTimeline | None = None,
                 verdicts: Sequence[TrendVerdict] = ()) -> list[Path]:
    """Write report.json plus one plot-ready CSV per figure."""
    out = Path(out_dir)
    written = []

    def emit(name: str, header: list[str], rows: Iterable[Sequence]):
        path = out / name
        with atomic_write(path, newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        written.append(path)

    path = out / "report.json"
    with atomic_write(path) as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=False, ensure_ascii=False)
        fh.write("\n")
    written.append(path)

    fake = {v.trend_name for v in verdicts if v.is_fake}
    top_sets = daily_top_sets(timeline) if timeline is not None else {}
    emit("fig2_prevalence.csv", ["day", "fake_share", "top5_trends", "fake_trends"], (
        [day, f"{share:.6f}",
         len(top_sets.get(date.fromisoformat(day), ())),
         len(top_sets.get(date.fromisoformat(day), set()) & fake)]
        for day, share in report.daily_fake_share.items()
    ))
    months = sorted(set(report.monthly_first_attack) | set(report.monthly_last_attack) | set(report.monthly_creation))
    emit("fig3_lifecycle.csv", ["month", "first_attack", "last_attack", "created_still_active"], (
        [m, report.monthly_first_attack.get(m, 0), report.monthly_last_attack.get(m, 0),
         report.monthly_creation.get(m, 0)]
        for m in months
    ))
    emit("fig5_quarter_matrix.csv", ["first_quarter", "last_quarter", "count"], (
        [f, l, c] for (f, l), c in sorted(report.first_last_quarter_matrix.items())
    ))
    emit("fig6_attacks.csv", ["attacks", "total", "still_active", "still_active_fraction"], (
        [k, t, a, f"{a / t:.6f}" if t else ""] for k, (t, a) in report.attacks_histogram.items()
    ))
    emit("fig7_undeleted.csv", ["undeleted_tweets", "accounts"], report.undeleted_histogram.items())
    emit("fig8_silent.csv", ["months_silent", "accounts"], report.silent_gap_histogram.items())
    emit("time_to_first_attack.csv", ["months_bin", "accounts"], report.time_to_first_attack_bins.items())
    return written
