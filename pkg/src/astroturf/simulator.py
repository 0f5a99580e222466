"""Seeded generator of attack scenarios with ground-truth labels.

Bots post lexicon tweets for a target keyword inside a short burst and delete
them a fixed delay later; the keyword then enters the trend list. Organic
trends receive background tweets written so they break at least one lexicon
rule. Purges retire a share of the active bots at a month boundary and wake
replacements from the reserve pool. Every random draw comes from one
generator seeded by the config, so equal configs give byte-identical files.
"""

from __future__ import annotations

import calendar
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from ._io import atomic_write, format_ts, parse_ts
from .stream import (
    AccountStatus,
    DeletionNotice,
    Status,
    StreamEvent,
    TrendSnapshot,
    TrendTimeline,
    TweetRecord,
    read_stream,
    write_account_statuses,
    write_stream,
    write_trend_timeline,
)
from .text import turkish_fold

UTC = timezone.utc
STREAM_FILE = "stream.jsonl"
TRENDS_FILE = "trends.csv"
STATUS_FILE = "statuses.csv"
TRUTH_FILE = "ground_truth.json"

BOT_ID_BASE = 1_000_000
ORGANIC_ID_BASE = 5_000_000
TWEET_ID_BASE = 10_000_000


class ConfigError(ValueError):
    pass


class EmptyLexiconError(ConfigError):
    pass


@dataclass
class AttackSpec:
    trend_name: str
    start_at: datetime
    bot_count: int
    burst_seconds: int = 60
    delete_after_seconds: int = 180

    def validate(self) -> None:
        if self.bot_count < 1:
            raise ConfigError(f"attack on {self.trend_name!r}: bot_count must be >= 1")
        if self.burst_seconds < 1:
            raise ConfigError(f"attack on {self.trend_name!r}: burst_seconds must be >= 1")
        if self.delete_after_seconds < 0:
            raise ConfigError(f"attack on {self.trend_name!r}: delete_after_seconds must be >= 0")


@dataclass
class OrganicTrendSpec:
    trend_name: str
    start_at: datetime


@dataclass
class PurgeSpec:
    """Retire ``fraction`` of the active bots once month ``month`` (YYYY-MM) ends."""

    month: str
    fraction: float

    @property
    def effective_at(self) -> datetime:
        year, mon = (int(x) for x in self.month.split("-"))
        year, mon = (year + 1, 1) if mon == 12 else (year, mon + 1)
        return datetime(year, mon, 1, tzinfo=UTC)


@dataclass
class SimConfig:
    start: datetime = datetime(2022, 5, 17, tzinfo=UTC)
    duration_days: float = 14.0
    bot_pool_size: int = 5000
    active_bots: int | None = None
    lexicon: str | None = None
    attacks: list[AttackSpec] = field(default_factory=list)
    organic_rate: float = 0.77
    organic_trend_count: int = 0
    organic_trends: list[OrganicTrendSpec] = field(default_factory=list)
    trend_lifetime_minutes: int = 480
    listing_delay_minutes: int = 5
    snapshot_minutes: int = 15
    sample_rate: float = 1.0
    purge_schedule: list[PurgeSpec] = field(default_factory=list)
    replacement_ratio: float = 1.0
    not_found_share: float = 0.45
    proper_noun_rate: float = 0.0
    organic_lexicon_rate: float = 0.05
    organic_delete_rate: float = 0.02
    retweet_rate: float = 0.15
    organic_users: int = 20000
    visible_tweets_max: int = 0
    no_visible_rate: float = 0.09
    silence_months: int | None = None
    default_handle_rate: float = 0.075
    test_fraction: float = 1 / 6
    seed: int = 0

    @property
    def end(self) -> datetime:
        return self.start + timedelta(days=self.duration_days)

    def validate(self) -> None:
        if not 0.0 < self.sample_rate <= 1.0:
            raise ConfigError("sample_rate must lie in (0, 1]")
        if self.bot_pool_size < 1:
            raise ConfigError("bot_pool_size must be positive")
        active = self.bot_pool_size if self.active_bots is None else self.active_bots
        if not 0 < active <= self.bot_pool_size:
            raise ConfigError("active_bots must lie in [1, bot_pool_size]")
        for spec in self.attacks:
            spec.validate()
            if spec.bot_count > self.bot_pool_size:
                raise ConfigError(
                    f"attack on {spec.trend_name!r} needs {spec.bot_count} bots; pool has {self.bot_pool_size}"
                )
        names = [a.trend_name for a in self.attacks] + [o.trend_name for o in self.organic_trends]
        if len({turkish_fold(n) for n in names}) != len(names):
            raise ConfigError("trend names must be unique")
        for name, value in [
            ("replacement_ratio", self.replacement_ratio),
            ("not_found_share", self.not_found_share),
            ("proper_noun_rate", self.proper_noun_rate),
            ("organic_lexicon_rate", self.organic_lexicon_rate),
            ("organic_delete_rate", self.organic_delete_rate),
            ("retweet_rate", self.retweet_rate),
            ("no_visible_rate", self.no_visible_rate),
            ("default_handle_rate", self.default_handle_rate),
            ("test_fraction", self.test_fraction),
        ]:
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        for purge in self.purge_schedule:
            if not 0.0 <= purge.fraction <= 1.0:
                raise ConfigError(f"purge {purge.month}: fraction must lie in [0, 1]")
            try:
                purge.effective_at
            except ValueError:
                raise ConfigError(f"purge month {purge.month!r} is not YYYY-MM") from None
        if self.organic_rate < 0 or self.trend_lifetime_minutes < 1 or self.snapshot_minutes < 1:
            raise ConfigError("organic_rate, trend_lifetime_minutes and snapshot_minutes must be positive")
        if self.silence_months is not None and self.silence_months < 0:
            raise ConfigError("silence_months must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    # ---- JSON

    def to_dict(self) -> dict:
        d = asdict(self)
        d["start"] = format_ts(self.start)
        d["attacks"] = [{**asdict(a), "start_at": format_ts(a.start_at)} for a in self.attacks]
        d["organic_trends"] = [{**asdict(o), "start_at": format_ts(o.start_at)} for o in self.organic_trends]
        return d

    @classmethod
    def from_dict(cls, obj: dict, base_dir: Path | None = None) -> "SimConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        data = dict(obj)
        try:
            if "start" in data:
                data["start"] = parse_ts(data["start"])
            data["attacks"] = [
                AttackSpec(**{**a, "start_at": parse_ts(a["start_at"])}) for a in data.get("attacks", [])
            ]
            data["organic_trends"] = [
                OrganicTrendSpec(o["trend_name"], parse_ts(o["start_at"])) for o in data.get("organic_trends", [])
            ]
            data["purge_schedule"] = [PurgeSpec(**p) for p in data.get("purge_schedule", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None
        if data.get("lexicon") and base_dir is not None:
            path = Path(data["lexicon"])
            data["lexicon"] = str(path if path.is_absolute() else base_dir / path)
        cfg = cls(**data)
        cfg.validate()
        return cfg


def load_config(path) -> SimConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
    return SimConfig.from_dict(obj, base_dir=path.parent)


# ---------------------------------------------------------------- words

def _data_lines(name: str) -> list[str]:
    text = resources.files("astroturf").joinpath("data", name).read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def load_lexicon(path: str | None = None) -> list[str]:
    """Read a word list, one lowercase alphabetic word per line."""
    if path is None:
        words = _data_lines("lexicon_tr.txt")
    else:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"lexicon file not found: {p}")
        words = [w.strip() for w in p.read_text(encoding="utf-8").splitlines() if w.strip()]
    bad = [w for w in words if not (w.isalpha() and w.islower())]
    if bad:
        raise ConfigError(f"lexicon words must be lowercase alphabetic: {', '.join(bad[:5])}")
    if not words:
        raise EmptyLexiconError(f"lexicon {path or '<built-in>'} is empty")
    return list(dict.fromkeys(words))


def turkish_capitalize(word: str) -> str:
    head = {"i": "İ", "ı": "I"}.get(word[0], word[0].upper())
    return head + word[1:]


def generate_lexicon_tweet(rng: np.random.Generator, lexicon: Sequence[str], trend_name: str) -> str:
    """Two to nine random lexicon words followed by the target keyword."""
    if not lexicon:
        raise EmptyLexiconError("lexicon is empty")
    n = int(rng.integers(2, 10))
    words = [lexicon[i] for i in rng.integers(0, len(lexicon), size=n)]
    return " ".join(words) + " " + trend_name


def _place(rng, words: list[str], trend_name: str | None) -> str:
    if trend_name is not None:
        pos = int(rng.integers(0, len(words) + 1))
        words = words[:pos] + [trend_name] + words[pos:]
    return " ".join(words)


def organic_text(rng: np.random.Generator, lexicon: Sequence[str], trend_name: str | None,
                 lexicon_like_rate: float = 0.0) -> str:
    """Background tweet text; breaks at least one lexicon rule unless drawn lexicon-like."""
    if trend_name is not None and rng.random() < lexicon_like_rate:
        return generate_lexicon_tweet(rng, lexicon, trend_name)
    n = int(rng.integers(3, 15))
    words = [lexicon[i] for i in rng.integers(0, len(lexicon), size=n)]
    style = int(rng.integers(0, 5))
    if style == 0:
        words[0] = turkish_capitalize(words[0])
        words[-1] += "."
    elif style == 1:
        slug = "".join(chr(c) for c in rng.integers(97, 123, size=10))
        words.append(f"https://t.co/{slug}")
    elif style == 2:
        words.insert(0, f"@{words[0]}{int(rng.integers(1, 999))}")
    elif style == 3:
        words.append(str(int(rng.integers(1990, 2030))))
    else:
        k = int(rng.integers(0, len(words)))
        words[k] += "!?,"[int(rng.integers(0, 3))]
    text = _place(rng, words, trend_name)
    if style == 2:
        # Keep the mention in front so the text also starts with '@'.
        head, _, rest = text.partition(" ")
        if not head.startswith("@"):
            text = f"@{words[1] if len(words) > 1 else 'x'} {text}"
    return text


def make_trend_names(rng: np.random.Generator, lexicon: Sequence[str], count: int, used: set[str]) -> list[str]:
    """Fresh keywords: '#CamelCase' hashtags or two-token CamelCase n-grams.

    Tokens are concatenations of two words, so they never collide with the
    single words used in generated tweet text, and no token is reused.
    """
    names = []

    def token() -> str:
        while True:
            a, b = (lexicon[i] for i in rng.integers(0, len(lexicon), size=2))
            tok = turkish_capitalize(a) + turkish_capitalize(b)
            key = turkish_fold(tok)
            if key not in used:
                used.add(key)
                return tok

    for _ in range(count):
        if rng.random() < 0.5:
            names.append("#" + token())
        else:
            names.append(token() + " " + token())
    return names


def make_handle(rng: np.random.Generator, stems: Sequence[str], default: bool) -> str:
    stem = stems[int(rng.integers(0, len(stems)))]
    if default:
        return stem + "".join(str(d) for d in rng.integers(0, 10, size=8))
    digits = int(rng.integers(0, 5))
    return stem + "_" + "".join(str(d) for d in rng.integers(0, 10, size=digits)) if digits else stem


def add_months(ts: datetime, months: int) -> datetime:
    total = ts.year * 12 + (ts.month - 1) + months
    year, month = divmod(total, 12)
    day = min(ts.day, calendar.monthrange(year, month + 1)[1])
    return ts.replace(year=year, month=month + 1, day=day)


# --------------------------------------------------------- ground truth

@dataclass
class GroundTruth:
    tweet_ids: list[int]
    attack_tweet_ids: list[int]
    fake_trends: list[str]
    trends: dict[str, dict]
    trend_tweets: dict[str, list[int]]
    bot_ids: list[int]
    bots: dict[int, dict]
    seed: int = 0
    sample_rate: float = 1.0

    kind = "ground_truth"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "sample_rate": self.sample_rate,
            "tweet_ids": self.tweet_ids,
            "attack_tweet_ids": self.attack_tweet_ids,
            "fake_trends": self.fake_trends,
            "trends": self.trends,
            "trend_tweets": self.trend_tweets,
            "bot_ids": self.bot_ids,
            "bots": {str(k): v for k, v in self.bots.items()},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GroundTruth":
        if obj.get("kind") != cls.kind:
            raise ValueError(f"not a ground-truth file (kind={obj.get('kind')!r})")
        return cls(
            tweet_ids=obj["tweet_ids"],
            attack_tweet_ids=obj["attack_tweet_ids"],
            fake_trends=obj["fake_trends"],
            trends=obj["trends"],
            trend_tweets=obj["trend_tweets"],
            bot_ids=obj["bot_ids"],
            bots={int(k): v for k, v in obj["bots"].items()},
            seed=obj.get("seed", 0),
            sample_rate=obj.get("sample_rate", 1.0),
        )

    def split_trends(self, split: str) -> set[str]:
        return {name for name, info in self.trends.items() if info.get("split") == split}


def read_ground_truth(path) -> GroundTruth:
    with open(path, encoding="utf-8") as fh:
        return GroundTruth.from_dict(json.load(fh))


def write_ground_truth(path, truth: GroundTruth) -> None:
    with atomic_write(path) as fh:
        json.dump(truth.to_dict(), fh, ensure_ascii=False, separators=(",", ":"))
        fh.write("\n")


# ------------------------------------------------------------ simulation

@dataclass
class _Bot:
    account_id: int
    handle: str
    created_at: datetime
    default_handle: bool = False
    retired_as: Status | None = None


@dataclass
class _Draft:
    created_at: datetime
    seq: int
    author_id: int
    handle: str
    account_created_at: datetime
    text: str
    is_retweet: bool
    deleted_at: datetime | None
    trend: str | None
    attack: int | None = None


@dataclass
class Simulation:
    config: SimConfig
    events: list[StreamEvent]
    timeline: TrendTimeline
    statuses: list[AccountStatus]
    truth: GroundTruth

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        paths = {
            "stream": out / STREAM_FILE,
            "trends": out / TRENDS_FILE,
            "statuses": out / STATUS_FILE,
            "truth": out / TRUTH_FILE,
        }
        write_stream(paths["stream"], self.events)
        write_trend_timeline(paths["trends"], self.timeline)
        write_account_statuses(paths["statuses"], self.statuses)
        write_ground_truth(paths["truth"], self.truth)
        return paths


def _uniform_time(rng, lo: datetime, hi: datetime) -> datetime:
    span = max(1, int((hi - lo).total_seconds()))
    return lo + timedelta(seconds=int(rng.integers(0, span)))


def simulate(config: SimConfig) -> Simulation:
    config.validate()
    rng = np.random.default_rng(config.seed)
    lexicon = load_lexicon(config.lexicon)
    proper = _data_lines("proper_nouns_tr.txt")
    stems = _data_lines("handle_stems.txt")
    start, end = config.start, config.end
    lifetime = timedelta(minutes=config.trend_lifetime_minutes)
    delay = timedelta(minutes=config.listing_delay_minutes)

    # Bot pool, created in bulk batches well before the simulation starts.
    n_batches = max(1, config.bot_pool_size // 500)
    batch_dates = [
        _uniform_time(rng, start - timedelta(days=4 * 365), start - timedelta(days=180)) for _ in range(n_batches)
    ]
    bots = []
    for i in range(config.bot_pool_size):
        created = batch_dates[int(rng.integers(0, n_batches))] + timedelta(seconds=int(rng.integers(0, 3 * 86400)))
        default = bool(rng.random() < config.default_handle_rate)
        bots.append(_Bot(BOT_ID_BASE + i, make_handle(rng, stems, default), created, default))

    organic_pool = []
    for j in range(config.organic_users):
        created = _uniform_time(rng, start - timedelta(days=12 * 365), start - timedelta(days=1))
        organic_pool.append((ORGANIC_ID_BASE + j, make_handle(rng, stems, rng.random() < 0.02), created))

    used_tokens = {turkish_fold(w) for w in lexicon}
    for name in [a.trend_name for a in config.attacks] + [o.trend_name for o in config.organic_trends]:
        used_tokens.update(turkish_fold(name).lstrip("#").split())
    organic_specs = list(config.organic_trends)
    for name in make_trend_names(rng, lexicon, config.organic_trend_count, used_tokens):
        onset = _uniform_time(rng, start, max(start + timedelta(minutes=1), end - lifetime))
        organic_specs.append(OrganicTrendSpec(name, onset.replace(second=0)))

    drafts: list[_Draft] = []
    seq = iter(range(10**12))

    # ---- attacks, with purges applied at their month boundaries
    active_n = config.bot_pool_size if config.active_bots is None else config.active_bots
    active = list(range(active_n))
    reserve = list(range(active_n, config.bot_pool_size))
    purges = sorted(config.purge_schedule, key=lambda p: p.effective_at)
    attacks = sorted(config.attacks, key=lambda a: (a.start_at, a.trend_name))
    listings: dict[str, tuple[datetime, bool]] = {}

    def apply_purge(purge: PurgeSpec):
        nonlocal active, reserve
        k = int(round(purge.fraction * len(active)))
        if k == 0:
            return
        picked = set(int(i) for i in rng.choice(len(active), size=k, replace=False))
        for idx in sorted(picked):
            bot = bots[active[idx]]
            bot.retired_as = Status.NOT_FOUND if rng.random() < config.not_found_share else Status.SUSPENDED
        survivors = [b for i, b in enumerate(active) if i not in picked]
        n_new = min(len(reserve), int(round(k * config.replacement_ratio)))
        active = survivors + reserve[:n_new]
        reserve = reserve[n_new:]

    pending = list(purges)
    for a_idx, spec in enumerate(attacks):
        while pending and pending[0].effective_at <= spec.start_at:
            apply_purge(pending.pop(0))
        if spec.bot_count > len(active):
            raise ConfigError(
                f"attack on {spec.trend_name!r} at {format_ts(spec.start_at)} needs {spec.bot_count} bots; "
                f"only {len(active)} are active"
            )
        chosen = sorted(int(i) for i in rng.choice(len(active), size=spec.bot_count, replace=False))
        for idx in chosen:
            bot = bots[active[idx]]
            t = spec.start_at + timedelta(seconds=int(rng.integers(0, spec.burst_seconds)))
            text = generate_lexicon_tweet(rng, lexicon, spec.trend_name)
            if rng.random() < config.proper_noun_rate:
                # A proper noun from the lexicon leads the tweet; the lowercase rule misses these.
                text = proper[int(rng.integers(0, len(proper)))] + " " + text
            drafts.append(_Draft(t, next(seq), bot.account_id, bot.handle, bot.created_at, text, False,
                                 t + timedelta(seconds=spec.delete_after_seconds), spec.trend_name, a_idx))
        listed = spec.start_at + timedelta(seconds=spec.burst_seconds) + delay
        listings[spec.trend_name] = (listed, True)
    for purge in pending:
        apply_purge(purge)

    # ---- organic background
    for spec in organic_specs:
        listings[spec.trend_name] = (spec.start_at + delay, False)
    for name in sorted(listings, key=lambda n: (listings[n][0], n)):
        listed, fake = listings[name]
        onset = listed if fake else listed - delay
        n = int(rng.poisson(config.organic_rate * config.trend_lifetime_minutes))
        offsets = np.sort(rng.integers(0, config.trend_lifetime_minutes * 60, size=n))
        for off in offsets:
            t = onset + timedelta(seconds=int(off))
            uid, handle, created = organic_pool[int(rng.integers(0, len(organic_pool)))]
            text = organic_text(rng, lexicon, name, config.organic_lexicon_rate)
            retweet = rng.random() < config.retweet_rate
            if retweet:
                text = f"RT @{organic_pool[int(rng.integers(0, len(organic_pool)))][1]}: {text}"
            deleted = None
            if rng.random() < config.organic_delete_rate:
                deleted = t + timedelta(seconds=int(rng.integers(60, 7 * 86400)))
            drafts.append(_Draft(t, next(seq), uid, handle, created, text, retweet, deleted, name))

    # ---- visible (never deleted) profile tweets of the bots that attacked
    last_attack: dict[int, datetime] = {}
    for d in drafts:
        if d.attack is not None and d.created_at > last_attack.get(d.author_id, d.created_at - timedelta(1)):
            last_attack[d.author_id] = d.created_at
    if config.visible_tweets_max > 0:
        by_id = {b.account_id: b for b in bots}
        for aid in sorted(last_attack):
            bot = by_id[aid]
            if rng.random() < config.no_visible_rate:
                continue
            n = int(math.exp(rng.uniform(0, math.log(config.visible_tweets_max + 1))))
            n = max(1, min(n, config.visible_tweets_max))
            if config.silence_months is not None:
                newest = max(bot.created_at, add_months(last_attack[aid], -config.silence_months))
                times = [newest] + [_uniform_time(rng, bot.created_at, newest) for _ in range(n - 1)]
            else:
                times = [_uniform_time(rng, bot.created_at, end) for _ in range(n)]
            for t in times:
                retweet = rng.random() < config.retweet_rate
                text = organic_text(rng, lexicon, None)
                if retweet:
                    text = f"RT @{stems[int(rng.integers(0, len(stems)))]}: {text}"
                drafts.append(_Draft(t, next(seq), aid, bot.handle, bot.created_at, text, retweet, None, None))

    # ---- assemble the stream
    drafts.sort(key=lambda d: (d.created_at, d.seq))
    tweets: list[tuple[TweetRecord, _Draft]] = []
    for i, d in enumerate(drafts):
        rec = TweetRecord(TWEET_ID_BASE + i, d.author_id, d.handle, d.created_at, d.account_created_at, d.text, d.is_retweet)
        tweets.append((rec, d))
    events: list[StreamEvent] = [rec for rec, _ in tweets]
    events += [DeletionNotice(rec.tweet_id, rec.author_id, d.deleted_at) for rec, d in tweets if d.deleted_at]
    events.sort(key=lambda e: (e.timestamp, isinstance(e, DeletionNotice), e.tweet_id))
    if config.sample_rate < 1.0:
        events = list(downsample_events(events, config.sample_rate, int(rng.integers(0, 2**63))))

    timeline = _build_timeline(rng, listings, lifetime, config)
    statuses = _statuses(bots, end)
    truth = _ground_truth(config, events, tweets, listings, bots, statuses, rng)
    return Simulation(config, events, timeline, statuses, truth)


def _build_timeline(rng, listings: dict[str, tuple[datetime, bool]], lifetime: timedelta, config: SimConfig) -> TrendTimeline:
    if not listings:
        return TrendTimeline(())
    names = sorted(listings)
    strength = {n: float(rng.random()) + (1.0 if listings[n][1] else 0.0) for n in names}
    step = timedelta(minutes=config.snapshot_minutes)
    order = sorted(names, key=lambda n: listings[n][0])
    first = min(l for l, _ in listings.values())
    last = max(l for l, _ in listings.values()) + lifetime
    # Snapshot grid anchored at the simulation start.
    k0 = math.ceil((first - config.start) / step)
    t = config.start + k0 * step
    snapshots = []
    live: set[str] = set()
    nxt = 0
    while t < last:
        while nxt < len(order) and listings[order[nxt]][0] <= t:
            live.add(order[nxt])
            nxt += 1
        live = {n for n in live if t < listings[n][0] + lifetime}
        if live:
            ranked = sorted(live, key=lambda n: (-strength[n], n))
            snapshots.append(TrendSnapshot(t, tuple((r + 1, n) for r, n in enumerate(ranked))))
        t += step
    return TrendTimeline(tuple(snapshots))


def _statuses(bots: list[_Bot], end: datetime) -> list[AccountStatus]:
    checked = end + timedelta(days=1)
    return [AccountStatus(b.account_id, b.retired_as or Status.ACTIVE, checked) for b in bots]


def _ground_truth(config, events, tweets, listings, bots, statuses, rng) -> GroundTruth:
    kept = {e.tweet_id for e in events if isinstance(e, TweetRecord)}
    deleted = {e.tweet_id for e in events if isinstance(e, DeletionNotice)}
    status_of = {s.account_id: s.status.value for s in statuses}
    bot_by_id = {b.account_id: b for b in bots}

    names = sorted(listings)
    order = [names[int(i)] for i in rng.permutation(len(names))]
    n_test = int(round(config.test_fraction * len(names)))
    split = {n: ("test" if i < n_test else "validation") for i, n in enumerate(order)}
    trends = {n: {"fake": listings[n][1], "split": split[n]} for n in names}

    attack_ids = []
    trend_tweets: dict[str, list[int]] = {n: [] for n in names}
    bot_info: dict[int, dict] = {}
    attack_sets: dict[int, set[int]] = {}
    for rec, d in tweets:
        if rec.tweet_id not in kept:
            continue
        if d.trend is not None:
            trend_tweets[d.trend].append(rec.tweet_id)
        if d.attack is None:
            continue
        attack_ids.append(rec.tweet_id)
        info = bot_info.setdefault(rec.author_id, {"first_attack_at": rec.created_at, "last_attack_at": rec.created_at})
        info["first_attack_at"] = min(info["first_attack_at"], rec.created_at)
        info["last_attack_at"] = max(info["last_attack_at"], rec.created_at)
        attack_sets.setdefault(rec.author_id, set()).add(d.attack)

    visible: dict[int, list[datetime]] = {}
    for rec, _ in tweets:
        if rec.tweet_id in kept and rec.tweet_id not in deleted and rec.author_id in bot_info:
            visible.setdefault(rec.author_id, []).append(rec.created_at)

    bots_out = {}
    for aid in sorted(bot_info):
        b = bot_by_id[aid]
        seen = visible.get(aid, [])
        bots_out[aid] = {
            "handle": b.handle,
            "account_created_at": format_ts(b.created_at),
            "first_attack_at": format_ts(bot_info[aid]["first_attack_at"]),
            "last_attack_at": format_ts(bot_info[aid]["last_attack_at"]),
            "attack_count": len(attack_sets[aid]),
            "status": status_of[aid],
            "visible_tweet_count": len(seen),
            "last_visible_tweet_at": format_ts(max(seen)) if seen else None,
            "default_handle": b.default_handle,
        }
    return GroundTruth(
        tweet_ids=sorted(kept),
        attack_tweet_ids=sorted(attack_ids),
        fake_trends=sorted(n for n in names if listings[n][1]),
        trends=trends,
        trend_tweets=trend_tweets,
        bot_ids=sorted(bot_info),
        bots=bots_out,
        seed=config.seed,
        sample_rate=config.sample_rate,
    )


# ------------------------------------------------------------ sampling

def downsample_events(events: Iterable[StreamEvent], rate: float, seed: int) -> Iterator[StreamEvent]:
    """Keep each tweet with probability ``rate``; a deletion follows its tweet.

    Deletions whose tweet never appeared get their own coin flip.
    """
    if not 0.0 < rate <= 1.0:
        raise ValueError("rate must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    decided: dict[int, bool] = {}
    for event in events:
        if isinstance(event, TweetRecord):
            keep = bool(rng.random() < rate)
            decided[event.tweet_id] = keep
        else:
            keep = decided.get(event.tweet_id)
            if keep is None:
                keep = bool(rng.random() < rate)
        if keep:
            yield event


def downsample(in_path, out_path, rate: float, seed: int) -> None:
    write_stream(out_path, downsample_events(read_stream(in_path), rate, seed))


def restrict_truth(truth: GroundTruth, tweet_ids: Iterable[int]) -> GroundTruth:
    """Ground truth seen through a sample of the stream (bot table left as is)."""
    keep = set(tweet_ids)
    return GroundTruth(
        tweet_ids=[t for t in truth.tweet_ids if t in keep],
        attack_tweet_ids=[t for t in truth.attack_tweet_ids if t in keep],
        fake_trends=truth.fake_trends,
        trends=truth.trends,
        trend_tweets={n: [t for t in ids if t in keep] for n, ids in truth.trend_tweets.items()},
        bot_ids=truth.bot_ids,
        bots=truth.bots,
        seed=truth.seed,
        sample_rate=truth.sample_rate,
    )


# ------------------------------------------------------------- fixtures

def standard_fixture(seed: int = 0, **overrides) -> SimConfig:
    """72 trends over two weeks, about 11k attack and 27k background tweets.

    Half of the trends are attacked once by 200-416 bots posting inside a
    single clock minute.
    """
    rng = np.random.default_rng([seed, 72])
    start = datetime(2022, 5, 17, tzinfo=UTC)
    lexicon = load_lexicon(None)
    used = {turkish_fold(w) for w in lexicon}
    names = make_trend_names(rng, lexicon, 72, used)
    lifetime = 480
    latest = 14 * 24 * 60 - lifetime
    attacks, organic = [], []
    for i, name in enumerate(names):
        t = start + timedelta(minutes=int(rng.integers(60, latest)))
        if i % 2 == 0:
            attacks.append(AttackSpec(name, t, int(rng.integers(200, 417)), burst_seconds=60,
                                      delete_after_seconds=int(rng.integers(60, 600))))
        else:
            organic.append(OrganicTrendSpec(name, t))
    cfg = dict(
        start=start, duration_days=14.0, bot_pool_size=5000, attacks=attacks, organic_trends=organic,
        organic_rate=0.77, trend_lifetime_minutes=lifetime, proper_noun_rate=0.1,
        organic_lexicon_rate=0.05, organic_delete_rate=0.02, seed=seed,
    )
    cfg.update(overrides)
    return SimConfig(**cfg)


PREVALENCE_MONTH_DAYS = 31
PREVALENCE_HEAVY_DAYS = 11  # days with 3 of 5 top trends fake; the rest have 2


def purge_fixture(seed: int = 0, **overrides) -> SimConfig:
    """A year of attacks with a purge at the end of June and a replacement wave.

    January is laid out so each day's top-5 list holds exactly five trends,
    three of them fake on the first eleven days and two afterwards, which
    puts the month's mean daily fake share at 14.6/31 (about 47%).
    """
    rng = np.random.default_rng([seed, 12])
    start = datetime(2022, 1, 1, tzinfo=UTC)
    lexicon = load_lexicon(None)
    used = {turkish_fold(w) for w in lexicon}
    attacks, organic = [], []
    bot_count = 40

    for day in range(PREVALENCE_MONTH_DAYS):
        n_fake = 3 if day < PREVALENCE_HEAVY_DAYS else 2
        names = make_trend_names(rng, lexicon, 5, used)
        fake_slots = set(int(i) for i in rng.choice(5, size=n_fake, replace=False))
        for slot, name in enumerate(names):
            t = start + timedelta(days=day, hours=1 + 4 * slot)
            if slot in fake_slots:
                attacks.append(AttackSpec(name, t, bot_count, delete_after_seconds=120))
            else:
                organic.append(OrganicTrendSpec(name, t))

    day0 = start + timedelta(days=PREVALENCE_MONTH_DAYS)
    for week in range(47):
        base = day0 + timedelta(weeks=week)
        names = make_trend_names(rng, lexicon, 4, used)
        for slot, name in enumerate(names):
            t = base + timedelta(days=int(rng.integers(0, 7)), hours=int(rng.integers(0, 20)))
            if slot < 2:
                attacks.append(AttackSpec(name, t, bot_count, delete_after_seconds=120))
            else:
                organic.append(OrganicTrendSpec(name, t))
    cfg = dict(
        start=start, duration_days=365.0, bot_pool_size=600, active_bots=300, attacks=attacks,
        organic_trends=organic, organic_rate=0.2, trend_lifetime_minutes=180, snapshot_minutes=60,
        purge_schedule=[PurgeSpec("2022-06", 0.9)], replacement_ratio=0.5, proper_noun_rate=0.0,
        organic_lexicon_rate=0.0, organic_delete_rate=0.02, organic_users=3000,
        visible_tweets_max=200, no_visible_rate=0.09, seed=seed,
    )
    cfg.update(overrides)
    return SimConfig(**cfg)
