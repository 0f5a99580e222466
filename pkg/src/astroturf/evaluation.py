"""Scoring of detector output against simulator ground truth, and factor tuning."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from ._io import atomic_write
from .anomaly import ForestParams, anomaly_budget, group_minute_windows, score_windows
from .simulator import GroundTruth
from .trends import Detection, Mode, Thresholds, classify_trend, collect_trend_streams

DEFAULT_GRID = (0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1)


class UniverseMismatchError(ValueError):
    pass


class EmptyGridError(ValueError):
    pass


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float
    support: int
    predicted: int

    def as_row(self) -> list[str]:
        return [f"{self.precision:.3f}", f"{self.recall:.3f}", f"{self.f1:.3f}"]


def prf(predicted: Iterable, truth: Iterable) -> Scores:
    """Precision is 1.0 on an empty prediction set; recall is 0.0 on an empty truth set."""
    pred, true = set(predicted), set(truth)
    tp = len(pred & true)
    precision = tp / len(pred) if pred else 1.0
    recall = tp / len(true) if true else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Scores(precision, recall, f1, len(true), len(pred))


@dataclass
class Predictions:
    mode: str
    detector: str
    tweet_ids: list[int]
    attack_tweet_ids: list[int]
    trends: list[str]
    fake_trends: list[str]

    kind = "predictions"

    @classmethod
    def from_detection(cls, det: Detection) -> "Predictions":
        verdicts = det.verdicts
        detector = verdicts[0].detector.value if verdicts else ""
        return cls(
            mode=det.mode.value,
            detector=detector,
            tweet_ids=sorted(det.tweet_ids),
            attack_tweet_ids=sorted(det.attack_tweet_ids),
            trends=[v.trend_name for v in verdicts],
            fake_trends=[v.trend_name for v in verdicts if v.is_fake],
        )

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mode": self.mode, "detector": self.detector,
                "tweet_ids": self.tweet_ids, "attack_tweet_ids": self.attack_tweet_ids,
                "trends": self.trends, "fake_trends": self.fake_trends}

    @classmethod
    def from_dict(cls, obj: dict) -> "Predictions":
        if obj.get("kind") != cls.kind:
            raise ValueError(f"not a predictions file (kind={obj.get('kind')!r})")
        return cls(obj["mode"], obj["detector"], obj["tweet_ids"], obj["attack_tweet_ids"],
                   obj["trends"], obj["fake_trends"])


def write_predictions(path, pred: Predictions) -> None:
    with atomic_write(path) as fh:
        json.dump(pred.to_dict(), fh, ensure_ascii=False, separators=(",", ":"))
        fh.write("\n")


def read_predictions(path) -> Predictions:
    with open(path, encoding="utf-8") as fh:
        return Predictions.from_dict(json.load(fh))


@dataclass
class Evaluation:
    mode: str
    detector: str
    tweets: Scores
    trends: Scores


def evaluate(pred: Predictions, truth: GroundTruth, split: str | None = None) -> Evaluation:
    """Attack-tweet and fake-trend scores over the tweets the detector saw.

    The truth is cut down to the prediction's tweet universe, so a sampled
    stream is scored against the attack tweets it actually contains.
    """
    seen = set(pred.tweet_ids)
    universe = set(truth.tweet_ids)
    extra = seen - universe
    if extra:
        raise UniverseMismatchError(
            f"{len(extra)} predicted tweet ids are absent from the ground truth (e.g. {min(extra)})"
        )
    unknown = set(pred.trends) - set(truth.trends)
    if unknown:
        raise UniverseMismatchError(f"trends absent from the ground truth: {', '.join(sorted(unknown)[:3])}")
    true_attack = {t for t in truth.attack_tweet_ids if t in seen}
    pred_attack = set(pred.attack_tweet_ids)
    pred_fake, true_fake = set(pred.fake_trends), set(truth.fake_trends)
    if split is not None:
        names = truth.split_trends(split)
        keep = {t for n in names for t in truth.trend_tweets.get(n, ())}
        true_attack &= keep
        pred_attack &= keep
        pred_fake &= names
        true_fake &= names
    return Evaluation(pred.mode, pred.detector, prf(pred_attack, true_attack), prf(pred_fake, true_fake))


def format_table(rows: Sequence[Evaluation]) -> str:
    header = ["detector", "data", "tweet_P", "tweet_R", "tweet_F1", "trend_P", "trend_R", "trend_F1"]
    body = [[r.detector, r.mode, *r.tweets.as_row(), *r.trends.as_row()] for r in rows]
    widths = [max(len(str(x)) for x in col) for col in zip(header, *body)]
    lines = ["  ".join(str(x).ljust(w) for x, w in zip(line, widths)).rstrip() for line in [header, *body]]
    return "\n".join(lines)


# ---------------------------------------------------------------- tuning

@dataclass
class TuneResult:
    best_factor: float
    validation: dict[float, Scores]
    test: Scores
    test_trends: Scores


def tune(events, timeline, truth: GroundTruth, grid: Sequence[float] = DEFAULT_GRID,
         params: ForestParams = ForestParams(), thresholds: Thresholds = Thresholds()) -> TuneResult:
    """Pick the outlier factor with the best validation F1 and score it on the test split.

    The forest only depends on the factor through the flagging budget, so
    windows are scored once per trend and each grid point re-ranks them.
    Ties on F1 go to the smaller factor.
    """
    grid = sorted(set(grid))
    if not grid:
        raise EmptyGridError("factor grid is empty")
    for f in grid:
        ForestParams(params.tree_count, params.subsample_size, f, params.seed)

    streams, deletions, _ = collect_trend_streams(events, timeline, thresholds.horizon)
    ranked: dict[str, list[tuple[int, ...]]] = {}
    for name, stream in streams.items():
        windows = group_minute_windows(stream.tweets)
        scores = score_windows(windows, params)
        if scores is None:
            ranked[name] = []
            continue
        order = sorted(range(len(windows)), key=lambda i: (-scores[i], -windows[i].count, windows[i].window_start))
        ranked[name] = [windows[i].tweet_ids for i in order]
    n_windows = {name: len(group_minute_windows(s.tweets)) for name, s in streams.items()}

    def flagged(factor: float, names: Iterable[str]) -> dict[str, set[int]]:
        out = {}
        for name in names:
            k = anomaly_budget(n_windows[name], factor) if ranked[name] else 0
            out[name] = {t for ids in ranked[name][:k] for t in ids}
        return out

    def split_scores(factor: float, split: str) -> tuple[Scores, Scores]:
        names = truth.split_trends(split)
        flags = flagged(factor, [n for n in streams if n in names])
        pred = {t for ids in flags.values() for t in ids}
        true = {t for n in names for t in truth.trend_tweets.get(n, ())} & set(truth.attack_tweet_ids)
        fake = {n for n, ids in flags.items() if classify_trend(n, ids, deletions, thresholds).is_fake}
        return prf(pred, true), prf(fake, names & set(truth.fake_trends))

    validation = {f: split_scores(f, "validation")[0] for f in grid}
    best = max(grid, key=lambda f: (validation[f].f1, -f))
    test, test_trends = split_scores(best, "test")
    return TuneResult(best, validation, test, test_trends)
