"""Command-line entry point: simulate, detect, report, evaluate, tune, classify-tweet."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from datetime import timedelta
from pathlib import Path

from . import __version__
from ._io import atomic_write
from .analytics import build_report, write_report
from .anomaly import ForestParams
from .evaluation import (
    DEFAULT_GRID,
    EmptyGridError,
    Predictions,
    UniverseMismatchError,
    evaluate,
    format_table,
    read_predictions,
    tune,
    write_predictions,
)
from .ledger import LedgerSchemaError, accumulate, read_bots_csv, write_bots_csv
from .lexicon import classify_tweet
from .simulator import (
    ConfigError,
    Simulation,
    downsample,
    load_config,
    purge_fixture,
    read_ground_truth,
    simulate,
    standard_fixture,
)
from .stream import (
    StreamError,
    TimelineError,
    TweetRecord,
    load_account_statuses,
    load_trend_timeline,
    read_stream,
)
from .trends import Mode, Thresholds, detect, read_verdicts, write_events, write_verdicts

log = logging.getLogger("astroturf")

EXIT_OK, EXIT_GATE, EXIT_INPUT = 0, 1, 2
INPUT_ERRORS = (
    StreamError, TimelineError, ConfigError, LedgerSchemaError, UniverseMismatchError,
    EmptyGridError, FileNotFoundError, json.JSONDecodeError, KeyError, ValueError,
)
FIXTURES = {"standard": standard_fixture, "purge": purge_fixture}


def _config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, default=str, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def write_manifest(out_dir, command: str, config: dict, seed, inputs: dict, outputs: list, started: float,
                   extra: dict | None = None) -> Path:
    path = Path(out_dir) / "manifest.json"
    manifest = {
        "command": command,
        "config_hash": _config_hash(config),
        "seed": seed,
        "inputs": {k: str(v) for k, v in inputs.items() if v is not None},
        "outputs": [str(p) for p in outputs],
        "version": __version__,
        "duration_seconds": round(time.perf_counter() - started, 3),
        **(extra or {}),
    }
    with atomic_write(path) as fh:
        json.dump(manifest, fh, indent=2, ensure_ascii=False)
        fh.write("\n")
    return path


def _forest(args) -> ForestParams:
    return ForestParams(args.trees, args.subsample, args.outlier_factor, args.seed)


def _thresholds(args) -> Thresholds:
    return Thresholds(args.min_attack_tweets, args.deletion_ratio, timedelta(seconds=args.gap_seconds))


# ------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    started = time.perf_counter()
    if args.config:
        config = load_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
    else:
        config = FIXTURES[args.fixture](args.seed or 0)
    sim: Simulation = simulate(config)
    paths = sim.write(args.out)
    write_manifest(args.out, "simulate", config.to_dict(), config.seed,
                   {"config": args.config, "fixture": None if args.config else args.fixture},
                   list(paths.values()), started)
    t = sim.truth
    print(f"wrote {len(t.tweet_ids)} tweets ({len(t.attack_tweet_ids)} attack), "
          f"{len(t.trends)} trends ({len(t.fake_trends)} fake), {len(t.bot_ids)} bots to {args.out}")
    return EXIT_OK


def cmd_downsample(args) -> int:
    started = time.perf_counter()
    out = Path(args.out)
    target = out / "stream.jsonl"
    downsample(args.stream, target, args.rate, args.seed or 0)
    write_manifest(out, "downsample", {"rate": args.rate}, args.seed or 0, {"stream": args.stream}, [target], started)
    return EXIT_OK


def cmd_detect(args) -> int:
    started = time.perf_counter()
    params, thresholds = _forest(args), _thresholds(args)
    timeline = load_trend_timeline(args.trends)
    statuses = load_account_statuses(args.statuses) if args.statuses else {}
    det = detect(read_stream(args.stream), timeline, args.mode, params, thresholds, threads=args.threads)
    # Second pass over the stream for per-account profile fields and visible tweets.
    ledger = accumulate(det.fake_events(), read_stream(args.stream), det.deletions, statuses)

    out = Path(args.out)
    paths = {name: out / name for name in ("verdicts.jsonl", "events.jsonl", "bots.csv", "predictions.json")}
    write_verdicts(paths["verdicts.jsonl"], det.verdicts)
    write_events(paths["events.jsonl"], det.all_events())
    write_bots_csv(paths["bots.csv"], ledger)
    pred = Predictions.from_detection(det)
    pred.detector = pred.detector or ("lexicon" if det.mode is Mode.SAMPLE_1PCT else "isolation_forest")
    write_predictions(paths["predictions.json"], pred)
    config = {"mode": det.mode.value, "detector": pred.detector, "trees": params.tree_count,
              "subsample": params.subsample_size, "outlier_factor": params.outlier_factor,
              "gap_seconds": args.gap_seconds, "min_attack_tweets": args.min_attack_tweets,
              "deletion_ratio": args.deletion_ratio}
    write_manifest(out, "detect", config, params.seed,
                   {"stream": args.stream, "trends": args.trends, "statuses": args.statuses},
                   list(paths.values()), started, extra={"mode": det.mode.value, "detector": pred.detector})
    print(f"{len(pred.fake_trends)} of {len(pred.trends)} trends fake, "
          f"{len(pred.attack_tweet_ids)} attack tweets, {len(ledger)} bots ({pred.detector})")
    return EXIT_OK


def cmd_report(args) -> int:
    started = time.perf_counter()
    ledger = read_bots_csv(args.bots)
    verdicts = read_verdicts(args.verdicts)
    timeline = load_trend_timeline(args.trends)
    report = build_report(timeline, verdicts, ledger)
    written = write_report(args.out, report, timeline, verdicts)
    write_manifest(args.out, "report", {}, None,
                   {"bots": args.bots, "verdicts": args.verdicts, "trends": args.trends}, written, started)
    print(f"report over {report.ledger_size} bots written to {args.out}")
    return EXIT_OK


def _parse_gate(text: str | None):
    if not text:
        return None
    try:
        p, r = (float(x) for x in text.split(","))
    except ValueError:
        raise ValueError(f"--gate expects 'precision,recall', got {text!r}") from None
    return p, r


def cmd_evaluate(args) -> int:
    gate = _parse_gate(args.gate)
    truth = read_ground_truth(args.truth)
    rows = [evaluate(read_predictions(p), truth, split=args.split) for p in args.predictions]
    print(format_table(rows))
    if gate and any(r.tweets.precision < gate[0] or r.tweets.recall < gate[1] for r in rows):
        print(f"gate failed: attack-tweet precision/recall below {gate[0]}/{gate[1]}", file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


def cmd_tune(args) -> int:
    started = time.perf_counter()
    try:
        grid = [float(x) for x in args.grid.split(",") if x.strip()]
    except ValueError:
        raise ValueError(f"--grid expects comma-separated floats, got {args.grid!r}") from None
    truth = read_ground_truth(args.truth)
    timeline = load_trend_timeline(args.trends)
    events = list(read_stream(args.stream))
    result = tune(events, timeline, truth, grid, _forest(args), _thresholds(args))
    print("outlier_factor  val_P  val_R  val_F1")
    for f, s in result.validation.items():
        print(f"{f:<14g}  " + "  ".join(s.as_row()))
    print(f"best outlier_factor: {result.best_factor:g}")
    print("test  tweet P/R/F1: " + " ".join(result.test.as_row())
          + "  trend P/R/F1: " + " ".join(result.test_trends.as_row()))
    if args.out:
        out = Path(args.out)
        path = out / "tune.json"
        with atomic_write(path) as fh:
            json.dump({
                "best_outlier_factor": result.best_factor,
                "validation": {str(f): s.__dict__ for f, s in result.validation.items()},
                "test": result.test.__dict__,
                "test_trends": result.test_trends.__dict__,
            }, fh, indent=2)
            fh.write("\n")
        write_manifest(out, "tune", {"grid": grid}, args.seed,
                       {"stream": args.stream, "trends": args.trends, "truth": args.truth}, [path], started)
    gate = _parse_gate(args.gate)
    if gate and (result.test.precision < gate[0] or result.test.recall < gate[1]):
        print(f"gate failed: test precision/recall below {gate[0]}/{gate[1]}", file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


def cmd_classify_tweet(args) -> int:
    from datetime import datetime, timezone

    now = datetime(1970, 1, 1, tzinfo=timezone.utc)
    tweet = TweetRecord(0, 0, "", now, now, args.text, args.retweet)
    verdict = classify_tweet(tweet, args.trend or [])
    print("lexicon" if verdict.is_lexicon else "not lexicon")
    if verdict.failed_rules:
        print("failed rules: " + ", ".join(sorted(verdict.failed_rules)))
    return EXIT_OK


# --------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (unsigned 64-bit)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    forest = argparse.ArgumentParser(add_help=False)
    forest.add_argument("--outlier-factor", type=float, default=0.02,
                        help="share of minute windows flagged per trend (default 0.02)")
    forest.add_argument("--trees", type=int, default=100, help="isolation trees (default 100)")
    forest.add_argument("--subsample", type=int, default=256, help="subsample size per tree (default 256)")
    forest.add_argument("--gap-seconds", type=int, default=60,
                        help="max gap between attack tweets of one burst (default 60)")
    forest.add_argument("--min-attack-tweets", type=int, default=4,
                        help="attack tweets a fake trend needs at least (default 4)")
    forest.add_argument("--deletion-ratio", type=float, default=0.45,
                        help="deleted share of attack tweets a fake trend must exceed (default 0.45)")

    parser = argparse.ArgumentParser(prog="astroturf", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a seeded scenario with ground truth")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", help="JSON scenario config")
    src.add_argument("--fixture", choices=sorted(FIXTURES), default="standard", help="built-in scenario")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("downsample", parents=[common], help="keep each tweet with a fixed probability")
    p.add_argument("--stream", required=True)
    p.add_argument("--rate", type=float, default=0.01, help="keep probability (default 0.01)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_downsample)

    p = sub.add_parser("detect", parents=[common, forest], help="label fake trends, attack tweets and bots")
    p.add_argument("--stream", required=True, help="NDJSON event stream")
    p.add_argument("--trends", required=True, help="trend timeline CSV")
    p.add_argument("--statuses", help="account status CSV (missing accounts count as active)")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.FULL.value,
                   help="sample_1pct uses the lexicon rules, full the isolation forest")
    p.add_argument("--threads", type=int, default=1, help="per-trend worker threads")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("report", parents=[common], help="aggregate figures from detect outputs")
    p.add_argument("--bots", required=True)
    p.add_argument("--verdicts", required=True)
    p.add_argument("--trends", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("evaluate", parents=[common], help="precision/recall/F1 against ground truth")
    p.add_argument("--predictions", required=True, nargs="+", help="one or more predictions.json files")
    p.add_argument("--truth", required=True, help="ground_truth.json")
    p.add_argument("--split", choices=["validation", "test"], help="score one trend split only")
    p.add_argument("--gate", help="'precision,recall' minimums; exit 1 when not met")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tune", parents=[common, forest], help="grid-search the outlier factor")
    p.add_argument("--stream", required=True)
    p.add_argument("--trends", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--grid", default=",".join(str(g) for g in DEFAULT_GRID), help="comma-separated factors")
    p.add_argument("--gate", help="'precision,recall' minimums on the test split")
    p.add_argument("--out", help="directory for tune.json")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("classify-tweet", parents=[common], help="run the lexicon rules on one text")
    p.add_argument("text")
    p.add_argument("--trend", action="append", help="trend keyword mentioned in the text (repeatable)")
    p.add_argument("--retweet", action="store_true")
    p.set_defaults(func=cmd_classify_tweet)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seed", None) is None and hasattr(args, "outlier_factor"):
        args.seed = 0
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        msg = exc.args[0] if isinstance(exc, FileNotFoundError) and not exc.filename else exc
        if isinstance(exc, FileNotFoundError) and exc.filename:
            msg = f"file not found: {exc.filename}"
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
