import hashlib
import json
from datetime import timedelta

import numpy as np
import pytest

from astroturf.lexicon import is_lexicon_tweet
from astroturf.simulator import (
    AttackSpec,
    ConfigError,
    EmptyLexiconError,
    OrganicTrendSpec,
    SimConfig,
    downsample_events,
    generate_lexicon_tweet,
    load_config,
    load_lexicon,
    organic_text,
    simulate,
)
from astroturf.stream import DeletionNotice, TweetRecord, read_stream
from astroturf.trends import Mode, detect

from conftest import at

LEX = load_lexicon()


def test_lexicon_file_is_clean():
    assert len(LEX) == len(set(LEX)) > 200
    assert all(w.isalpha() and w.islower() for w in LEX)


@pytest.mark.parametrize("seed", range(20))
def test_generated_tweets_pass_rules(seed):
    text = generate_lexicon_tweet(np.random.default_rng(seed), LEX, "#FakeTrend")
    assert is_lexicon_tweet(text, ["#FakeTrend"]).is_lexicon
    assert 2 <= len(text.split()) - 1 <= 9


def test_generated_tweets_do_not_repeat():
    texts = {generate_lexicon_tweet(np.random.default_rng(s), LEX, "#T") for s in range(50)}
    assert len(texts) == 50


def test_empty_lexicon():
    with pytest.raises(EmptyLexiconError):
        generate_lexicon_tweet(np.random.default_rng(0), [], "#T")


@pytest.mark.parametrize("seed", range(30))
def test_organic_text_breaks_rules(seed):
    text = organic_text(np.random.default_rng(seed), LEX, "#T")
    assert not is_lexicon_tweet(text, ["#T"]).is_lexicon


def _one_attack(**kw):
    start = at(2022, 5, 19, 19)
    return SimConfig(start=start, duration_days=1, bot_pool_size=300,
                     attacks=[AttackSpec("#FakeTrend", start + timedelta(minutes=59), 200, delete_after_seconds=240)],
                     organic_rate=0.0, organic_users=10, seed=2, **kw)


def test_200_bot_burst():
    sim = simulate(_one_attack())
    tweets = [e for e in sim.events if isinstance(e, TweetRecord)]
    dels = [e for e in sim.events if isinstance(e, DeletionNotice)]
    assert len(tweets) == 200 and len(dels) == 200
    assert {t.created_at.replace(second=0) for t in tweets} == {at(2022, 5, 19, 19, 59)}
    assert max(t.created_at for t in tweets) < min(d.deleted_at for d in dels)
    assert len({t.author_id for t in tweets}) == 200


def test_fake_trend_enters_top5_after_burst():
    sim = simulate(_one_attack())
    first = next(s for s in sim.timeline.snapshots if "#FakeTrend" in s.names)
    assert first.observed_at >= at(2022, 5, 19, 20, 0)
    assert "#FakeTrend" in first.top(5)


def test_zero_attacks():
    start = at(2022, 5, 19)
    cfg = SimConfig(start=start, duration_days=1, bot_pool_size=10,
                    organic_trends=[OrganicTrendSpec("#Gercek", start + timedelta(hours=1))], organic_users=200, seed=1)
    sim = simulate(cfg)
    assert sim.truth.attack_tweet_ids == [] and sim.truth.fake_trends == [] and sim.truth.bot_ids == []
    for mode in Mode:
        assert not any(v.is_fake for v in detect(sim.events, sim.timeline, mode).verdicts)


def test_ground_truth_invariants(standard_sim):
    truth = standard_sim.truth
    authors = {e.tweet_id: e.author_id for e in standard_sim.events if isinstance(e, TweetRecord)}
    attack = set(truth.attack_tweet_ids)
    assert {authors[t] for t in attack} <= set(truth.bot_ids)
    for name, ids in truth.trend_tweets.items():
        if attack & set(ids):
            assert name in truth.fake_trends
    assert len(truth.trends) == 72 and len(truth.fake_trends) == 36
    assert 30_000 < len(truth.tweet_ids) < 45_000
    times = [e.timestamp for e in standard_sim.events]
    assert times == sorted(times)


def test_label_closure_without_noise():
    cfg = _one_attack()
    sim = simulate(cfg)
    for e in sim.events:
        if isinstance(e, TweetRecord):
            assert is_lexicon_tweet(e.text, ["#FakeTrend"]).is_lexicon


def test_purge_shapes(purge_sim):
    bots = purge_sim.truth.bots.values()
    last = {}
    first = {}
    for b in bots:
        last[b["last_attack_at"][:7]] = last.get(b["last_attack_at"][:7], 0) + 1
        first[b["first_attack_at"][:7]] = first.get(b["first_attack_at"][:7], 0) + 1
    assert max(last, key=last.get) == "2022-06"
    first.pop("2022-01")  # the initial pool starts in the first month
    assert max(first, key=first.get) in ("2022-06", "2022-07")
    statuses = {b["status"] for b in bots}
    assert {"active", "suspended", "not_found"} <= statuses


def test_downsample_rate_one_is_identity(standard_sim):
    assert list(downsample_events(standard_sim.events, 1.0, 9)) == standard_sim.events


def test_downsample_keeps_deletions_with_tweets(standard_sim):
    kept = list(downsample_events(standard_sim.events, 0.05, 3))
    ids = {e.tweet_id for e in kept if isinstance(e, TweetRecord)}
    assert all(e.tweet_id in ids for e in kept if isinstance(e, DeletionNotice))
    times = [e.timestamp for e in kept]
    assert times == sorted(times)


def test_downsample_orphan_deletions():
    from conftest import delete
    orphans = [delete(i, i) for i in range(2000)]
    kept = list(downsample_events(orphans, 0.5, 1))
    assert 850 < len(kept) < 1150


def test_downsample_rate_validation():
    with pytest.raises(ValueError):
        list(downsample_events([], 0.0, 1))


def _digest(paths):
    return {k: hashlib.sha256(p.read_bytes()).hexdigest() for k, p in paths.items()}


def test_seed_determinism(tmp_path):
    a = simulate(_one_attack()).write(tmp_path / "a")
    b = simulate(_one_attack()).write(tmp_path / "b")
    assert _digest(a) == _digest(b)
    c = simulate(_one_attack(default_handle_rate=0.5)).write(tmp_path / "c")
    assert _digest(a)["stream"] != _digest(c)["stream"]


def test_written_stream_reads_back(tmp_path):
    sim = simulate(_one_attack())
    paths = sim.write(tmp_path)
    assert list(read_stream(paths["stream"])) == sim.events


def test_config_json_round_trip(tmp_path):
    cfg = _one_attack()
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert load_config(path) == cfg


def test_config_missing_lexicon(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"lexicon": "nope.txt"}))
    cfg = load_config(path)
    with pytest.raises(ConfigError, match="nope.txt"):
        simulate(cfg)


@pytest.mark.parametrize("bad", [
    {"sample_rate": 0},
    {"bot_pool_size": 0},
    {"unknown_field": 1},
    {"attacks": [{"trend_name": "#A", "start_at": "2022-01-01T00:00:00Z", "bot_count": 0}]},
    {"bot_pool_size": 5, "attacks": [{"trend_name": "#A", "start_at": "2022-01-01T00:00:00Z", "bot_count": 9}]},
    {"purge_schedule": [{"month": "June", "fraction": 0.5}]},
    {"organic_delete_rate": 2},
])
def test_config_validation(tmp_path, bad):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(bad))
    with pytest.raises(ConfigError):
        load_config(path)
