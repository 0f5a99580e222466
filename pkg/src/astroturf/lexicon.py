"""Rule-based lexicon-tweet classifier.

A lexicon tweet is a handful of random dictionary words with the target
keyword appended. Three rules decide it, applied to the text left after the
trend mentions are cut out:

* token_count: 2 to 9 whitespace tokens, emoji-only tokens not counted
* lowercase_start: the first non-emoji character is a lowercase letter
* alphabetic_only: tokens hold letters and parentheses only
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .stream import TweetRecord, mention_spans
from .text import strip_emoji

MIN_TOKENS = 2
MAX_TOKENS = 9

TOKEN_COUNT = "token_count"
LOWERCASE_START = "lowercase_start"
ALPHABETIC_ONLY = "alphabetic_only"
RETWEET = "retweet"

RULES = (TOKEN_COUNT, LOWERCASE_START, ALPHABETIC_ONLY)


@dataclass(frozen=True)
class TokenizedTweet:
    tokens: tuple[str, ...]
    emoji_count: int
    stripped_text: str


@dataclass(frozen=True)
class LexiconVerdict:
    is_lexicon: bool
    failed_rules: frozenset[str]

    @classmethod
    def from_failures(cls, failed: Iterable[str]) -> "LexiconVerdict":
        failed = frozenset(failed)
        return cls(not failed, failed)


def strip_mentions(text: str, trend_mentions: Iterable[str]) -> str:
    spans = mention_spans(text, trend_mentions)
    if not spans:
        return text
    pieces = []
    pos = 0
    for start, end in spans:
        if start < pos:
            start = pos
        if end <= start:
            continue
        pieces.append(text[pos:start])
        pieces.append(" ")
        pos = end
    pieces.append(text[pos:])
    return "".join(pieces)


def tokenize(text: str, trend_mentions: Iterable[str] = ()) -> TokenizedTweet:
    stripped = strip_mentions(text, trend_mentions)
    tokens = []
    emoji_count = 0
    for raw in stripped.split():
        rest, had_emoji = strip_emoji(raw)
        if not rest:
            if had_emoji:
                emoji_count += 1
            continue
        tokens.append(rest)
    return TokenizedTweet(tuple(tokens), emoji_count, stripped)


def _is_token_char(ch: str) -> bool:
    return ch.isalpha() or ch in "()"


def rule_failures(tok: TokenizedTweet) -> set[str]:
    failed = set()
    if not MIN_TOKENS <= len(tok.tokens) <= MAX_TOKENS:
        failed.add(TOKEN_COUNT)
    # Tokens already have emoji removed, so the first token's first char is the
    # first non-emoji character of the stripped text.
    if not tok.tokens or not tok.tokens[0][0].islower():
        failed.add(LOWERCASE_START)
    if not all(_is_token_char(ch) for t in tok.tokens for ch in t):
        failed.add(ALPHABETIC_ONLY)
    return failed


def is_lexicon_tweet(text: str, trend_mentions: Iterable[str] = ()) -> LexiconVerdict:
    return LexiconVerdict.from_failures(rule_failures(tokenize(text, trend_mentions)))


def classify_tweet(tweet: TweetRecord, trend_mentions: Iterable[str]) -> LexiconVerdict:
    # Attacks are original posts; retweets are rejected without running the rules.
    if tweet.is_retweet:
        return LexiconVerdict(False, frozenset({RETWEET}))
    return is_lexicon_tweet(tweet.text, trend_mentions)


def classify_batch(tweets: Sequence[tuple[TweetRecord, Sequence[str]]]) -> list[LexiconVerdict]:
    return [classify_tweet(tweet, mentions) for tweet, mentions in tweets]
