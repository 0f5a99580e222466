"""Unicode helpers: Turkish-aware case folding, emoji detection, keyword patterns."""

from __future__ import annotations

import functools

import regex

_TURKISH_LOWER = {"I": "ı", "İ": "i"}

# Characters that only ever appear as parts of emoji sequences.
_EMOJI_CHAR = regex.compile(
    r"[\p{Extended_Pictographic}\p{Emoji_Modifier}\p{Regional_Indicator}"
    r"\u200d\ufe0e\ufe0f\u20e3\U000e0020-\U000e007f]"
)
# Keycap sequences start with an ASCII digit, '#' or '*', which are not emoji on their own.
_KEYCAP = regex.compile(r"[0-9#*]\ufe0f?\u20e3")


def fold_char(ch: str) -> str:
    mapped = _TURKISH_LOWER.get(ch)
    if mapped is not None:
        return mapped
    low = ch.lower()
    # Keep folding length-preserving so match offsets map back onto the original text.
    return low if len(low) == 1 else ch


def turkish_fold(text: str) -> str:
    """Lowercase ``text`` with Turkish dotted/dotless i rules, one char per char."""
    return "".join(fold_char(ch) for ch in text)


def is_emoji_char(ch: str) -> bool:
    return _EMOJI_CHAR.match(ch) is not None


def strip_emoji(token: str) -> tuple[str, bool]:
    """Remove emoji from ``token``.

    Returns the remaining text and whether any emoji was removed.
    """
    without_keycaps = _KEYCAP.sub("", token)
    remaining = _EMOJI_CHAR.sub("", without_keycaps)
    return remaining, remaining != token


@functools.lru_cache(maxsize=8192)
def keyword_pattern(keyword: str) -> regex.Pattern:
    """Compile the matcher for a trend keyword against folded text.

    Hashtags match as a whole ``#tag``; n-grams match as a contiguous run of
    whitespace-separated words, optionally written as a hashtag.
    """
    folded = turkish_fold(keyword.strip())
    words = folded.split()
    if not words:
        raise ValueError("empty trend keyword")
    body = r"\s+".join(regex.escape(w) for w in words)
    if folded.startswith("#"):
        return regex.compile(rf"(?<![\w#]){body}(?!\w)")
    return regex.compile(rf"(?<![\w#])#?{body}(?!\w)")
