"""Tweet text cleanup and tokenization."""

from __future__ import annotations

import re
from typing import FrozenSet

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_RT_RE = re.compile(r"\bRT\b")  # reserved retweet marker, uppercase only
_CONTRACTION_RE = re.compile(r"n['’]t\b", re.IGNORECASE)

# Common ASCII emoticons; longer patterns first so ":-))" dies before ":-".
_EMOTICON_RE = re.compile(
    r"""(?:
        [<>]?[:;=8][\-o\*']?[\)\]\(\[dDpP/\\\|@3oO\*]+   # :-) ;P =D :o
      | [\)\]\(\[dDpP/\\\|][\-o\*']?[:;=8][<>]?          # (-: reversed
      | <+/?3+                                            # hearts
      | \b[xX][dD]+\b                                     # xD
      | \^_*\^ | [oO]_[oO] | -_- | [tT]_[tT]              # kaomoji
    )""",
    re.VERBOSE,
)

# Emoji and pictograph blocks (stripped explicitly; none are word characters).
_EMOJI_RE = re.compile(
    "["
    "\U0001F000-\U0001FAFF"
    "\U00002600-\U000027BF"
    "\U0001F1E6-\U0001F1FF"
    "\U00002B00-\U00002BFF"
    "\U0000FE00-\U0000FE0F"
    "\U0000200D"
    "]+"
)

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


def clean_and_tokenize(text: str, keep_single: FrozenSet[str] = frozenset()) -> list[str]:
    """Strip tweet noise and split into lowercase tokens.

    URLs, @mentions, emoji, ASCII emoticons, and the reserved ``RT`` marker
    are removed; ``n't`` contractions become ``not`` so negation survives;
    hashtags keep their word with the ``#`` stripped (splitting does this).
    Tokens shorter than 2 characters are dropped unless listed in
    ``keep_single``. Cleaning already-clean text is a no-op.
    """
    s = _URL_RE.sub(" ", text)
    s = _MENTION_RE.sub(" ", s)
    s = _RT_RE.sub(" ", s)
    s = _CONTRACTION_RE.sub(" not", s)
    s = _EMOTICON_RE.sub(" ", s)
    s = _EMOJI_RE.sub(" ", s)
    tokens = _WORD_RE.findall(s.lower())
    return [t for t in tokens if len(t) >= 2 or t in keep_single]
