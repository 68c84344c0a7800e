"""Lexicon-based sentiment scoring with negation and booster handling.

The scorer walks the token list and sums, for every token found in the
valence lexicon, its valence flipped by a negator occurring among the
three preceding tokens and amplified or dampened by a booster immediately
before it. The raw sum is squashed to (-1, 1) with ``x / sqrt(x^2 + 15)``
and mapped to a three-way label around a symmetric neutral band.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

from ..errors import DataError
from .language import load_stopwords

#: Squashing constant: the raw score magnitude that maps to ~0.25.
NORMALIZATION_ALPHA = 15.0

#: Default half-width of the neutral band.
DEFAULT_NEUTRAL_TAU = 0.05

#: Negation lookback, in tokens.
NEGATION_WINDOW = 3

POSITIVE = "positive"
NEGATIVE = "negative"
NEUTRAL = "neutral"
LABELS = (POSITIVE, NEGATIVE, NEUTRAL)


@dataclass(frozen=True)
class SentimentResult:
    score: float  # in (-1, 1)
    label: str  # positive / neutral / negative


@dataclass(frozen=True)
class Lexicon:
    """Valence word list plus negator and booster vocabularies."""

    entries: dict = field(default_factory=dict)  # token -> valence in [-1, 1]
    negators: frozenset = field(default_factory=frozenset)
    boosters: dict = field(default_factory=dict)  # token -> multiplier > 0

    def single_char_tokens(self) -> frozenset:
        return frozenset(t for t in self.entries if len(t) == 1)


class LexiconFormatError(DataError):
    pass


def parse_lexicon(text: str) -> Lexicon:
    """Parse the lexicon file format.

    Sections are headed by ``[valences]`` (token<TAB>valence), ``[negators]``
    (one token per line), and ``[boosters]`` (token<TAB>multiplier). Valences
    are clamped to [-1, 1]; multipliers must be finite and positive.
    """
    entries: dict = {}
    negators: set = set()
    boosters: dict = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1]
            if section not in ("valences", "negators", "boosters"):
                raise LexiconFormatError(f"line {lineno}: unknown section {section!r}")
            continue
        if section == "valences":
            token, _, raw = line.partition("\t")
            try:
                valence = float(raw)
            except ValueError:
                raise LexiconFormatError(f"line {lineno}: bad valence {raw!r}") from None
            entries[token] = max(-1.0, min(1.0, valence))
        elif section == "negators":
            negators.add(line)
        elif section == "boosters":
            token, _, raw = line.partition("\t")
            try:
                mult = float(raw)
            except ValueError:
                raise LexiconFormatError(f"line {lineno}: bad multiplier {raw!r}") from None
            if not (mult > 0 and math.isfinite(mult)):
                raise LexiconFormatError(f"line {lineno}: multiplier must be finite and > 0")
            boosters[token] = mult
        else:
            raise LexiconFormatError(f"line {lineno}: content before a section header")
    return Lexicon(entries, frozenset(negators), boosters)


def load_lexicon(path=None) -> Lexicon:
    """Load the bundled lexicon, or a replacement file with the same format."""
    if path is None:
        text = resources.files("tweetcast.nlp").joinpath("data", "lexicon.txt").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    return parse_lexicon(text)


def label_for_score(score: float, tau: float = DEFAULT_NEUTRAL_TAU) -> str:
    """Three-way label: positive above +tau, negative below -tau, else neutral."""
    if score > tau:
        return POSITIVE
    if score < -tau:
        return NEGATIVE
    return NEUTRAL


def score_sentiment(
    tokens: Sequence[str], lexicon: Lexicon, tau: float = DEFAULT_NEUTRAL_TAU
) -> SentimentResult:
    """Score a cleaned token list; empty input is (0.0, neutral)."""
    if tau <= 0:
        raise ValueError("neutral threshold tau must be > 0")
    entries = lexicon.entries
    negators = lexicon.negators
    boosters = lexicon.boosters
    raw = 0.0
    for i, token in enumerate(tokens):
        valence = entries.get(token)
        if valence is None:
            continue
        term = valence
        if i > 0:
            mult = boosters.get(tokens[i - 1])
            if mult is not None:
                term *= mult
            lo = i - NEGATION_WINDOW if i >= NEGATION_WINDOW else 0
            for j in range(lo, i):
                if tokens[j] in negators:
                    term = -term
                    break
        raw += term
    score = raw / math.sqrt(raw * raw + NORMALIZATION_ALPHA)
    return SentimentResult(score, label_for_score(score, tau))


def term_frequencies(
    labeled_tokens: Iterable[tuple[Sequence[str], str]],
    label_filter: str = "all",
    n: int = 20,
    stopwords: frozenset | None = None,
) -> list[tuple[str, int]]:
    """Top-N token counts over tweets whose label matches the filter.

    Stopwords are excluded (English list by default); ties break
    lexicographically.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if label_filter != "all" and label_filter not in LABELS:
        raise ValueError(f"unknown label filter {label_filter!r}")
    if stopwords is None:
        stopwords = load_stopwords("en")
    counts: Counter = Counter()
    for tokens, label in labeled_tokens:
        if label_filter != "all" and label != label_filter:
            continue
        for token in tokens:
            if token not in stopwords:
                counts[token] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:n]
