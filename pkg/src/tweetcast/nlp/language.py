"""Lightweight language identification.

Scores a text against built-in per-language profiles as a convex blend of
two signals: the fraction of tokens that are stopwords of the language,
and the cosine similarity between the text's character-trigram counts and
the language's trigram profile (trigrams taken per word, each word padded
with one space on both sides, so scores are invariant to word order).
The best-scoring language is accepted only when its blended score reaches
the acceptance threshold; otherwise the verdict is ``und``.

Profiles live in ``data/trigrams_<lang>.txt`` (token<TAB>count, ``_`` for
space) and ``data/stopwords_<lang>.txt``; both were built from bundled
sample prose and are replaceable.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources

DEFAULT_ACCEPT_THRESHOLD = 0.5
DEFAULT_STOPWORD_WEIGHT = 0.6

_TOKEN_RE = re.compile(r"[^\W\d_]+", re.UNICODE)


@dataclass(frozen=True)
class LanguageVerdict:
    lang: str  # ISO-639-1 code, or "und" below threshold
    confidence: float  # blended score of the best candidate, in [0, 1]


@dataclass(frozen=True)
class LanguageProfile:
    lang: str
    stopwords: frozenset
    trigram_counts: dict
    trigram_norm: float


def _data_text(name: str) -> str:
    return resources.files("tweetcast.nlp").joinpath("data", name).read_text(encoding="utf-8")


def load_stopwords(lang: str) -> frozenset:
    words = []
    for line in _data_text(f"stopwords_{lang}.txt").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line)
    return frozenset(words)


def load_trigram_profile(lang: str) -> dict:
    counts: dict = {}
    for line in _data_text(f"trigrams_{lang}.txt").splitlines():
        if not line or line.startswith("#"):
            continue
        gram, _, cnt = line.partition("\t")
        counts[gram.replace("_", " ")] = int(cnt)
    return counts


_PROFILES: dict | None = None


def builtin_languages() -> tuple:
    files = resources.files("tweetcast.nlp").joinpath("data")
    langs = sorted(
        entry.name[len("trigrams_") : -len(".txt")]
        for entry in files.iterdir()
        if entry.name.startswith("trigrams_") and entry.name.endswith(".txt")
    )
    return tuple(langs)


def _profiles() -> dict:
    global _PROFILES
    if _PROFILES is None:
        profs = {}
        for lang in builtin_languages():
            counts = load_trigram_profile(lang)
            norm = math.sqrt(sum(c * c for c in counts.values()))
            profs[lang] = LanguageProfile(lang, load_stopwords(lang), counts, norm)
        _PROFILES = profs
    return _PROFILES


def text_trigrams(text: str) -> Counter:
    """Per-word padded character trigrams of the lowercased text."""
    grams: Counter = Counter()
    for word in _TOKEN_RE.findall(text.lower()):
        padded = f" {word} "
        for i in range(len(padded) - 2):
            grams[padded[i : i + 3]] += 1
    return grams


def trigram_cosine(grams: Counter, profile: LanguageProfile) -> float:
    if not grams or profile.trigram_norm == 0.0:
        return 0.0
    dot = 0.0
    counts = profile.trigram_counts
    for gram, q in grams.items():
        p = counts.get(gram)
        if p:
            dot += q * p
    qnorm = math.sqrt(sum(q * q for q in grams.values()))
    return dot / (qnorm * profile.trigram_norm)


def detect_language(
    text: str,
    accept_threshold: float = DEFAULT_ACCEPT_THRESHOLD,
    stopword_weight: float = DEFAULT_STOPWORD_WEIGHT,
) -> LanguageVerdict:
    """Identify the language of ``text``; ``("und", 0.0)`` for empty input."""
    tokens = _TOKEN_RE.findall(text.lower())
    if not tokens:
        return LanguageVerdict("und", 0.0)
    grams = text_trigrams(text)
    w = stopword_weight
    best_lang = "und"
    best_score = -1.0
    for lang, profile in sorted(_profiles().items()):
        hits = sum(1 for t in tokens if t in profile.stopwords)
        stop_ratio = hits / len(tokens)
        score = w * stop_ratio + (1.0 - w) * trigram_cosine(grams, profile)
        if score > best_score:
            best_lang, best_score = lang, score
    if best_score < accept_threshold:
        return LanguageVerdict("und", best_score)
    return LanguageVerdict(best_lang, best_score)
