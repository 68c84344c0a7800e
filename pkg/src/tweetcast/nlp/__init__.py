"""Language filtering, tweet cleaning, and lexicon sentiment."""

from .cleaning import clean_and_tokenize
from .language import (
    DEFAULT_ACCEPT_THRESHOLD,
    DEFAULT_STOPWORD_WEIGHT,
    LanguageVerdict,
    builtin_languages,
    detect_language,
    load_stopwords,
    load_trigram_profile,
)
from .sentiment import (
    DEFAULT_NEUTRAL_TAU,
    LABELS,
    NEGATIVE,
    NEUTRAL,
    POSITIVE,
    Lexicon,
    SentimentResult,
    label_for_score,
    load_lexicon,
    parse_lexicon,
    score_sentiment,
    term_frequencies,
)

__all__ = [
    "DEFAULT_ACCEPT_THRESHOLD",
    "DEFAULT_NEUTRAL_TAU",
    "DEFAULT_STOPWORD_WEIGHT",
    "LABELS",
    "LanguageVerdict",
    "Lexicon",
    "NEGATIVE",
    "NEUTRAL",
    "POSITIVE",
    "SentimentResult",
    "builtin_languages",
    "clean_and_tokenize",
    "detect_language",
    "label_for_score",
    "load_lexicon",
    "load_stopwords",
    "load_trigram_profile",
    "parse_lexicon",
    "score_sentiment",
    "term_frequencies",
]
