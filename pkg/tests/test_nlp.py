"""Language detection, cleaning, and sentiment scoring contracts."""

import math
import re
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tweetcast.nlp import (
    DEFAULT_NEUTRAL_TAU,
    NEGATIVE,
    NEUTRAL,
    POSITIVE,
    Lexicon,
    clean_and_tokenize,
    detect_language,
    label_for_score,
    load_lexicon,
    load_stopwords,
    load_trigram_profile,
    parse_lexicon,
    score_sentiment,
    term_frequencies,
)


class TestCleanAndTokenize:
    def test_each_rule_applied_once(self):
        assert clean_and_tokenize("RT @bob check https://x.co #bitcoin GREAT!!") == [
            "check", "bitcoin", "great",
        ]

    def test_emoji_only_is_empty(self):
        assert clean_and_tokenize("\U0001F600\U0001F600") == []

    def test_case_folding_and_splitting(self):
        assert clean_and_tokenize("Bitcoin,bitcoin;BITCOIN") == ["bitcoin"] * 3

    def test_www_urls_and_emoticons(self):
        assert clean_and_tokenize("see www.example.com :-) xD") == ["see"]

    def test_contraction_keeps_negation(self):
        assert "not" in clean_and_tokenize("don't buy")

    def test_short_tokens_dropped_unless_kept(self):
        assert clean_and_tokenize("a bc d") == ["bc"]
        assert clean_and_tokenize("a bc d", keep_single=frozenset("d")) == ["bc", "d"]

    def test_reserved_rt_is_case_sensitive(self):
        assert clean_and_tokenize("RT rt START") == ["rt", "start"]

    @settings(max_examples=200, deadline=None)
    @given(st.text(max_size=120))
    def test_idempotent_on_any_text(self, text):
        once = clean_and_tokenize(text)
        again = clean_and_tokenize(" ".join(once))
        assert again == once


def _independent_language_score(text, lang, w=0.6):
    """Rebuild the blended score from the data files, independently."""
    tokens = re.findall(r"[^\W_]+", text.lower(), re.UNICODE)
    stopwords = load_stopwords(lang)
    ratio = sum(1 for t in tokens if t in stopwords) / len(tokens)
    profile = load_trigram_profile(lang)
    grams = Counter()
    for word in re.findall(r"[^\W\d_]+", text.lower(), re.UNICODE):
        padded = f" {word} "
        for i in range(len(padded) - 2):
            grams[padded[i:i + 3]] += 1
    dot = sum(q * profile.get(g, 0) for g, q in grams.items())
    qn = math.sqrt(sum(q * q for q in grams.values()))
    pn = math.sqrt(sum(c * c for c in profile.values()))
    cos = dot / (qn * pn) if qn else 0.0
    return w * ratio + (1 - w) * cos


class TestDetectLanguage:
    def test_english_stopword_dominated(self):
        assert detect_language("the price of the bitcoin is on the rise").lang == "en"

    def test_spanish_not_english(self):
        text = "el precio de bitcoin sube mucho hoy"
        verdict = detect_language(text)
        assert verdict.lang != "en"
        # oracle: the Spanish blended score must beat the English one
        assert _independent_language_score(text, "es") > _independent_language_score(text, "en")

    def test_empty_text(self):
        verdict = detect_language("")
        assert (verdict.lang, verdict.confidence) == ("und", 0.0)

    def test_score_matches_independent_recomputation(self):
        text = "the price of the coin went up again this morning and most of the people were glad"
        verdict = detect_language(text)
        assert verdict.lang == "en"
        assert verdict.confidence == pytest.approx(
            _independent_language_score(text, "en"), abs=1e-12
        )

    def test_und_iff_below_threshold(self):
        high = detect_language("the price of the bitcoin is on the rise", accept_threshold=0.99)
        assert high.lang == "und"
        assert high.confidence < 0.99
        low = detect_language("the price of the bitcoin is on the rise", accept_threshold=0.1)
        assert low.lang != "und"
        assert low.confidence >= 0.1

    def test_confidence_permutation_stable(self):
        words = "the price of bitcoin is rising very fast today".split()
        base = detect_language(" ".join(words)).confidence
        for perm in (words[::-1], words[3:] + words[:3]):
            assert detect_language(" ".join(perm)).confidence == pytest.approx(base, abs=1e-12)


TINY = Lexicon({"good": 0.6, "bad": -0.6}, frozenset({"not"}), {"very": 1.5})


class TestScoreSentiment:
    def test_empty_tokens(self):
        result = score_sentiment([], TINY)
        assert (result.score, result.label) == (0.0, NEUTRAL)

    def test_single_negation_flip(self):
        result = score_sentiment(["not", "good"], TINY)
        assert result.score < 0
        assert result.label == NEGATIVE

    def test_booster_hand_value(self):
        # raw = 0.6 * 1.5 = 0.9; score = 0.9 / sqrt(0.81 + 15)
        result = score_sentiment(["very", "good"], TINY)
        assert result.score == pytest.approx(0.9 / math.sqrt(0.81 + 15.0), abs=1e-12)
        assert result.label == POSITIVE

    def test_negation_window_is_three(self):
        assert score_sentiment(["not", "x", "y", "good"], TINY).score < 0
        assert score_sentiment(["not", "x", "y", "z", "good"], TINY).score > 0

    def test_tau_must_be_positive(self):
        with pytest.raises(ValueError):
            score_sentiment(["good"], TINY, tau=0.0)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(-0.999, 0.999), st.floats(0.001, 0.5))
    def test_label_band(self, score, tau):
        label = label_for_score(score, tau)
        if score > tau:
            assert label == POSITIVE
        elif score < -tau:
            assert label == NEGATIVE
        else:
            assert label == NEUTRAL

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.sampled_from(["good", "bad", "not", "very", "meh", "x"]), max_size=12))
    def test_score_bounded_and_label_consistent(self, tokens):
        result = score_sentiment(tokens, TINY)
        assert -1.0 < result.score < 1.0
        assert result.label == label_for_score(result.score, DEFAULT_NEUTRAL_TAU)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.sampled_from(["good", "bad", "not", "very", "x"]), max_size=10))
    def test_doubling_valences_never_changes_sign(self, tokens):
        doubled = Lexicon(
            {k: max(-1.0, min(1.0, 2 * v)) for k, v in TINY.entries.items()},
            TINY.negators,
            TINY.boosters,
        )
        a = score_sentiment(tokens, TINY).score
        b = score_sentiment(tokens, doubled).score
        assert (a > 0) == (b > 0) and (a < 0) == (b < 0)


class TestBundledLexicon:
    def test_size_and_structure(self):
        lexicon = load_lexicon()
        assert len(lexicon.entries) > 2500
        assert "not" in lexicon.negators
        assert lexicon.boosters["very"] > 1.0
        assert all(-1.0 <= v <= 1.0 for v in lexicon.entries.values())
        assert all(m > 0 for m in lexicon.boosters.values())

    def test_parse_rejects_bad_sections(self):
        with pytest.raises(Exception):
            parse_lexicon("[wat]\nfoo\t1.0\n")


class TestTermFrequencies:
    def test_basic_counting(self):
        pairs = [(["btc", "up"], NEUTRAL), (["btc"], NEUTRAL)]
        assert term_frequencies(pairs, "all", 1, stopwords=frozenset()) == [("btc", 2)]

    def test_filter_with_no_matching_tweets(self):
        pairs = [(["btc"], NEUTRAL)]
        assert term_frequencies(pairs, POSITIVE, 5, stopwords=frozenset()) == []

    def test_lexicographic_tie_break(self):
        pairs = [(["moon", "hodl"], NEUTRAL)] * 3
        top = term_frequencies(pairs, "all", 2, stopwords=frozenset())
        assert top == [("hodl", 3), ("moon", 3)]

    def test_stopwords_excluded(self):
        pairs = [(["the", "btc"], NEUTRAL)]
        assert term_frequencies(pairs, "all", 5) == [("btc", 1)]
