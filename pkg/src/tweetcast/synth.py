"""Synthetic corpora with planted, recoverable structure.

The full-scale corpus the study used is not redistributable, so tests and
demos run on generated data where the ground truth is known: the next-day
close is an exact linear function of the pipeline's own day-level features
plus Gaussian noise, user behavior falls into three archetypes, roughly a
fifth of the tweets are non-English, and sentiment-bearing words appear at
rates that keep the label mix strongly neutral.

Everything is driven by one seed; the same seed gives byte-identical
files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone

import numpy as np

from .features import FEATURE_COLUMNS, DailyAggregator, SENTIMENT_INDEX
from .ingest import RawTweet
from .nlp import clean_and_tokenize, detect_language, load_lexicon, score_sentiment

UTC = timezone.utc

POSITIVE_TEXTS = (
    "the price of bitcoin is very good today and the chart agrees with it",
    "this is a great day for btc and the rally is amazing to watch",
    "we are very bullish on bitcoin now because the trend is so strong",
    "the breakout in btc looks excellent and we are happy with the gains",
    "the market is up again and bitcoin is winning big for all of us",
    "this is wonderful news for bitcoin and the growth will not stop",
)

NEGATIVE_TEXTS = (
    "this crash in bitcoin is terrible and the losses are very painful",
    "btc looks very weak today and there is panic in all of the forums",
    "we are bearish on bitcoin because this dump is a disaster for us",
    "the market is down again and bitcoin looks broken to most of us",
    "this was an awful day for btc and there is fear in all the charts",
)

NEUTRAL_TEXTS = (
    "the price of bitcoin is {price} dollars at this hour of the day",
    "the volume of bitcoin for the day is near what it was in the week",
    "here is the daily btc chart with the usual levels marked on it",
    "the exchange lists bitcoin at {price} and the spread is the same",
    "we are watching the book of orders for btc during the day today",
    "the count of the confirmations and the rate of fees is as it was",
    "here is the summary; the first and the last trade and the range",
    'an analyst said "the market needs more time" and that was all of it',
    "the number of transactions on the network was the same as before",
    "btc traded sideways for most of the afternoon and into the night",
)

NON_ENGLISH_TEXTS = (
    "el precio de bitcoin sube mucho hoy y todos lo comentan",
    "la gente habla de bitcoin en las redes durante toda la tarde",
    "le prix du bitcoin monte encore ce matin sur les marches",
    "tout le monde parle de bitcoin dans les forums ce soir",
    "der preis von bitcoin steigt heute sehr stark an der boerse",
    "alle sprechen heute ueber bitcoin und die neuen kurse",
)

#: Planted next-day signal, in units of one noise standard deviation per
#: standard deviation of the (centered) feature combination.
DEFAULT_SIGNAL_TO_NOISE = 1.3


@dataclass(frozen=True)
class CorpusSpec:
    n_tweets: int = 10000
    n_days: int = 400
    start: date = date(2017, 1, 1)
    seed: int = 42
    base_price: float = 6000.0
    noise_std: float = 35.0
    signal_to_noise: float = DEFAULT_SIGNAL_TO_NOISE
    non_english_share: float = 0.20
    positive_share: float = 0.07
    negative_share: float = 0.03


def _day_weights(spec: CorpusSpec, rng: np.random.Generator) -> np.ndarray:
    days = np.arange(spec.n_days)
    trend = 1.0 + 0.8 * days / spec.n_days  # volume grows over the window
    weekday = np.array(
        [1.25 if (spec.start + timedelta(days=int(d))).weekday() == 4 else 1.0 for d in days]
    )
    wobble = rng.lognormal(0.0, 0.25, size=spec.n_days)
    w = trend * weekday * wobble
    return w / w.sum()

_HOUR_WEIGHTS = np.array([0.5] * 9 + [1.6] * 9 + [0.8] * 6)


@dataclass(frozen=True)
class UserGroup:
    prefix: str
    n_users: int
    tweet_share: float
    likes_mu: float  # lognormal parameters
    likes_sigma: float
    retweet_factor: float


USER_GROUPS = (
    UserGroup("casual", 600, 0.55, 0.2, 1.0, 0.3),
    UserGroup("active", 120, 0.35, 2.5, 1.0, 0.4),
    UserGroup("influencer", 25, 0.10, 6.2, 1.0, 0.6),
)


def generate_corpus(tweets_path, prices_path, spec: CorpusSpec = CorpusSpec()) -> dict:
    """Write a tweet corpus and matching price series; returns ground truth.

    The price increment from day t to t+1 is
    ``beta . (day features of t, centered) + Normal(0, noise_std)``, with
    the day features computed by the same language filter, cleaner,
    sentiment scorer, and aggregator the pipeline uses, so a linear model
    over the pipeline's design matrix can recover the signal exactly.
    """
    rng = np.random.default_rng(spec.seed)
    day_p = _day_weights(spec, rng)
    hour_p = _HOUR_WEIGHTS / _HOUR_WEIGHTS.sum()
    group_p = np.array([g.tweet_share for g in USER_GROUPS])
    lexicon = load_lexicon()

    day_idx = rng.choice(spec.n_days, size=spec.n_tweets, p=day_p)
    day_idx.sort(kind="stable")
    rows = []
    agg = DailyAggregator()
    for i in range(spec.n_tweets):
        day = spec.start + timedelta(days=int(day_idx[i]))
        hour = int(rng.choice(24, p=hour_p))
        ts = datetime(day.year, day.month, day.day, hour, int(rng.integers(60)),
                      int(rng.integers(60)), tzinfo=UTC)
        group = USER_GROUPS[int(rng.choice(len(USER_GROUPS), p=group_p))]
        user = f"{group.prefix}{int(rng.integers(group.n_users)):04d}"
        likes = int(rng.lognormal(group.likes_mu, group.likes_sigma))
        retweets = int(likes * group.retweet_factor * rng.random())
        replies = int(rng.poisson(1.2))
        u = rng.random()
        if u < spec.non_english_share:
            text = NON_ENGLISH_TEXTS[int(rng.integers(len(NON_ENGLISH_TEXTS)))]
        elif u < spec.non_english_share + spec.positive_share:
            text = POSITIVE_TEXTS[int(rng.integers(len(POSITIVE_TEXTS)))]
        elif u < spec.non_english_share + spec.positive_share + spec.negative_share:
            text = NEGATIVE_TEXTS[int(rng.integers(len(NEGATIVE_TEXTS)))]
        else:
            text = NEUTRAL_TEXTS[int(rng.integers(len(NEUTRAL_TEXTS)))]
            if "{price}" in text:
                text = text.format(price=int(rng.integers(3000, 20000)))
        tweet = RawTweet(f"t{i:08d}", user, ts, replies, likes, retweets, text)
        rows.append(tweet)
        if detect_language(text).lang == "en":
            label = score_sentiment(clean_and_tokenize(text), lexicon).label
            agg.add(tweet, SENTIMENT_INDEX[label])

    with open(tweets_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=";", quoting=csv.QUOTE_MINIMAL)
        writer.writerow(["id", "user", "timestamp", "replies", "likes", "retweets", "text"])
        for tw in rows:
            writer.writerow(
                [tw.id, tw.username, tw.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
                 str(tw.replies), str(tw.likes), str(tw.retweets), tw.text]
            )

    # Planted signal over the pipeline's own feature space.
    feature_rows = {r.date: r for r in agg.rows()}
    beta = {
        "tweet_volume": 1.0,
        "sent_positive": 6.0,
        "sent_negative": -9.0,
        "likes_gt_10": 0.8,
        "hour_12": 1.5,
    }
    all_days = [spec.start + timedelta(days=d) for d in range(spec.n_days)]
    combos = []
    for day in all_days:
        row = feature_rows.get(day)
        vec = dict(zip(FEATURE_COLUMNS, [0.0] * len(FEATURE_COLUMNS)))
        if row is not None:
            vec.update(
                tweet_volume=row.tweet_volume,
                sent_positive=row.sent_counts[0],
                sent_negative=row.sent_counts[1],
                likes_gt_10=row.likes_gt[1],
                hour_12=row.hour_hist[12],
            )
        combos.append(sum(beta[k] * vec[k] for k in beta))
    combos = np.array(combos)
    centered = combos - combos.mean()
    spread = centered.std()
    scale = spec.signal_to_noise * spec.noise_std / spread if spread > 0 else 0.0
    noise = rng.normal(0.0, spec.noise_std, size=spec.n_days)
    increments = scale * centered + noise

    closes = [spec.base_price]
    for inc in increments:  # close[i+1] = close[i] + signal(day i) + noise
        closes.append(max(closes[-1] + float(inc), 50.0))
    price_days = [spec.start - timedelta(days=1)] + all_days + [spec.start + timedelta(days=spec.n_days)]
    price_values = [spec.base_price * 0.995] + closes
    with open(prices_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "close"])
        for day, close in zip(price_days, price_values):
            writer.writerow([day.isoformat(), repr(float(close))])

    return {
        "n_tweets": spec.n_tweets,
        "n_days": spec.n_days,
        "seed": spec.seed,
        "noise_std": spec.noise_std,
        "signal_scale": float(scale),
        "beta": beta,
        "window": (spec.start.isoformat(), (spec.start + timedelta(days=spec.n_days - 1)).isoformat()),
    }


def generate_bulk_corpus(tweets_path, prices_path, n_rows: int, seed: int = 42,
                         start: date = date(2016, 6, 1), n_days: int = 700) -> dict:
    """Fast plain-text corpus for throughput runs (no NLP in the loop).

    Text comes from a tiny fixed pool (some with embedded delimiters and
    quotes so the quoting path is exercised); prices are a seeded random
    walk covering the span plus one day on each side.
    """
    rng = np.random.default_rng(seed)
    texts = (
        "the price of btc is moving with the market today",
        'traders said "hold the line; volume is thin" this morning',
        "daily bitcoin chart update for the session",
        "btc volume; likes and replies all look ordinary",
    )
    base = datetime(start.year, start.month, start.day, tzinfo=UTC)
    day_offsets = rng.integers(0, n_days, size=n_rows)
    seconds = rng.integers(0, 86400, size=n_rows)
    likes = rng.integers(0, 2500, size=n_rows)
    replies = rng.integers(0, 8, size=n_rows)
    retweets = rng.integers(0, 300, size=n_rows)
    text_idx = rng.integers(0, len(texts), size=n_rows)
    with open(tweets_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=";", quoting=csv.QUOTE_MINIMAL)
        writer.writerow(["id", "user", "timestamp", "replies", "likes", "retweets", "text"])
        for i in range(n_rows):
            ts = base + timedelta(days=int(day_offsets[i]), seconds=int(seconds[i]))
            writer.writerow(
                [f"b{i:09d}", f"user{i % 4096:04d}", ts.strftime("%Y-%m-%dT%H:%M:%SZ"),
                 str(int(replies[i])), str(int(likes[i])), str(int(retweets[i])), texts[text_idx[i]]]
            )
    closes = 5000.0 + np.cumsum(rng.normal(0.0, 25.0, size=n_days + 2))
    closes = np.maximum(closes, 100.0)
    with open(prices_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "close"])
        for d in range(n_days + 2):
            writer.writerow([(start + timedelta(days=d - 1)).isoformat(), repr(float(closes[d]))])
    return {"n_rows": n_rows, "n_days": n_days, "seed": seed,
            "window": (start.isoformat(), (start + timedelta(days=n_days - 1)).isoformat())}
