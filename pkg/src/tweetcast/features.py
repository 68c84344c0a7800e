"""Day-level and user-level aggregation, price joins, design matrices.

Tweets (already language-filtered and sentiment-labeled) collapse into one
row per UTC calendar day; rows join against the daily price series to pick
up previous/current/next closes and the up-down direction label; labeled
rows assemble into standardized numeric matrices with a frozen column
order and chronological train/test splitting.

Aggregation state is associative: shards may be aggregated independently
and merged, and individual contributions can be subtracted again, which
the sharded ingest path uses to repair cross-shard duplicates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import date, timedelta
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, NotStandardizedError  # noqa: F401  (re-exported)
from .ingest import PriceBar, RawTweet
from .nlp import NEGATIVE, NEUTRAL, POSITIVE

LIKES_THRESHOLDS = (0, 10, 100, 1000)
RETWEETS_THRESHOLDS = (0, 100)

DOW_NAMES = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")

#: Frozen model-input column order, persisted with every matrix and model.
FEATURE_COLUMNS = (
    "tweet_volume",
    "likes_sum",
    "replies_sum",
    "retweets_sum",
    *(f"likes_gt_{t}" for t in LIKES_THRESHOLDS),
    *(f"retweets_gt_{t}" for t in RETWEETS_THRESHOLDS),
    "sent_positive",
    "sent_negative",
    "sent_neutral",
    *(f"hour_{h:02d}" for h in range(24)),
    *(f"dow_{d}" for d in DOW_NAMES),
    "prev_close",
    "close",
)

#: Day-of-week indicator columns are passed through unscaled.
SCALING_EXEMPT_COLUMNS = frozenset(f"dow_{d}" for d in DOW_NAMES)

SENTIMENT_INDEX = {POSITIVE: 0, NEGATIVE: 1, NEUTRAL: 2}

REGRESSION = "regression"
CLASSIFICATION = "classification"

# accumulator slot layout (ints)
_VOL, _LIKES, _REPLIES, _RTS = 0, 1, 2, 3
_LGT, _RGT, _SENT, _HOURS = 4, 8, 10, 13
_SLOTS = 37


class PriceCoverageGap(DataError):
    pass


class ConstantTargetError(DataError):
    pass


class TooFewRows(DataError):
    pass


class AlreadyScaledError(DataError):
    pass


@dataclass
class DailyFeatureRow:
    """All day-level aggregates for one UTC day, plus price joins and labels."""

    date: date
    tweet_volume: int
    likes_sum: int
    replies_sum: int
    retweets_sum: int
    likes_gt: tuple
    retweets_gt: tuple
    sent_counts: tuple  # (positive, negative, neutral)
    hour_hist: tuple
    prev_close: float | None = None
    close: float | None = None
    next_close: float | None = None
    direction: int | None = None

    @property
    def dow_onehot(self) -> tuple:
        onehot = [0] * 7
        onehot[self.date.weekday()] = 1
        return tuple(onehot)

    def feature_vector(self) -> list:
        if self.prev_close is None or self.close is None:
            raise DataError(f"{self.date}: prices not joined yet")
        return [
            float(self.tweet_volume),
            float(self.likes_sum),
            float(self.replies_sum),
            float(self.retweets_sum),
            *map(float, self.likes_gt),
            *map(float, self.retweets_gt),
            *map(float, self.sent_counts),
            *map(float, self.hour_hist),
            *map(float, self.dow_onehot),
            self.prev_close,
            self.close,
        ]


@dataclass(frozen=True)
class UserAggregate:
    username: str
    tweet_count: int
    likes_sum: int
    replies_sum: int
    retweets_sum: int


USER_FEATURE_COLUMNS = ("tweet_count", "likes_sum", "replies_sum", "retweets_sum")


class DailyAggregator:
    """Associative per-day counting state keyed by date ordinal."""

    def __init__(self):
        self.days: dict = {}

    def add(self, tweet: RawTweet, sent_index: int, sign: int = 1) -> None:
        ts = tweet.timestamp
        acc = self.days.get(ts.toordinal())
        if acc is None:
            acc = self.days[ts.toordinal()] = [0] * _SLOTS
        likes = tweet.likes
        rts = tweet.retweets
        acc[_VOL] += sign
        acc[_LIKES] += sign * likes
        acc[_REPLIES] += sign * tweet.replies
        acc[_RTS] += sign * rts
        if likes > 0:
            acc[_LGT] += sign
            if likes > 10:
                acc[_LGT + 1] += sign
                if likes > 100:
                    acc[_LGT + 2] += sign
                    if likes > 1000:
                        acc[_LGT + 3] += sign
        if rts > 0:
            acc[_RGT] += sign
            if rts > 100:
                acc[_RGT + 1] += sign
        acc[_SENT + sent_index] += sign
        acc[_HOURS + ts.hour] += sign

    def subtract(self, tweet: RawTweet, sent_index: int) -> None:
        self.add(tweet, sent_index, sign=-1)

    def merge(self, other: "DailyAggregator") -> None:
        for key, theirs in other.days.items():
            mine = self.days.get(key)
            if mine is None:
                self.days[key] = list(theirs)
            else:
                for i in range(_SLOTS):
                    mine[i] += theirs[i]

    def rows(self) -> list[DailyFeatureRow]:
        out = []
        for ordinal in sorted(self.days):
            acc = self.days[ordinal]
            if acc[_VOL] == 0:
                continue
            out.append(
                DailyFeatureRow(
                    date=date.fromordinal(ordinal),
                    tweet_volume=acc[_VOL],
                    likes_sum=acc[_LIKES],
                    replies_sum=acc[_REPLIES],
                    retweets_sum=acc[_RTS],
                    likes_gt=tuple(acc[_LGT : _LGT + 4]),
                    retweets_gt=tuple(acc[_RGT : _RGT + 2]),
                    sent_counts=tuple(acc[_SENT : _SENT + 3]),
                    hour_hist=tuple(acc[_HOURS : _HOURS + 24]),
                )
            )
        return out


class UserAggregator:
    """Associative per-user totals."""

    def __init__(self):
        self.users: dict = {}

    def add(self, tweet: RawTweet, sign: int = 1) -> None:
        acc = self.users.get(tweet.username)
        if acc is None:
            acc = self.users[tweet.username] = [0, 0, 0, 0]
        acc[0] += sign
        acc[1] += sign * tweet.likes
        acc[2] += sign * tweet.replies
        acc[3] += sign * tweet.retweets

    def subtract(self, tweet: RawTweet) -> None:
        self.add(tweet, sign=-1)

    def merge(self, other: "UserAggregator") -> None:
        for name, theirs in other.users.items():
            mine = self.users.get(name)
            if mine is None:
                self.users[name] = list(theirs)
            else:
                for i in range(4):
                    mine[i] += theirs[i]

    def rows(self) -> list[UserAggregate]:
        return [
            UserAggregate(name, *self.users[name])
            for name in sorted(self.users)
            if self.users[name][0] > 0
        ]


def aggregate_daily(labeled_tweets: Iterable[tuple[RawTweet, str]]) -> list[DailyFeatureRow]:
    """One unpriced row per UTC day present in the stream, sorted by date."""
    agg = DailyAggregator()
    index = SENTIMENT_INDEX
    for tweet, label in labeled_tweets:
        agg.add(tweet, index[label])
    return agg.rows()


def aggregate_users(tweets: Iterable[RawTweet]) -> list[UserAggregate]:
    """Per-user engagement totals, sorted by username."""
    agg = UserAggregator()
    for tweet in tweets:
        agg.add(tweet)
    return agg.rows()


def _zero_row(day: date) -> DailyFeatureRow:
    return DailyFeatureRow(day, 0, 0, 0, 0, (0,) * 4, (0,) * 2, (0,) * 3, (0,) * 24)


def join_prices_and_label(
    rows: Sequence[DailyFeatureRow], bars: Sequence[PriceBar]
) -> list[DailyFeatureRow]:
    """Attach prev/current/next closes and the direction label.

    Days inside the row span with no tweets get all-zero count rows so
    price continuity is preserved. The price series must cover the span
    start minus one day; interior dates missing under the drop fill policy
    skip the affected day, and a missing day after the span end leaves the
    final row without ``next_close`` (it is excluded from supervised
    matrices). ``direction`` is 1 only when the next close strictly
    exceeds the current close; a flat day counts as 0.
    """
    if not rows:
        return []
    if not bars:
        raise PriceCoverageGap("empty price series")
    closes = {bar.date: bar.close for bar in bars}
    first_bar = bars[0].date
    last_bar = bars[-1].date
    by_date = {row.date: row for row in rows}
    span_start = min(by_date)
    span_end = max(by_date)
    if span_start - timedelta(days=1) < first_bar or span_end > last_bar:
        raise PriceCoverageGap(
            f"price series [{first_bar}..{last_bar}] does not cover "
            f"[{span_start - timedelta(days=1)}..{span_end}]"
        )
    out = []
    day = span_start
    while day <= span_end:
        row = by_date.get(day)
        if row is None:
            row = _zero_row(day)
        close = closes.get(day)
        prev_close = closes.get(day - timedelta(days=1))
        next_close = closes.get(day + timedelta(days=1))
        day += timedelta(days=1)
        if close is None or prev_close is None:
            continue  # dropped-gap day
        direction = None
        if next_close is not None:
            direction = 1 if next_close > close else 0
        out.append(
            replace(row, prev_close=prev_close, close=close, next_close=next_close, direction=direction)
        )
    return out


@dataclass(frozen=True)
class ScalerParams:
    """Train-fitted per-column standardization parameters.

    ``scaled_mask`` is False for day-of-week indicators and for constant
    columns, which pass through unchanged (``constant_mask`` flags the
    latter).
    """

    columns: tuple
    mean: np.ndarray
    std: np.ndarray
    scaled_mask: np.ndarray
    constant_mask: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        out = np.array(X, dtype=float, copy=True)
        m = self.scaled_mask
        out[:, m] = (out[:, m] - self.mean[m]) / self.std[m]
        return out


def fit_scaler(X: np.ndarray, columns: Sequence[str] = FEATURE_COLUMNS) -> ScalerParams:
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)  # population std, matching the usual scaler
    constant = std == 0.0
    exempt = np.array([c in SCALING_EXEMPT_COLUMNS for c in columns])
    scaled_mask = ~(constant | exempt)
    safe_std = np.where(std == 0.0, 1.0, std)
    return ScalerParams(tuple(columns), mean, safe_std, scaled_mask, constant)


@dataclass
class DesignMatrix:
    """Ordered numeric features, target, and date index for one task."""

    columns: tuple
    X: np.ndarray
    y: np.ndarray
    dates: tuple
    task: str
    scaled: bool = False

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def apply_scaler(matrix: DesignMatrix, scaler: ScalerParams) -> DesignMatrix:
    """Standardize a matrix in feature space; refuses to scale twice."""
    if matrix.scaled:
        raise AlreadyScaledError("matrix is already standardized")
    if tuple(scaler.columns) != tuple(matrix.columns):
        raise DataError("scaler column list does not match matrix columns")
    return DesignMatrix(
        matrix.columns, scaler.transform(matrix.X), matrix.y, matrix.dates, matrix.task, scaled=True
    )


def assemble_design_matrix(
    rows: Sequence[DailyFeatureRow],
    task: str,
    scaler: ScalerParams | None = None,
    scale: bool = True,
):
    """Build the design matrix for a task from labeled rows.

    Rows without a next-day close are excluded (no look-ahead target for
    them). When ``scaler`` is omitted one is fitted on these rows and
    returned alongside the matrix; when given it is applied as-is with no
    refit. ``scale=False`` returns the raw matrix (scaler None) so callers
    can split chronologically first and fit the scaler on the train part
    only. Returns ``(matrix, scaler)``.
    """
    if task not in (REGRESSION, CLASSIFICATION):
        raise ValueError(f"unknown task {task!r}")
    usable = sorted(
        (r for r in rows if r.next_close is not None and r.close is not None),
        key=lambda r: r.date,
    )
    if not usable:
        raise TooFewRows("no labeled rows with a next-day close")
    for a, b in zip(usable, usable[1:]):
        if a.date == b.date:
            raise DataError(f"duplicate feature row for {a.date}")
    X = np.array([r.feature_vector() for r in usable], dtype=float)
    if task == REGRESSION:
        y = np.array([r.next_close for r in usable], dtype=float)
    else:
        y = np.array([r.direction for r in usable], dtype=float)
        if len(np.unique(y)) < 2:
            raise ConstantTargetError("classification target has a single class")
    dates = tuple(r.date for r in usable)
    matrix = DesignMatrix(tuple(FEATURE_COLUMNS), X, y, dates, task, scaled=False)
    if not scale:
        return matrix, None
    if scaler is None:
        scaler = fit_scaler(X, FEATURE_COLUMNS)
    return apply_scaler(matrix, scaler), scaler


def chronological_split(matrix: DesignMatrix, test_fraction: float = 0.1):
    """Split so the test set is the final stretch of days.

    Test size is ``round(test_fraction * n)`` (at least 1); every test date
    is strictly later than every train date.
    """
    if not (0.0 < test_fraction < 0.5):
        raise ValueError("test_fraction must be in (0, 0.5)")
    n = matrix.n
    if n < 20:
        raise TooFewRows(f"need at least 20 rows to split, got {n}")
    order = np.argsort(np.array([d.toordinal() for d in matrix.dates]))
    n_test = max(1, round(test_fraction * n))
    train_idx, test_idx = order[: n - n_test], order[n - n_test :]

    def take(idx):
        return DesignMatrix(
            matrix.columns,
            matrix.X[idx],
            matrix.y[idx],
            tuple(matrix.dates[i] for i in idx),
            matrix.task,
            matrix.scaled,
        )

    return take(train_idx), take(test_idx)


# --- feature store ---------------------------------------------------------

STORE_COLUMNS = ("date", *FEATURE_COLUMNS, "next_close", "direction")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_feature_store(rows: Sequence[DailyFeatureRow], path, config_hash: str = "") -> None:
    """Persist labeled rows as delimited text with the frozen column list."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash: {config_hash}\n")
        fh.write(",".join(STORE_COLUMNS) + "\n")
        for row in sorted(rows, key=lambda r: r.date):
            vec = [
                row.tweet_volume, row.likes_sum, row.replies_sum, row.retweets_sum,
                *row.likes_gt, *row.retweets_gt, *row.sent_counts, *row.hour_hist,
                *row.dow_onehot,
            ]
            cells = [row.date.isoformat()]
            cells.extend(str(v) for v in vec)
            cells.append(_fmt(row.prev_close))
            cells.append(_fmt(row.close))
            cells.append(_fmt(row.next_close))
            cells.append(_fmt(row.direction))
            fh.write(",".join(cells) + "\n")


def read_feature_store(path):
    """Load rows written by :func:`write_feature_store`.

    Returns ``(rows, config_hash)``; the hash is empty when absent.
    """
    rows: list[DailyFeatureRow] = []
    config_hash = ""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header.startswith("# config_hash:"):
            config_hash = header.split(":", 1)[1].strip()
            header = fh.readline().rstrip("\n")
        if tuple(header.split(",")) != STORE_COLUMNS:
            raise DataError(f"{path}: unexpected feature store header")
        for line in fh:
            cells = line.rstrip("\n").split(",")
            if len(cells) != len(STORE_COLUMNS):
                raise DataError(f"{path}: short feature store row")
            day = date.fromisoformat(cells[0])
            ints = [int(c) for c in cells[1 : 1 + 13]]
            hours = tuple(int(c) for c in cells[14:38])
            # dow columns are derived from the date; validate instead of storing
            dow = tuple(int(c) for c in cells[38:45])
            prev_close = float(cells[45]) if cells[45] else None
            close = float(cells[46]) if cells[46] else None
            next_close = float(cells[47]) if cells[47] else None
            direction = int(cells[48]) if cells[48] else None
            row = DailyFeatureRow(
                day, ints[0], ints[1], ints[2], ints[3],
                tuple(ints[4:8]), tuple(ints[8:10]), tuple(ints[10:13]), hours,
                prev_close, close, next_close, direction,
            )
            if row.dow_onehot != dow:
                raise DataError(f"{path}: day-of-week columns inconsistent on {day}")
            rows.append(row)
    return rows, config_hash
