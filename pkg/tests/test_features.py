"""Aggregation, price joins, design matrices, and splitting contracts."""

import itertools
import random
from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tweetcast.features import (
    CLASSIFICATION,
    FEATURE_COLUMNS,
    REGRESSION,
    AlreadyScaledError,
    ConstantTargetError,
    DailyAggregator,
    DesignMatrix,
    PriceCoverageGap,
    TooFewRows,
    UserAggregator,
    aggregate_daily,
    aggregate_users,
    apply_scaler,
    assemble_design_matrix,
    chronological_split,
    fit_scaler,
    join_prices_and_label,
    read_feature_store,
    write_feature_store,
)
from tweetcast.ingest import PriceBar, RawTweet
from tweetcast.nlp import NEGATIVE, NEUTRAL, POSITIVE

UTC = timezone.utc


def tweet(i, day, hour=12, likes=0, replies=0, retweets=0, user="u"):
    ts = datetime(day.year, day.month, day.day, hour, 0, 0, tzinfo=UTC)
    return RawTweet(str(i), user, ts, replies, likes, retweets, "x")


D1 = date(2017, 5, 1)  # a Monday
FRIDAY = date(2017, 5, 5)


class TestAggregateDaily:
    def test_likes_threshold_counting_is_strict(self):
        pairs = [
            (tweet(1, D1, likes=0), NEUTRAL),
            (tweet(2, D1, likes=11), NEUTRAL),
            (tweet(3, D1, likes=2000), NEUTRAL),
        ]
        row = aggregate_daily(pairs)[0]
        assert row.likes_gt == (2, 2, 1, 1)

    def test_hour_histogram(self):
        pairs = [(tweet(1, D1, hour=9), NEUTRAL), (tweet(2, D1, hour=17), NEUTRAL)]
        row = aggregate_daily(pairs)[0]
        assert row.hour_hist[9] == 1 and row.hour_hist[17] == 1
        assert sum(row.hour_hist) == row.tweet_volume == 2

    def test_friday_onehot_position(self):
        pairs = [(tweet(i, FRIDAY), NEUTRAL) for i in range(5)]
        row = aggregate_daily(pairs)[0]
        assert row.dow_onehot == (0, 0, 0, 0, 1, 0, 0)
        assert sum(row.dow_onehot) == 1

    def test_count_identities(self):
        pairs = [
            (tweet(1, D1, hour=3), POSITIVE),
            (tweet(2, D1, hour=3), NEGATIVE),
            (tweet(3, D1, hour=20), NEUTRAL),
            (tweet(4, D1 + timedelta(days=1), hour=0), NEUTRAL),
        ]
        for row in aggregate_daily(pairs):
            assert sum(row.sent_counts) == row.tweet_volume
            assert sum(row.hour_hist) == row.tweet_volume

    @settings(max_examples=40, deadline=None)
    @given(perm_seed=st.integers(0, 2**32 - 1))
    def test_order_independence(self, perm_seed):
        base = [
            (tweet(i, D1 + timedelta(days=i % 5), hour=i % 24, likes=i * 7 % 300), NEUTRAL)
            for i in range(40)
        ]
        shuffled = base[:]
        random.Random(perm_seed).shuffle(shuffled)
        assert aggregate_daily(base) == aggregate_daily(shuffled)

    def test_sharded_merge_equals_single_pass(self):
        pairs = [
            (tweet(i, D1 + timedelta(days=i % 7), hour=i % 24, likes=i), NEUTRAL)
            for i in range(60)
        ]
        single = aggregate_daily(pairs)
        merged = DailyAggregator()
        for chunk in (pairs[:20], pairs[20:45], pairs[45:]):
            part = DailyAggregator()
            for tw, _ in chunk:
                part.add(tw, 2)
            merged.merge(part)
        assert merged.rows() == single

    def test_subtract_reverses_add(self):
        agg = DailyAggregator()
        extra = tweet(99, D1, hour=5, likes=2000, retweets=150)
        for tw, idx in [(tweet(1, D1, hour=2, likes=3), 0), (extra, 2)]:
            agg.add(tw, idx)
        agg.subtract(extra, 2)
        lone = DailyAggregator()
        lone.add(tweet(1, D1, hour=2, likes=3), 0)
        assert agg.rows() == lone.rows()


class TestAggregateUsers:
    def test_sums_per_user(self):
        rows = aggregate_users([
            tweet(1, D1, likes=1, user="a"),
            tweet(2, D1, likes=2, user="a"),
        ])
        assert rows == [type(rows[0])("a", 2, 3, 0, 0)]

    def test_single_tweet_user(self):
        row = aggregate_users([tweet(1, D1, likes=7, replies=2, retweets=4, user="z")])[0]
        assert (row.tweet_count, row.likes_sum, row.replies_sum, row.retweets_sum) == (1, 7, 2, 4)

    def test_partition_property(self):
        tweets = [tweet(i, D1, user=f"u{i % 3}") for i in range(10)]
        rows = aggregate_users(tweets)
        assert len(rows) == 3
        assert sum(r.tweet_count for r in rows) == 10


def bars_for(days, closes):
    return [PriceBar(d, c) for d, c in zip(days, closes)]


class TestJoinPricesAndLabel:
    def setup_method(self):
        self.days = [D1 + timedelta(days=i) for i in range(-1, 5)]

    def test_definition(self):
        rows = aggregate_daily([(tweet(1, D1 + timedelta(days=1)), NEUTRAL)])
        bars = bars_for(self.days, [90.0, 100.0, 110.0, 105.0, 104.0, 103.0])
        out = join_prices_and_label(rows, bars)
        row = out[0]
        assert (row.prev_close, row.close, row.next_close) == (100.0, 110.0, 105.0)
        assert row.direction == 0

    def test_flat_day_is_zero(self):
        rows = aggregate_daily([(tweet(1, D1), NEUTRAL)])
        bars = bars_for(self.days[:3], [90.0, 100.0, 100.0])
        assert join_prices_and_label(rows, bars)[0].direction == 0

    def test_up_day_is_one(self):
        rows = aggregate_daily([(tweet(1, D1), NEUTRAL)])
        bars = bars_for(self.days[:3], [90.0, 100.0, 100.01])
        assert join_prices_and_label(rows, bars)[0].direction == 1

    def test_final_day_lacks_next(self):
        rows = aggregate_daily([(tweet(1, D1), NEUTRAL)])
        bars = bars_for(self.days[:2], [90.0, 100.0])
        out = join_prices_and_label(rows, bars)
        assert out[0].next_close is None and out[0].direction is None

    def test_zero_tweet_gap_days_filled(self):
        rows = aggregate_daily([
            (tweet(1, D1), NEUTRAL),
            (tweet(2, D1 + timedelta(days=2)), NEUTRAL),
        ])
        bars = bars_for(self.days, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        out = join_prices_and_label(rows, bars)
        assert [r.date for r in out] == [D1, D1 + timedelta(days=1), D1 + timedelta(days=2)]
        assert out[1].tweet_volume == 0

    def test_coverage_gap_raises(self):
        rows = aggregate_daily([(tweet(1, D1), NEUTRAL)])
        bars = bars_for([D1, D1 + timedelta(days=1)], [1.0, 2.0])  # no D1-1 bar
        with pytest.raises(PriceCoverageGap):
            join_prices_and_label(rows, bars)


def make_labeled_rows(n=30, seed=0):
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n * 3):
        day = D1 + timedelta(days=i % n)
        pairs.append(
            (tweet(i, day, hour=int(rng.integers(24)), likes=int(rng.integers(2000))),
             [POSITIVE, NEGATIVE, NEUTRAL][int(rng.integers(3))])
        )
    rows = aggregate_daily(pairs)
    days = [D1 + timedelta(days=i) for i in range(-1, n + 1)]
    closes = 100.0 + np.cumsum(rng.normal(0, 5, size=len(days)))
    return join_prices_and_label(rows, bars_for(days, np.abs(closes) + 10.0))


class TestDesignMatrix:
    def test_frozen_column_count(self):
        assert len(FEATURE_COLUMNS) == 46
        assert FEATURE_COLUMNS[-2:] == ("prev_close", "close")

    def test_fit_and_apply(self):
        rows = make_labeled_rows()
        matrix, scaler = assemble_design_matrix(rows, REGRESSION)
        assert matrix.scaled
        scaled_cols = matrix.X[:, scaler.scaled_mask]
        assert np.abs(scaled_cols.mean(axis=0)).max() < 1e-9
        assert np.abs(scaled_cols.std(axis=0) - 1.0).max() < 1e-9

    def test_constant_column_passthrough(self):
        rows = make_labeled_rows()
        X = np.array([r.feature_vector() for r in rows if r.next_close is not None])
        col = FEATURE_COLUMNS.index("likes_gt_1000")
        X[:, col] = 0.0
        scaler = fit_scaler(X, FEATURE_COLUMNS)
        assert scaler.constant_mask[col]
        assert not scaler.scaled_mask[col]
        assert np.all(scaler.transform(X)[:, col] == 0.0)

    def test_dow_columns_exempt(self):
        rows = make_labeled_rows()
        _, scaler = assemble_design_matrix(rows, REGRESSION)
        for name in FEATURE_COLUMNS:
            if name.startswith("dow_"):
                assert not scaler.scaled_mask[FEATURE_COLUMNS.index(name)]

    def test_no_refit_on_test(self):
        rows = make_labeled_rows()
        raw, _ = assemble_design_matrix(rows, REGRESSION, scale=False)
        train_raw, test_raw = chronological_split(raw, 0.2)
        scaler = fit_scaler(train_raw.X, FEATURE_COLUMNS)
        test = apply_scaler(test_raw, scaler)
        means = np.abs(test.X[:, scaler.scaled_mask].mean(axis=0))
        assert means.max() > 1e-6  # test means generally differ from zero

    def test_double_scaling_rejected(self):
        rows = make_labeled_rows()
        matrix, scaler = assemble_design_matrix(rows, REGRESSION)
        with pytest.raises(AlreadyScaledError):
            apply_scaler(matrix, scaler)

    def test_constant_target_error(self):
        rows = make_labeled_rows()
        flat = [r for r in rows if r.next_close is not None]
        for r in flat:
            r.direction = 1
        with pytest.raises(ConstantTargetError):
            assemble_design_matrix(flat, CLASSIFICATION)

    def test_classification_targets(self):
        rows = make_labeled_rows()
        matrix, _ = assemble_design_matrix(rows, CLASSIFICATION)
        assert set(np.unique(matrix.y)) == {0.0, 1.0}


class TestChronologicalSplit:
    def _matrix(self, n):
        dates = tuple(D1 + timedelta(days=i) for i in range(n))
        X = np.arange(n * 2, dtype=float).reshape(n, 2)
        return DesignMatrix(("a", "b"), X, np.arange(n, dtype=float), dates, REGRESSION, True)

    def test_round_sizes(self):
        train, test = chronological_split(self._matrix(1100), 0.1)
        assert (train.n, test.n) == (990, 110)
        train, test = chronological_split(self._matrix(20), 0.1)
        assert (train.n, test.n) == (18, 2)

    def test_strict_date_ordering_and_partition(self):
        matrix = self._matrix(50)
        train, test = chronological_split(matrix, 0.1)
        assert max(train.dates) < min(test.dates)
        assert sorted(train.dates + test.dates) == sorted(matrix.dates)
        assert len(set(train.dates) & set(test.dates)) == 0

    def test_shuffled_input_same_split(self):
        matrix = self._matrix(40)
        perm = np.random.default_rng(3).permutation(40)
        shuffled = DesignMatrix(
            matrix.columns, matrix.X[perm], matrix.y[perm],
            tuple(matrix.dates[i] for i in perm), REGRESSION, True,
        )
        a_train, a_test = chronological_split(matrix, 0.1)
        b_train, b_test = chronological_split(shuffled, 0.1)
        assert a_test.dates == b_test.dates
        assert np.array_equal(np.sort(a_train.y), np.sort(b_train.y))

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            chronological_split(self._matrix(19), 0.1)


class TestFeatureStore:
    def test_roundtrip(self, tmp_path):
        rows = make_labeled_rows()
        path = tmp_path / "features.csv"
        write_feature_store(rows, path, "abc123")
        loaded, stored_hash = read_feature_store(path)
        assert stored_hash == "abc123"
        assert loaded == sorted(rows, key=lambda r: r.date)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "features.csv"
        path.write_text("date,nope\n")
        with pytest.raises(Exception):
            read_feature_store(path)
