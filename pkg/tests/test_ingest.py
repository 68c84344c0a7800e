"""Corpus and price-series ingestion contracts."""

import csv
from datetime import date, datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tweetcast.ingest import (
    CorpusStats,
    DuplicateDate,
    HeaderMismatch,
    MissingColumn,
    NonPositivePrice,
    PriceBar,
    RawTweet,
    TweetSchema,
    UnparsableNumber,
    UnparsableTimestamp,
    load_price_series,
    parse_tweet_row,
    plan_shards,
    read_shard,
    serialize_tweet_row,
    stream_corpus,
)

UTC = timezone.utc
WINDOW = (date(2016, 1, 1), date(2019, 3, 29))
HEADER = "id;user;timestamp;replies;likes;retweets;text\n"


def write_corpus(path, rows, header=HEADER):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header)
        for row in rows:
            fh.write(row + "\n")


class TestParseTweetRow:
    def test_direct_field_mapping(self):
        tweet = parse_tweet_row('1;a;2017-12-01T10:00:00Z;0;3;1;"btc up"')
        assert tweet.id == "1"
        assert tweet.username == "a"
        assert tweet.likes == 3
        assert tweet.replies == 0
        assert tweet.retweets == 1
        assert tweet.timestamp == datetime(2017, 12, 1, 10, 0, 0, tzinfo=UTC)
        assert tweet.timestamp.hour == 10
        assert tweet.text == "btc up"

    def test_empty_numeric_rejected(self):
        with pytest.raises(UnparsableNumber) as info:
            parse_tweet_row("1;a;2017-12-01T10:00:00Z;0;;1;x")
        assert info.value.column == "likes"

    def test_invalid_calendar_date_rejected(self):
        with pytest.raises(UnparsableTimestamp):
            parse_tweet_row("1;a;2017-13-40;0;3;1;x")

    def test_negative_count_rejected(self):
        with pytest.raises(UnparsableNumber) as info:
            parse_tweet_row("1;a;2017-12-01T10:00:00Z;-2;3;1;x")
        assert info.value.column == "replies"

    def test_short_row_names_missing_column(self):
        with pytest.raises(MissingColumn):
            parse_tweet_row("1;a;2017-12-01T10:00:00Z;0;3")

    def test_embedded_quoted_delimiter_preserved(self):
        tweet = parse_tweet_row('9;bob;2018-01-01T00:00:00Z;1;2;3;"price; up; a lot"')
        assert tweet.text == "price; up; a lot"

    def test_epoch_timestamps(self):
        schema = TweetSchema(timestamp_format="epoch")
        tweet = parse_tweet_row("1;a;1512122400;0;3;1;x", schema)
        assert tweet.timestamp == datetime(2017, 12, 1, 10, 0, 0, tzinfo=UTC)

    def test_roundtrip_all_fields_exact(self):
        original = RawTweet(
            "42", "alice", datetime(2018, 7, 3, 23, 59, 58, tzinfo=UTC), 5, 1001, 17,
            'mixed; text with "quotes" and, commas',
        )
        line = serialize_tweet_row(original)
        assert parse_tweet_row(line) == original


class TestStreamCorpus:
    def test_window_filtering(self, tmp_path):
        path = tmp_path / "c.csv"
        write_corpus(path, [
            "1;a;2015-06-01T10:00:00Z;0;1;0;old",
            "2;a;2016-01-01T00:00:00Z;0;1;0;first day in",
            "3;b;2017-06-01T10:00:00Z;0;1;0;mid",
            "4;b;2019-03-29T23:59:59Z;0;1;0;last second in",
            "5;c;2019-03-30T00:00:00Z;0;1;0;out",
        ])
        reader = stream_corpus(path, window=WINDOW)
        ids = [t.id for t in reader]
        assert ids == ["2", "3", "4"]
        assert reader.stats.rows_out_of_window == 2
        assert reader.stats.rows_kept == 3

    def test_duplicate_keeps_first(self, tmp_path):
        path = tmp_path / "c.csv"
        write_corpus(path, [
            "1;a;2017-01-01T10:00:00Z;0;1;0;first",
            "1;b;2017-01-02T10:00:00Z;0;9;0;second",
        ])
        reader = stream_corpus(path, window=WINDOW)
        tweets = list(reader)
        assert len(tweets) == 1
        assert tweets[0].text == "first"
        assert reader.stats.rows_duplicate == 1

    def test_empty_file_with_header(self, tmp_path):
        path = tmp_path / "c.csv"
        write_corpus(path, [])
        reader = stream_corpus(path, window=WINDOW)
        assert list(reader) == []
        assert reader.stats.rows_read == 0

    def test_malformed_rows_counted_and_skipped(self, tmp_path):
        path = tmp_path / "c.csv"
        write_corpus(path, [
            "1;a;2017-01-01T10:00:00Z;0;1;0;ok",
            "2;a;not-a-date;0;1;0;bad ts",
            "3;a;2017-01-01T10:00:00Z;x;1;0;bad num",
            ";a;2017-01-01T10:00:00Z;0;1;0;empty id",
        ])
        reader = stream_corpus(path, window=WINDOW)
        assert [t.id for t in reader] == ["1"]
        assert reader.stats.rows_malformed == 3
        assert reader.stats.identity_holds()

    def test_two_passes_identical(self, tmp_path):
        path = tmp_path / "c.csv"
        write_corpus(path, [
            f"{i};u{i % 3};2017-01-0{1 + i % 5}T0{i % 9}:00:00Z;{i % 2};{i};{i % 7};text {i}"
            for i in range(40)
        ])
        reader = stream_corpus(path, window=WINDOW)
        first = list(reader)
        stats_first = reader.stats
        second = list(reader)
        assert first == second
        assert reader.stats == stats_first

    def test_missing_header_column(self, tmp_path):
        path = tmp_path / "c.csv"
        write_corpus(path, ["1;a;x"], header="id;user;oops\n")
        with pytest.raises(HeaderMismatch):
            list(stream_corpus(path))

    @settings(max_examples=25, deadline=None)
    @given(rows=st.lists(st.tuples(st.integers(0, 30), st.integers(0, 3), st.booleans()), max_size=60))
    def test_stats_identity_property(self, tmp_path_factory, rows):
        path = tmp_path_factory.mktemp("prop") / "c.csv"
        lines = []
        for i, (uid, kind, out_window) in enumerate(rows):
            ts = "2015-01-01T00:00:00Z" if out_window else "2017-05-01T12:00:00Z"
            if kind == 0:
                lines.append(f"{uid};u;{ts};0;1;0;ok")
            elif kind == 1:
                lines.append(f"{uid};u;garbage;0;1;0;bad ts")
            elif kind == 2:
                lines.append(f"{uid};u;{ts};zz;1;0;bad num")
            else:
                lines.append(f"{uid};u;{ts};0;1;0;fine")
        write_corpus(path, lines)
        reader = stream_corpus(path, window=WINDOW)
        kept = list(reader)
        stats = reader.stats
        assert stats.rows_read == len(rows)
        assert stats.rows_kept == len(kept)
        assert stats.identity_holds()


class TestShards:
    def _write_big(self, path, n=500, quoted_newlines=False):
        rows = []
        for i in range(n):
            text = f"text {i}"
            if quoted_newlines and i % 7 == 0:
                text = f'"line one {i}\nline two; {i}"'
            rows.append(f"{i};u{i % 9};2017-03-{1 + i % 28:02d}T05:00:00Z;0;{i % 50};{i % 9};{text}")
        write_corpus(path, rows)

    def test_shards_cover_and_match_single_pass(self, tmp_path):
        path = tmp_path / "c.csv"
        self._write_big(path)
        single = [t.id for t in stream_corpus(path, window=WINDOW)]
        for n_shards in (1, 2, 3, 7):
            spans = plan_shards(path, n_shards)
            assert spans[0][0] > 0  # header excluded
            for (a, b), (c, d) in zip(spans, spans[1:]):
                assert b == c
            sharded = []
            for span in spans:
                sharded.extend(t.id for t in read_shard(path, span, window=WINDOW))
            assert sharded == single

    def test_shard_boundaries_respect_quoted_newlines(self, tmp_path):
        path = tmp_path / "c.csv"
        self._write_big(path, quoted_newlines=True)
        single = [t.text for t in stream_corpus(path, window=WINDOW)]
        spans = plan_shards(path, 5)
        sharded = []
        for span in spans:
            sharded.extend(t.text for t in read_shard(path, span, window=WINDOW))
        assert sharded == single

    def test_partial_stats_merge_associatively(self, tmp_path):
        path = tmp_path / "c.csv"
        self._write_big(path)
        whole = stream_corpus(path, window=WINDOW)
        list(whole)
        merged = CorpusStats()
        for span in plan_shards(path, 4):
            reader = read_shard(path, span, window=WINDOW)
            list(reader)
            merged = merged.merge(reader.stats)
        assert merged == whole.stats


class TestPriceSeries:
    def _write(self, path, rows):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["date", "close"])
            writer.writerows(rows)

    def test_forward_fill_inserts_prior_close(self, tmp_path):
        path = tmp_path / "p.csv"
        self._write(path, [["2017-01-01", "100"], ["2017-01-03", "110"]])
        bars = load_price_series(path, "forward_fill")
        assert bars == [
            PriceBar(date(2017, 1, 1), 100.0),
            PriceBar(date(2017, 1, 2), 100.0),
            PriceBar(date(2017, 1, 3), 110.0),
        ]

    def test_drop_leaves_gap(self, tmp_path):
        path = tmp_path / "p.csv"
        self._write(path, [["2017-01-01", "100"], ["2017-01-03", "110"]])
        bars = load_price_series(path, "drop")
        assert [b.date for b in bars] == [date(2017, 1, 1), date(2017, 1, 3)]

    def test_non_positive_price(self, tmp_path):
        path = tmp_path / "p.csv"
        self._write(path, [["2017-01-01", "0"], ["2017-01-02", "1"]])
        with pytest.raises(NonPositivePrice):
            load_price_series(path)

    def test_duplicate_date(self, tmp_path):
        path = tmp_path / "p.csv"
        self._write(path, [["2017-01-01", "5"], ["2017-01-01", "6"]])
        with pytest.raises(DuplicateDate):
            load_price_series(path)

    def test_unsorted_input_sorted_output(self, tmp_path):
        path = tmp_path / "p.csv"
        self._write(path, [["2017-01-03", "3"], ["2017-01-01", "1"], ["2017-01-02", "2"]])
        bars = load_price_series(path, "drop")
        assert [b.close for b in bars] == [1.0, 2.0, 3.0]
