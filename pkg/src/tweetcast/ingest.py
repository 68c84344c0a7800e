"""Streaming corpus and price-series ingestion.

The tweet corpus is a delimited text file (RFC-4180 quoting, configurable
delimiter, default ``;``) with a header row. Rows are parsed into
:class:`RawTweet` records lazily; malformed rows, duplicate ids, and rows
outside the configured date window are counted and skipped, never raised
out of the stream. All timestamps are normalized to UTC and day boundaries
are UTC midnights.

For large corpora the file can be split into byte-range shards aligned to
record boundaries (:func:`plan_shards`); each shard is streamed
independently and partial statistics merge associatively.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import Iterable, Iterator, NamedTuple, Sequence

from .errors import DataError

UTC = timezone.utc

#: Corpus window used when none is configured (densest span of the dataset).
DEFAULT_WINDOW = (date(2016, 1, 1), date(2019, 3, 29))

DEFAULT_DELIMITER = ";"

TWEET_FIELDS = ("id", "username", "timestamp", "replies", "likes", "retweets", "text")

DEFAULT_COLUMNS = {
    "id": "id",
    "username": "user",
    "timestamp": "timestamp",
    "replies": "replies",
    "likes": "likes",
    "retweets": "retweets",
    "text": "text",
}


class RawTweet(NamedTuple):
    """One corpus row: author, UTC timestamp, engagement counts, text."""

    id: str
    username: str
    timestamp: datetime
    replies: int
    likes: int
    retweets: int
    text: str


class PriceBar(NamedTuple):
    """One day's closing price (USD) for the target asset."""

    date: date
    close: float


class MissingColumn(DataError):
    def __init__(self, column: str):
        super().__init__(f"required column missing: {column!r}")
        self.column = column


class UnparsableNumber(DataError):
    def __init__(self, column: str, value: str):
        super().__init__(f"column {column!r}: cannot parse {value!r} as a non-negative integer")
        self.column = column
        self.value = value


class UnparsableTimestamp(DataError):
    def __init__(self, column: str, value: str):
        super().__init__(f"column {column!r}: cannot parse timestamp {value!r}")
        self.column = column
        self.value = value


class HeaderMismatch(DataError):
    pass


class NonPositivePrice(DataError):
    pass


class DuplicateDate(DataError):
    pass


@dataclass
class CorpusStats:
    """Row accounting for one corpus pass; merges associatively."""

    rows_read: int = 0
    rows_malformed: int = 0
    rows_duplicate: int = 0
    rows_out_of_window: int = 0
    rows_kept: int = 0

    def merge(self, other: "CorpusStats") -> "CorpusStats":
        return CorpusStats(
            self.rows_read + other.rows_read,
            self.rows_malformed + other.rows_malformed,
            self.rows_duplicate + other.rows_duplicate,
            self.rows_out_of_window + other.rows_out_of_window,
            self.rows_kept + other.rows_kept,
        )

    def identity_holds(self) -> bool:
        return self.rows_kept == (
            self.rows_read - self.rows_malformed - self.rows_duplicate - self.rows_out_of_window
        )

    def as_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_malformed": self.rows_malformed,
            "rows_duplicate": self.rows_duplicate,
            "rows_out_of_window": self.rows_out_of_window,
            "rows_kept": self.rows_kept,
        }


@dataclass(frozen=True)
class TweetSchema:
    """Field-to-column mapping plus parsing options for one corpus export."""

    columns: dict = field(default_factory=lambda: dict(DEFAULT_COLUMNS))
    delimiter: str = DEFAULT_DELIMITER
    timestamp_format: str = "iso8601"  # or "epoch"

    def resolve(self, header: Sequence[str]) -> tuple:
        """Map RawTweet fields to header indices; raises MissingColumn."""
        positions = {name: i for i, name in enumerate(header)}
        out = []
        for fieldname in TWEET_FIELDS:
            column = self.columns.get(fieldname, fieldname)
            if column not in positions:
                raise MissingColumn(column)
            out.append(positions[column])
        return tuple(out)


def _parse_timestamp(value: str, fmt: str) -> datetime:
    if fmt == "epoch":
        return datetime.fromtimestamp(int(value), tz=UTC)
    # ISO-8601; bare timestamps and trailing 'Z' both mean UTC.
    if value.endswith("Z"):
        value = value[:-1]
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        return dt.replace(tzinfo=UTC)
    return dt.astimezone(UTC)


def parse_tweet_row(record, schema: TweetSchema | None = None, indices: tuple | None = None) -> RawTweet:
    """Parse one delimited record (string or pre-split field list).

    When ``indices`` is omitted the fields are assumed to be in
    :data:`TWEET_FIELDS` order; pass the tuple from
    :meth:`TweetSchema.resolve` for records from a real file. Raises
    MissingColumn / UnparsableNumber / UnparsableTimestamp; the streaming
    caller counts these as malformed and skips.
    """
    schema = schema or TweetSchema()
    if isinstance(record, str):
        fields = next(csv.reader(io.StringIO(record), delimiter=schema.delimiter))
    else:
        fields = list(record)
    if indices is None:
        indices = tuple(range(len(TWEET_FIELDS)))
    n = len(fields)
    for fieldname, pos in zip(TWEET_FIELDS, indices):
        if pos >= n:
            raise MissingColumn(schema.columns.get(fieldname, fieldname))
    i_id, i_user, i_ts, i_replies, i_likes, i_rts, i_text = indices
    try:
        ts = _parse_timestamp(fields[i_ts], schema.timestamp_format)
    except (ValueError, OverflowError, OSError):
        raise UnparsableTimestamp(schema.columns.get("timestamp", "timestamp"), fields[i_ts]) from None
    counts = []
    for fieldname, pos in (("replies", i_replies), ("likes", i_likes), ("retweets", i_rts)):
        raw = fields[pos]
        try:
            v = int(raw)
        except ValueError:
            raise UnparsableNumber(schema.columns.get(fieldname, fieldname), raw) from None
        if v < 0:
            raise UnparsableNumber(schema.columns.get(fieldname, fieldname), raw)
        counts.append(v)
    tweet_id = fields[i_id]
    if not tweet_id:
        raise MissingColumn(schema.columns.get("id", "id"))
    return RawTweet(tweet_id, fields[i_user], ts, counts[0], counts[1], counts[2], fields[i_text])


def serialize_tweet_row(tweet: RawTweet, schema: TweetSchema | None = None) -> str:
    """Inverse of :func:`parse_tweet_row` for a record in field order."""
    schema = schema or TweetSchema()
    if schema.timestamp_format == "epoch":
        ts = str(int(tweet.timestamp.timestamp()))
    else:
        ts = tweet.timestamp.astimezone(UTC).strftime("%Y-%m-%dT%H:%M:%SZ")
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=schema.delimiter, quoting=csv.QUOTE_MINIMAL, lineterminator="")
    writer.writerow(
        [tweet.id, tweet.username, ts, str(tweet.replies), str(tweet.likes), str(tweet.retweets), tweet.text]
    )
    return buf.getvalue()


class _BoundedBinary(io.RawIOBase):
    """Read-only view of an open binary handle capped at ``remaining`` bytes."""

    def __init__(self, fh, remaining: int):
        self._fh = fh
        self._remaining = remaining

    def readable(self) -> bool:
        return True

    def readinto(self, b) -> int:
        if self._remaining <= 0:
            return 0
        n = min(len(b), self._remaining)
        data = self._fh.read(n)
        b[: len(data)] = data
        self._remaining -= len(data)
        return len(data)


class CorpusReader:
    """Lazy corpus pass: iterate to get RawTweets, then read ``.stats``.

    Each iteration re-opens the file and resets the statistics, so two
    passes over an unchanged file yield identical sequences. Memory use is
    bounded by the distinct-id set kept for duplicate detection.

    Per-row checks run in a fixed order (parse, window, duplicate) so that
    sharded and single-pass runs count rows identically.
    """

    def __init__(
        self,
        path,
        schema: TweetSchema | None = None,
        window: tuple[date, date] | None = DEFAULT_WINDOW,
        byte_range: tuple[int, int] | None = None,
    ):
        self.path = path
        self.schema = schema or TweetSchema()
        self.window = window
        self.stats = CorpusStats()
        self._byte_range = byte_range
        self._indices: tuple | None = None

    def header_indices(self) -> tuple:
        if self._indices is None:
            with open(self.path, "r", encoding="utf-8", newline="") as fh:
                reader = csv.reader(fh, delimiter=self.schema.delimiter)
                header = next(reader, None)
                if header is None:
                    raise HeaderMismatch(f"{self.path}: empty file, header row required")
                try:
                    self._indices = self.schema.resolve(header)
                except MissingColumn as exc:
                    raise HeaderMismatch(f"{self.path}: {exc}") from None
        return self._indices

    def __iter__(self) -> Iterator[RawTweet]:
        self.stats = CorpusStats()
        stats = self.stats
        schema = self.schema
        indices = self.header_indices()
        i_id, i_user, i_ts, i_replies, i_likes, i_rts, i_text = indices
        width = max(indices) + 1
        seen: set = set()
        epoch_mode = schema.timestamp_format == "epoch"
        fromiso = datetime.fromisoformat
        fromts = datetime.fromtimestamp
        if self.window is not None:
            w_lo = datetime.combine(self.window[0], datetime.min.time(), tzinfo=UTC)
            w_hi = datetime.combine(self.window[1] + timedelta(days=1), datetime.min.time(), tzinfo=UTC)
        else:
            w_lo = w_hi = None

        with open(self.path, "rb") as raw:
            if self._byte_range is not None:
                start, end = self._byte_range
                raw.seek(start)
                text = io.TextIOWrapper(
                    io.BufferedReader(_BoundedBinary(raw, end - start)), encoding="utf-8", newline=""
                )
                reader = csv.reader(text, delimiter=schema.delimiter)
            else:
                text = io.TextIOWrapper(raw, encoding="utf-8", newline="")
                reader = csv.reader(text, delimiter=schema.delimiter)
                next(reader, None)  # header row
            for rec in reader:
                stats.rows_read += 1
                if len(rec) < width:
                    stats.rows_malformed += 1
                    continue
                raw_ts = rec[i_ts]
                try:
                    if epoch_mode:
                        ts = fromts(int(raw_ts), tz=UTC)
                    else:
                        if raw_ts.endswith("Z"):
                            raw_ts = raw_ts[:-1]
                        ts = fromiso(raw_ts)
                        if ts.tzinfo is None:
                            ts = ts.replace(tzinfo=UTC)
                        else:
                            ts = ts.astimezone(UTC)
                except (ValueError, OverflowError, OSError):
                    stats.rows_malformed += 1
                    continue
                try:
                    replies = int(rec[i_replies])
                    likes = int(rec[i_likes])
                    retweets = int(rec[i_rts])
                except ValueError:
                    stats.rows_malformed += 1
                    continue
                if replies < 0 or likes < 0 or retweets < 0:
                    stats.rows_malformed += 1
                    continue
                tweet_id = rec[i_id]
                if not tweet_id:
                    stats.rows_malformed += 1
                    continue
                if w_lo is not None and not (w_lo <= ts < w_hi):
                    stats.rows_out_of_window += 1
                    continue
                if tweet_id in seen:
                    stats.rows_duplicate += 1
                    continue
                seen.add(tweet_id)
                stats.rows_kept += 1
                yield RawTweet(tweet_id, rec[i_user], ts, replies, likes, retweets, rec[i_text])


def stream_corpus(path, schema: TweetSchema | None = None, window=DEFAULT_WINDOW) -> CorpusReader:
    """Open a corpus for one or more lazy validated passes."""
    return CorpusReader(path, schema, window)


def read_shard(path, byte_range: tuple[int, int], schema: TweetSchema | None = None,
               window=DEFAULT_WINDOW) -> CorpusReader:
    """Corpus pass restricted to one shard's byte range (within-shard dedup only)."""
    return CorpusReader(path, schema, window, byte_range=byte_range)


def plan_shards(path, n_shards: int, delimiter: str = DEFAULT_DELIMITER) -> list[tuple[int, int]]:
    """Split a corpus file into byte ranges aligned to record boundaries.

    Works on RFC-4180 files: a newline is a record boundary iff the number
    of quote characters before it is even, so boundaries are found by
    tracking quote parity in a single buffered pass. The header row is
    excluded from the first shard. Returns ``[(start, end), ...]`` covering
    the data region contiguously (fewer ranges than requested when the file
    is small).
    """
    if n_shards < 1:
        raise ValueError("n_shards must be >= 1")
    with open(path, "rb") as fh:
        data_size = fh.seek(0, 2)
        fh.seek(0)
        fh.readline()  # header
        data_start = fh.tell()
        if n_shards == 1 or data_size - data_start == 0:
            return [(data_start, data_size)]
        targets = [data_start + (data_size - data_start) * i // n_shards for i in range(1, n_shards)]
        boundaries: list[int] = []
        parity = 0
        pos = fh.tell()
        ti = 0
        chunk_size = 1 << 20
        while ti < len(targets):
            chunk = fh.read(chunk_size)
            if not chunk:
                break
            search_from = 0
            while ti < len(targets):
                nl = chunk.find(b"\n", search_from)
                if nl == -1:
                    parity = (parity + chunk.count(b'"', search_from)) % 2
                    break
                parity = (parity + chunk.count(b'"', search_from, nl)) % 2
                search_from = nl + 1
                boundary = pos + nl + 1
                if parity == 0 and boundary >= targets[ti]:
                    boundaries.append(boundary)
                    while ti < len(targets) and targets[ti] <= boundary:
                        ti += 1
            pos += len(chunk)
    edges = [data_start] + boundaries + [data_size]
    return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1) if edges[i] < edges[i + 1]]


def load_price_series(path, fill_policy: str = "forward_fill", delimiter: str = ",") -> list[PriceBar]:
    """Load and validate a two-column (date, close) series, sorted ascending.

    ``forward_fill`` inserts the prior close on calendar gaps; ``drop``
    leaves gaps so downstream joins skip those days.
    """
    if fill_policy not in ("forward_fill", "drop"):
        raise ValueError(f"unknown fill_policy {fill_policy!r}")
    bars: list[PriceBar] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise HeaderMismatch(f"{path}: price series needs a date,close header")
        for rec in reader:
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if len(rec) < 2:
                raise DataError(f"{path}: short price row {rec!r}")
            try:
                day = date.fromisoformat(rec[0].strip())
            except ValueError:
                raise DataError(f"{path}: bad date {rec[0]!r}") from None
            try:
                close = float(rec[1])
            except ValueError:
                raise DataError(f"{path}: bad close {rec[1]!r}") from None
            if not close > 0:
                raise NonPositivePrice(f"{path}: close {close!r} on {day} must be > 0")
            bars.append(PriceBar(day, close))
    if len(bars) < 2:
        raise DataError(f"{path}: need at least 2 price rows, got {len(bars)}")
    bars.sort(key=lambda b: b.date)
    for prev, cur in zip(bars, bars[1:]):
        if prev.date == cur.date:
            raise DuplicateDate(f"{path}: duplicate price date {cur.date}")
    if fill_policy == "forward_fill":
        filled: list[PriceBar] = [bars[0]]
        for bar in bars[1:]:
            day = filled[-1].date + timedelta(days=1)
            while day < bar.date:
                filled.append(PriceBar(day, filled[-1].close))
                day += timedelta(days=1)
            filled.append(bar)
        bars = filled
    return bars


def write_price_series(bars: Iterable[PriceBar], path, delimiter: str = ",") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(["date", "close"])
        for bar in bars:
            writer.writerow([bar.date.isoformat(), repr(bar.close)])
