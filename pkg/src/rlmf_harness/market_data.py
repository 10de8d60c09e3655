"""Headline and price ingestion, event alignment, and period splitting.

Every headline is linked to its ticker's entry close (first trading date on
or after the headline's calendar date, optionally lagged) and the close a
fixed number of trading days later; the fractional change between the two
is the realized outcome every downstream reward compares against.
"""

from __future__ import annotations

import csv
import json
import re
from bisect import bisect_left
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

from .errors import MalformedInputError

TICKER_RE = re.compile(r"^[A-Z.]{1,10}$")

HEADLINE_HEADER = ["id", "timestamp", "ticker", "text"]
PRICE_HEADER = ["ticker", "date", "open", "high", "low", "close", "volume"]

DEFAULT_HORIZON = 3


@dataclass(frozen=True)
class Headline:
    """One timestamped, ticker-tagged news item."""

    id: str
    timestamp: datetime
    ticker: str
    text: str


@dataclass(frozen=True)
class PriceBar:
    ticker: str
    date: date
    open: float
    high: float
    low: float
    close: float
    volume: float


@dataclass(frozen=True)
class AlignedEvent:
    """Headline joined to its entry close and forward close."""

    headline: Headline
    entry_date: date
    entry_close: float
    forward_date: date
    forward_close: float
    forward_return: float


@dataclass(frozen=True)
class AlignmentResult:
    events: list[AlignedEvent]
    skipped: list[tuple[str, str]]  # (headline id, reason)

    @property
    def skip_tally(self) -> int:
        return len(self.skipped)


# A price series is a mapping ticker -> bars sorted ascending by date.
PriceSeries = dict[str, list[PriceBar]]


def _parse_timestamp(raw: str) -> datetime:
    ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def load_headlines(path: str | Path) -> list[Headline]:
    """Load a headline CSV (`id,timestamp,ticker,text`) in file order."""
    path = Path(path)
    if not path.exists():
        raise MalformedInputError(path, None, "file not found")
    headlines: list[Headline] = []
    seen_ids: set[str] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != HEADLINE_HEADER:
            raise MalformedInputError(
                path, 1, f"expected header {','.join(HEADLINE_HEADER)}, got {header}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(HEADLINE_HEADER):
                raise MalformedInputError(
                    path, line_no, f"expected {len(HEADLINE_HEADER)} fields, got {len(row)}"
                )
            hid, raw_ts, ticker, text = row
            if not hid:
                raise MalformedInputError(path, line_no, "empty id")
            if hid in seen_ids:
                raise MalformedInputError(path, line_no, f"duplicate id {hid!r}")
            try:
                ts = _parse_timestamp(raw_ts)
            except ValueError:
                raise MalformedInputError(path, line_no, f"bad timestamp {raw_ts!r}")
            if not TICKER_RE.match(ticker):
                raise MalformedInputError(path, line_no, f"bad ticker {ticker!r}")
            if not text.strip():
                raise MalformedInputError(path, line_no, "empty headline text")
            seen_ids.add(hid)
            headlines.append(Headline(id=hid, timestamp=ts, ticker=ticker, text=text))
    return headlines


def load_prices(path: str | Path) -> PriceSeries:
    """Load a daily price CSV into per-ticker series sorted ascending by date."""
    path = Path(path)
    if not path.exists():
        raise MalformedInputError(path, None, "file not found")
    series: PriceSeries = {}
    seen_keys: set[tuple[str, date]] = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != PRICE_HEADER:
            raise MalformedInputError(
                path, 1, f"expected header {','.join(PRICE_HEADER)}, got {header}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(PRICE_HEADER):
                raise MalformedInputError(
                    path, line_no, f"expected {len(PRICE_HEADER)} fields, got {len(row)}"
                )
            ticker, raw_date, *rest = row
            if not TICKER_RE.match(ticker):
                raise MalformedInputError(path, line_no, f"bad ticker {ticker!r}")
            try:
                bar_date = date.fromisoformat(raw_date)
            except ValueError:
                raise MalformedInputError(path, line_no, f"bad date {raw_date!r}")
            try:
                o, h, l, c, v = (float(x) for x in rest)
            except ValueError:
                raise MalformedInputError(path, line_no, "non-numeric price field")
            if min(o, h, l, c) <= 0:
                raise MalformedInputError(path, line_no, "prices must be positive")
            if v < 0:
                raise MalformedInputError(path, line_no, "negative volume")
            if l > min(o, c) or h < max(o, c):
                raise MalformedInputError(
                    path, line_no, f"OHLC invariant violated (o={o} h={h} l={l} c={c})"
                )
            key = (ticker, bar_date)
            if key in seen_keys:
                raise MalformedInputError(
                    path, line_no, f"duplicate bar for {ticker} on {bar_date}"
                )
            seen_keys.add(key)
            series.setdefault(ticker, []).append(
                PriceBar(ticker=ticker, date=bar_date, open=o, high=h, low=l, close=c, volume=v)
            )
    for bars in series.values():
        bars.sort(key=lambda b: b.date)
    return series


def align_events(
    headlines: list[Headline],
    prices: PriceSeries,
    horizon: int = DEFAULT_HORIZON,
    entry_lag: int = 0,
) -> AlignmentResult:
    """Join each headline to its entry close and the horizon-day forward close.

    Entry is the first trading date >= the headline's UTC calendar date plus
    `entry_lag` days; the forward bar is `horizon` trading dates strictly
    after entry. Headlines without both bars are skipped, never extrapolated.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if entry_lag not in (0, 1):
        raise ValueError("entry_lag must be 0 or 1")
    date_index = {ticker: [b.date for b in bars] for ticker, bars in prices.items()}
    events: list[AlignedEvent] = []
    skipped: list[tuple[str, str]] = []
    for headline in headlines:
        bars = prices.get(headline.ticker)
        if not bars:
            skipped.append((headline.id, "no price series for ticker"))
            continue
        dates = date_index[headline.ticker]
        target = headline.timestamp.date() + timedelta(days=entry_lag)
        entry_idx = bisect_left(dates, target)
        if entry_idx >= len(bars):
            skipped.append((headline.id, "no trading date on or after headline"))
            continue
        forward_idx = entry_idx + horizon
        if forward_idx >= len(bars):
            skipped.append((headline.id, "insufficient forward bars"))
            continue
        entry = bars[entry_idx]
        forward = bars[forward_idx]
        events.append(
            AlignedEvent(
                headline=headline,
                entry_date=entry.date,
                entry_close=entry.close,
                forward_date=forward.date,
                forward_close=forward.close,
                forward_return=(forward.close - entry.close) / entry.close,
            )
        )
    return AlignmentResult(events=events, skipped=skipped)


def split_periods(
    events: list[AlignedEvent],
    train_end: date,
    eval_start: date,
    eval_end: date,
) -> tuple[list[AlignedEvent], list[AlignedEvent]]:
    """Partition events by entry date into training and evaluation periods."""
    if not train_end < eval_start <= eval_end:
        raise ValueError(
            f"date bounds must satisfy train_end < eval_start <= eval_end, "
            f"got {train_end} / {eval_start} / {eval_end}"
        )
    train = [e for e in events if e.entry_date <= train_end]
    evaluation = [e for e in events if eval_start <= e.entry_date <= eval_end]
    return train, evaluation


def _timestamp_str(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def event_to_dict(event: AlignedEvent) -> dict:
    return {
        "id": event.headline.id,
        "timestamp": _timestamp_str(event.headline.timestamp),
        "ticker": event.headline.ticker,
        "text": event.headline.text,
        "entry_date": event.entry_date.isoformat(),
        "entry_close": event.entry_close,
        "forward_date": event.forward_date.isoformat(),
        "forward_close": event.forward_close,
        "forward_return": event.forward_return,
    }


def event_from_dict(payload: dict) -> AlignedEvent:
    headline = Headline(
        id=payload["id"],
        timestamp=_parse_timestamp(payload["timestamp"]),
        ticker=payload["ticker"],
        text=payload["text"],
    )
    return AlignedEvent(
        headline=headline,
        entry_date=date.fromisoformat(payload["entry_date"]),
        entry_close=float(payload["entry_close"]),
        forward_date=date.fromisoformat(payload["forward_date"]),
        forward_close=float(payload["forward_close"]),
        forward_return=float(payload["forward_return"]),
    )


def write_events_jsonl(events: list[AlignedEvent], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for event in events:
            fh.write(json.dumps(event_to_dict(event)) + "\n")


def read_events_jsonl(path: str | Path) -> list[AlignedEvent]:
    path = Path(path)
    if not path.exists():
        raise MalformedInputError(path, None, "file not found")
    events = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                events.append(event_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise MalformedInputError(path, line_no, f"bad event record: {exc}")
    return events
