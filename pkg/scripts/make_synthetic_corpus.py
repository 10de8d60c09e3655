#!/usr/bin/env python3
"""Generate a planted-signal corpus: headlines.csv, prices.csv, replay.jsonl.

Every headline is followed by an exactly +/-5% close-to-close move over the
next three trading days. The replay file scores agree in sign with the move,
except for a configurable fraction of sign-flipped, low-magnitude noise
scores. Calibrating thresholds on this corpus should push the action
threshold above the noise magnitude, which is easy to verify by eye.
"""

from __future__ import annotations

import argparse
import csv
import json
import random
from datetime import date, timedelta
from pathlib import Path

POSITIVE_TEXTS = [
    "reports record quarterly profit",
    "revenue growth beats expectations",
    "shares rally on strong outlook",
    "wins major contract and stock surges",
    "announces breakthrough product as sales boom",
]
NEGATIVE_TEXTS = [
    "issues warning as sales slump",
    "faces investigation into fraud concerns",
    "shares plunge after earnings miss",
    "cuts guidance as demand falls",
    "announces layoffs amid downturn",
]


def weekdays(start: date, n: int) -> list[date]:
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += timedelta(days=1)
    return out


def ticker_name(i: int) -> str:
    return chr(ord("A") + i // 26) + chr(ord("A") + i % 26) + "X"


def build(args) -> dict:
    rng = random.Random(args.seed)
    days = weekdays(date(2021, 1, 4), args.events_per_ticker * 5 + 5)
    headline_rows: list[tuple[str, str, str, str]] = []
    price_rows: list[tuple] = []
    replay_rows: list[dict] = []
    n_noisy = 0
    for t in range(args.tickers):
        ticker = ticker_name(t)
        closes: dict[date, float] = {}
        for k in range(args.events_per_ticker):
            base = k * 5
            sign = rng.choice([1, -1])
            path = [100.0, 101.0, 103.0, 105.0] if sign > 0 else [100.0, 99.0, 97.0, 95.0]
            for offset, close in enumerate(path):
                closes[days[base + offset]] = close
            closes.setdefault(days[base + 4], 100.0)
            hid = f"{ticker}-{k:03d}"
            text_pool = POSITIVE_TEXTS if sign > 0 else NEGATIVE_TEXTS
            headline_rows.append(
                (hid, days[base].isoformat() + "T14:30:00Z", ticker,
                 f"{ticker} {rng.choice(text_pool)}")
            )
            if rng.random() < args.noise_frac:
                score = -sign * args.noise_score
                n_noisy += 1
            else:
                score = sign * args.correct_score
            replay_rows.append(
                {"event_id": hid, "score": score, "raw_output": "",
                 "source_tag": "replay", "clamped": False}
            )
        for d in sorted(closes):
            close = closes[d]
            price_rows.append(
                (ticker, d.isoformat(), close, close, close, close, 10_000)
            )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "headlines.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "timestamp", "ticker", "text"])
        writer.writerows(headline_rows)
    with (out_dir / "prices.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["ticker", "date", "open", "high", "low", "close", "volume"])
        writer.writerows(price_rows)
    with (out_dir / "replay.jsonl").open("w", encoding="utf-8") as fh:
        for row in replay_rows:
            fh.write(json.dumps(row) + "\n")
    return {
        "headlines": len(headline_rows),
        "bars": len(price_rows),
        "noisy_scores": n_noisy,
        "out_dir": str(out_dir),
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--tickers", type=int, default=8)
    parser.add_argument("--events-per-ticker", type=int, default=30)
    parser.add_argument("--noise-frac", type=float, default=0.2,
                        help="fraction of scores with flipped sign (default 0.2)")
    parser.add_argument("--correct-score", type=int, default=8)
    parser.add_argument("--noise-score", type=int, default=4)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    stats = build(args)
    print(
        f"wrote {stats['headlines']} headlines, {stats['bars']} bars, "
        f"{stats['noisy_scores']} noisy scores -> {stats['out_dir']}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
