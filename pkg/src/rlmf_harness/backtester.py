"""Per-headline unit-trade backtesting.

Every scored event becomes one unit-notional trade (long, short, or hold);
cumulative return per ticker is the running sum of signed simple returns in
canonical (entry_date, event_id) order. Overlapping forward windows coexist
as independent trades and nothing is compounded, so every curve is additive
and checkable against a naive reference.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import date
from pathlib import Path

from .errors import ComparisonError, JoinMismatchError
from .market_data import AlignedEvent
from .rlmf_reward import Action, RewardParams, compute_reward, map_action
from .signal_engine import SentimentSignal


@dataclass(frozen=True)
class Trade:
    event_id: str
    ticker: str
    entry_date: date
    action: Action
    realized_return: float  # +R long, -R short, 0 hold


@dataclass(frozen=True)
class BacktestReport:
    per_ticker_series: dict[str, list[tuple[date, float]]]
    mean_eval_series: list[tuple[date, float]]
    win_rate: float | None  # None when there are no directional trades
    trade_counts: dict[str, int]
    dispersion: float
    total_reward: float

    def final_returns(self) -> dict[str, float]:
        return {t: pts[-1][1] for t, pts in self.per_ticker_series.items()}

    def tickers(self) -> set[str]:
        return set(self.per_ticker_series)


@dataclass(frozen=True)
class ComparisonSummary:
    per_ticker_finals: dict[str, tuple[float, float]]  # ticker -> (a, b)
    dispersion_a: float
    dispersion_b: float
    dispersion_ratio: float  # a / b (1.0 when both are zero)
    win_rate_delta: float | None  # a - b; None if either is undefined
    action_mix_delta: dict[str, int]  # a - b per action
    narrower: str  # "a" | "b" | "equal"


def run_backtest(
    signals: list[SentimentSignal],
    events: list[AlignedEvent],
    params: RewardParams,
) -> BacktestReport:
    """Simulate one trade per signal and aggregate the report metrics."""
    params.validate()
    by_id = {e.headline.id: e for e in events}
    trades: list[tuple[Trade, int, float]] = []  # trade, score, forward_return
    for signal in signals:
        event = by_id.get(signal.event_id)
        if event is None:
            raise JoinMismatchError(
                f"signal event_id {signal.event_id!r} has no matching event"
            )
        action = map_action(signal.score, params.action_threshold)
        if action is Action.LONG:
            realized = event.forward_return
        elif action is Action.SHORT:
            realized = -event.forward_return
        else:
            realized = 0.0
        trades.append(
            (
                Trade(
                    event_id=signal.event_id,
                    ticker=event.headline.ticker,
                    entry_date=event.entry_date,
                    action=action,
                    realized_return=realized,
                ),
                signal.score,
                event.forward_return,
            )
        )
    trades.sort(key=lambda t: (t[0].entry_date, t[0].event_id))

    per_ticker: dict[str, list[tuple[date, float]]] = {}
    running: dict[str, float] = {}
    for trade, _, _ in trades:
        running[trade.ticker] = running.get(trade.ticker, 0.0) + trade.realized_return
        per_ticker.setdefault(trade.ticker, []).append(
            (trade.entry_date, running[trade.ticker])
        )
    per_ticker = {t: per_ticker[t] for t in sorted(per_ticker)}

    # Mean curve: at each trading date, average the latest cumulative value of
    # every ticker that has traded at least once so far.
    mean_series: list[tuple[date, float]] = []
    cursor = {t: 0 for t in per_ticker}
    latest: dict[str, float] = {}
    for d in sorted({trade.entry_date for trade, _, _ in trades}):
        for ticker, pts in per_ticker.items():
            i = cursor[ticker]
            while i < len(pts) and pts[i][0] <= d:
                latest[ticker] = pts[i][1]
                i += 1
            cursor[ticker] = i
        mean_series.append((d, sum(latest.values()) / len(latest)))

    directional = [t for t, _, _ in trades if t.action is not Action.HOLD]
    wins = sum(1 for t in directional if t.realized_return > 0)
    win_rate = wins / len(directional) if directional else None
    counts = {
        "long": sum(1 for t, _, _ in trades if t.action is Action.LONG),
        "short": sum(1 for t, _, _ in trades if t.action is Action.SHORT),
        "hold": sum(1 for t, _, _ in trades if t.action is Action.HOLD),
    }
    finals = [pts[-1][1] for pts in per_ticker.values()]
    dispersion = (max(finals) - min(finals)) if finals else 0.0
    total_reward = sum(
        compute_reward(score, params, fwd) for _, score, fwd in trades
    )
    return BacktestReport(
        per_ticker_series=per_ticker,
        mean_eval_series=mean_series,
        win_rate=win_rate,
        trade_counts=counts,
        dispersion=dispersion,
        total_reward=total_reward,
    )


def compare_reports(a: BacktestReport, b: BacktestReport) -> ComparisonSummary:
    """Side-by-side dispersion, win-rate, and action-mix comparison."""
    if a.tickers() != b.tickers():
        only_a = sorted(a.tickers() - b.tickers())
        only_b = sorted(b.tickers() - a.tickers())
        raise ComparisonError(
            f"ticker sets differ (only in a: {only_a}, only in b: {only_b})"
        )
    finals_a, finals_b = a.final_returns(), b.final_returns()
    per_ticker = {t: (finals_a[t], finals_b[t]) for t in sorted(finals_a)}
    if a.dispersion == b.dispersion:
        ratio = 1.0
    elif b.dispersion == 0:
        ratio = float("inf")
    else:
        ratio = a.dispersion / b.dispersion
    if a.win_rate is None or b.win_rate is None:
        win_delta = None
    else:
        win_delta = a.win_rate - b.win_rate
    mix_delta = {
        k: a.trade_counts.get(k, 0) - b.trade_counts.get(k, 0)
        for k in ("long", "short", "hold")
    }
    if a.dispersion < b.dispersion:
        narrower = "a"
    elif b.dispersion < a.dispersion:
        narrower = "b"
    else:
        narrower = "equal"
    return ComparisonSummary(
        per_ticker_finals=per_ticker,
        dispersion_a=a.dispersion,
        dispersion_b=b.dispersion,
        dispersion_ratio=ratio,
        win_rate_delta=win_delta,
        action_mix_delta=mix_delta,
        narrower=narrower,
    )


def report_to_dict(report: BacktestReport) -> dict:
    return {
        "per_ticker_series": {
            ticker: [[d.isoformat(), value] for d, value in pts]
            for ticker, pts in report.per_ticker_series.items()
        },
        "mean_eval_series": [[d.isoformat(), v] for d, v in report.mean_eval_series],
        "win_rate": report.win_rate,
        "trade_counts": report.trade_counts,
        "dispersion": report.dispersion,
        "total_reward": report.total_reward,
    }


def report_from_dict(payload: dict) -> BacktestReport:
    return BacktestReport(
        per_ticker_series={
            ticker: [(date.fromisoformat(d), float(v)) for d, v in pts]
            for ticker, pts in payload["per_ticker_series"].items()
        },
        mean_eval_series=[
            (date.fromisoformat(d), float(v)) for d, v in payload["mean_eval_series"]
        ],
        win_rate=None if payload["win_rate"] is None else float(payload["win_rate"]),
        trade_counts={k: int(v) for k, v in payload["trade_counts"].items()},
        dispersion=float(payload["dispersion"]),
        total_reward=float(payload["total_reward"]),
    )


def read_report_json(path: str | Path) -> BacktestReport:
    with Path(path).open(encoding="utf-8") as fh:
        return report_from_dict(json.load(fh))


def export_report(report: BacktestReport, out_dir: str | Path, fmt: str = "json") -> list[Path]:
    """Write report files; `json` keeps the full report, `csv` the flat views."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if fmt == "json":
        path = out_dir / "report.json"
        with path.open("w", encoding="utf-8") as fh:
            json.dump(report_to_dict(report), fh, indent=2)
            fh.write("\n")
        written.append(path)
    elif fmt == "csv":
        curves = out_dir / "curves.csv"
        with curves.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["ticker", "date", "cumulative_return"])
            for ticker, pts in report.per_ticker_series.items():
                for d, value in pts:
                    writer.writerow([ticker, d.isoformat(), repr(value)])
        written.append(curves)
        summary = out_dir / "summary.csv"
        finals = report.final_returns()
        with summary.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["metric", "value"])
            writer.writerow(["win_rate", "" if report.win_rate is None else repr(report.win_rate)])
            writer.writerow(["dispersion", repr(report.dispersion)])
            writer.writerow(["total_reward", repr(report.total_reward)])
            for action in ("long", "short", "hold"):
                writer.writerow([f"trades_{action}", report.trade_counts.get(action, 0)])
            for ticker in sorted(finals):
                writer.writerow([f"final_return_{ticker}", repr(finals[ticker])])
        written.append(summary)
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    return written


def export_long_csv(report: BacktestReport, path: str | Path) -> None:
    """Plot-ready long-format CSV: one row per (series, date, value)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["series", "date", "value"])
        for ticker, pts in report.per_ticker_series.items():
            for d, value in pts:
                writer.writerow([ticker, d.isoformat(), repr(value)])
        for d, value in report.mean_eval_series:
            writer.writerow(["mean_eval", d.isoformat(), repr(value)])
