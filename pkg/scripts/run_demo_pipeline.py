#!/usr/bin/env python3
"""End-to-end demo of the signal-evaluation pipeline on a synthetic corpus.

Steps, all through the command-line interface:

1. generate a planted-signal corpus (make_synthetic_corpus.py)
2. ingest   - align headlines against prices into events.jsonl
3. split    - partition events into train/eval by entry date (60/40)
4. signals  - score both partitions from the replay file, plus a lexicon
              baseline on the eval partition
5. calibrate- grid-search (tau, theta, beta) on the train partition
6. backtest - eval partition under calibrated vs permissive parameters
7. compare  - dispersion ratio between the two backtests
8. export-feedback - (prompt, score, reward) records for downstream tuning
9. report   - long-format CSV of cumulative-return curves

Run:  python scripts/run_demo_pipeline.py --out-dir /tmp/demo
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from pathlib import Path

SCRIPTS_DIR = Path(__file__).resolve().parent


def run(argv: list[str]) -> None:
    print("+", " ".join(argv))
    subprocess.run(argv, check=True)


def cli(*args: object) -> None:
    run([sys.executable, "-m", "rlmf_harness.cli", *[str(a) for a in args]])


def split_events(events_path: Path, train_path: Path, eval_path: Path,
                 train_frac: float) -> tuple[str, str]:
    rows = [json.loads(line) for line in events_path.read_text().splitlines()]
    dates = sorted({row["entry_date"] for row in rows})
    cut = dates[max(0, min(len(dates) - 2, int(len(dates) * train_frac)))]
    train = [r for r in rows if r["entry_date"] <= cut]
    evaluation = [r for r in rows if r["entry_date"] > cut]
    for path, subset in ((train_path, train), (eval_path, evaluation)):
        with path.open("w", encoding="utf-8") as fh:
            for row in subset:
                fh.write(json.dumps(row) + "\n")
    print(f"split {len(rows)} events: {len(train)} train (entry <= {cut}), "
          f"{len(evaluation)} eval")
    return cut, dates[-1]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--tickers", type=int, default=8)
    parser.add_argument("--events-per-ticker", type=int, default=30)
    parser.add_argument("--noise-frac", type=float, default=0.2)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--train-frac", type=float, default=0.6)
    args = parser.parse_args()

    out = Path(args.out_dir)
    corpus = out / "corpus"
    run([sys.executable, str(SCRIPTS_DIR / "make_synthetic_corpus.py"),
         "--out-dir", str(corpus), "--tickers", str(args.tickers),
         "--events-per-ticker", str(args.events_per_ticker),
         "--noise-frac", str(args.noise_frac), "--seed", str(args.seed)])

    events = out / "events.jsonl"
    cli("ingest", "--headlines", corpus / "headlines.csv",
        "--prices", corpus / "prices.csv", "--out", events)

    train_events = out / "events_train.jsonl"
    eval_events = out / "events_eval.jsonl"
    split_events(events, train_events, eval_events, args.train_frac)

    train_signals = out / "signals_train.jsonl"
    eval_signals = out / "signals_eval.jsonl"
    baseline_signals = out / "signals_baseline.jsonl"
    for events_path, signals_path in ((train_events, train_signals),
                                      (eval_events, eval_signals)):
        cli("signals", "--events", events_path, "--source", "replay",
            "--replay-file", corpus / "replay.jsonl", "--out", signals_path)
    cli("signals", "--events", eval_events, "--source", "baseline",
        "--out", baseline_signals)

    calibration = out / "calibration.json"
    cli("calibrate", "--events", train_events, "--signals", train_signals,
        "--out", calibration)
    best = json.loads(calibration.read_text())["best_params"]
    print(f"calibrated parameters: tau={best['action_threshold']} "
          f"theta={best['movement_threshold']} beta={best['hold_reward']}")

    cli("backtest", "--events", eval_events, "--signals", eval_signals,
        "--out-dir", out / "bt_calibrated",
        "--tau", best["action_threshold"],
        "--theta", best["movement_threshold"],
        "--beta", best["hold_reward"])
    cli("backtest", "--events", eval_events, "--signals", eval_signals,
        "--out-dir", out / "bt_permissive",
        "--tau", 1, "--theta", 0.0, "--beta", 0.001)
    cli("backtest", "--events", eval_events, "--signals", baseline_signals,
        "--out-dir", out / "bt_baseline",
        "--tau", best["action_threshold"],
        "--theta", best["movement_threshold"],
        "--beta", best["hold_reward"])

    cli("compare", out / "bt_calibrated" / "report.json",
        out / "bt_permissive" / "report.json",
        "--out", out / "compare_calibrated_vs_permissive.json")
    cli("compare", out / "bt_calibrated" / "report.json",
        out / "bt_baseline" / "report.json",
        "--out", out / "compare_replay_vs_baseline.json")

    cli("export-feedback", "--events", train_events,
        "--signals", train_signals, "--out", out / "feedback.jsonl",
        "--tau", best["action_threshold"],
        "--theta", best["movement_threshold"],
        "--beta", best["hold_reward"])
    cli("report", "--report", out / "bt_calibrated" / "report.json",
        "--out", out / "curves_long.csv")

    print(f"\nartifacts under {out}:")
    for path in sorted(out.rglob("*")):
        if path.is_file():
            print(f"  {path.relative_to(out)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
