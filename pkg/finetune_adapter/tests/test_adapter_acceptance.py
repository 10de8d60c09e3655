"""Acceptance gate for the fine-tune adapter.

Criterion: on a 200-example planted-signal toy set, a 3-epoch
reward-weighted fine-tune of a small instruct model yields held-out mean
reward >= the base model's, measured end-to-end through the external
signal harness at temperature 0, with a runtime of minutes on CPU.

The pipeline below touches the harness only through its command line and
file formats, exactly as a real deployment would: synthetic corpus ->
ingest -> replay signals -> feedback export -> fine-tune -> held-out
evaluation behind a local chat-completions endpoint.
"""

from __future__ import annotations

import json
import subprocess
import sys
import time
from pathlib import Path

from finetune_adapter import TrainingConfig, evaluate_adapter, load_feedback, train_adapter

REPO_ROOT = Path(__file__).resolve().parents[2]
CORPUS_SCRIPT = REPO_ROOT / "scripts" / "make_synthetic_corpus.py"
HARNESS_CLI = (sys.executable, "-m", "rlmf_harness.cli")

TRAIN_EXAMPLES = 200
RUNTIME_BUDGET_SECONDS = 600.0


def _run(*args: object) -> None:
    proc = subprocess.run(
        [str(a) for a in args], capture_output=True, text=True, timeout=300
    )
    assert proc.returncode == 0, f"{args[0]} failed: {proc.stderr or proc.stdout}"


def test_three_epoch_tune_beats_base_on_held_out_events(tmp_path):
    started = time.perf_counter()

    # Planted corpus: headline wording determines the sign of a +/-5% move
    # three trading days out; 20% of replay scores are deliberately wrong
    # and earn negative rewards, so reward weighting has real work to do.
    corpus = tmp_path / "corpus"
    _run(sys.executable, CORPUS_SCRIPT, "--out-dir", corpus, "--tickers", 8,
         "--events-per-ticker", 32, "--noise-frac", 0.2, "--seed", 11)

    events = tmp_path / "events.jsonl"
    _run(*HARNESS_CLI, "ingest", "--headlines", corpus / "headlines.csv",
         "--prices", corpus / "prices.csv", "--out", events)

    # Time-ordered split: first 200 events train, the rest are held out.
    rows = [json.loads(line) for line in events.read_text().splitlines()]
    rows.sort(key=lambda row: (row["entry_date"], row["id"]))
    assert len(rows) > TRAIN_EXAMPLES, "corpus too small for a held-out split"
    train_events = tmp_path / "train_events.jsonl"
    eval_events = tmp_path / "eval_events.jsonl"
    train_rows, eval_rows = rows[:TRAIN_EXAMPLES], rows[TRAIN_EXAMPLES:]
    assert max(r["entry_date"] for r in train_rows) < min(r["entry_date"] for r in eval_rows)
    train_events.write_text("".join(json.dumps(r) + "\n" for r in train_rows))
    eval_events.write_text("".join(json.dumps(r) + "\n" for r in eval_rows))

    # Feedback for the training period, via the harness's own export.
    train_signals = tmp_path / "train_signals.jsonl"
    _run(*HARNESS_CLI, "signals", "--events", train_events, "--source", "replay",
         "--replay-file", corpus / "replay.jsonl", "--out", train_signals)
    feedback = tmp_path / "feedback.jsonl"
    _run(*HARNESS_CLI, "export-feedback", "--events", train_events,
         "--signals", train_signals, "--out", feedback)

    examples = load_feedback(feedback)
    assert len(examples) == TRAIN_EXAMPLES

    # 3-epoch reward-weighted fine-tune (the package defaults).
    adapter_dir = tmp_path / "adapter"
    config = TrainingConfig()
    assert config.epochs == 3
    result = train_adapter(examples, adapter_dir, config)
    assert len(result.epoch_losses) == 3
    assert result.final_loss <= result.epoch_losses[0]

    # Held-out comparison through the harness (its signal requests are
    # temperature-0; serving decodes greedily as well).
    report = evaluate_adapter(
        adapter_dir, eval_events, work_dir=tmp_path / "eval_artifacts"
    )

    assert report.eval_events == len(eval_rows)
    assert report.base.scored_events == len(eval_rows)
    assert report.adapted.scored_events == len(eval_rows)
    assert report.adapted.mean_reward >= report.base.mean_reward, (
        f"adapted {report.adapted.mean_reward:+.6f} < base {report.base.mean_reward:+.6f}"
    )
    # The tuned model should be taking real directional positions, not
    # passing the bar degenerately.
    assert report.adapted.trade_counts.get("long", 0) > 0
    assert report.adapted.trade_counts.get("short", 0) > 0

    elapsed = time.perf_counter() - started
    assert elapsed < RUNTIME_BUDGET_SECONDS, f"took {elapsed:.1f}s"
    print(
        f"[PASS] adapter smoke test: {TRAIN_EXAMPLES}-example 3-epoch tune, "
        f"held-out mean reward {report.adapted.mean_reward:+.6f} >= "
        f"base {report.base.mean_reward:+.6f} "
        f"(improvement {report.improvement:+.6f}; {elapsed:.1f}s, "
        f"budget {RUNTIME_BUDGET_SECONDS:.0f}s)"
    )
