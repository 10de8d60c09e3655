"""Held-out evaluation of base vs adapted model through the external harness.

The adapter never re-implements reward math or prompt rendering. Instead it
serves each model variant behind the local chat-completions endpoint and
drives the evaluation harness command-line (`signals --source llm` followed
by `backtest`), exactly the way any other model would be scored. The mean
reward is read back from the harness's own backtest report.

A leakage guard rejects evaluation sets that intersect the event ids the
adapter was trained on (recorded in the adapter's metadata).
"""

from __future__ import annotations

import json
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .errors import AdapterError, EvalLeakageError, HarnessInvocationError
from .feedback import load_feedback
from .model import build_base_model
from .serving import AdapterServer
from .training import load_trained_model, read_metadata

DEFAULT_HARNESS_CMD = (sys.executable, "-m", "rlmf_harness.cli")


@dataclass(frozen=True)
class RewardSettings:
    """Optional overrides for the harness's reward flags."""

    signal_strength: int | None = None
    tau: int | None = None
    theta: float | None = None
    beta: float | None = None

    def to_flags(self) -> list[str]:
        flags: list[str] = []
        if self.signal_strength is not None:
            flags += ["--signal-strength", str(self.signal_strength)]
        if self.tau is not None:
            flags += ["--tau", str(self.tau)]
        if self.theta is not None:
            flags += ["--theta", str(self.theta)]
        if self.beta is not None:
            flags += ["--beta", str(self.beta)]
        return flags


@dataclass(frozen=True)
class VariantResult:
    mean_reward: float
    scored_events: int
    trade_counts: dict


@dataclass(frozen=True)
class EvalReport:
    base: VariantResult
    adapted: VariantResult
    eval_events: int
    base_model: str

    @property
    def improvement(self) -> float:
        return self.adapted.mean_reward - self.base.mean_reward

    def to_dict(self) -> dict:
        return {
            "base_model": self.base_model,
            "eval_events": self.eval_events,
            "base": {
                "mean_reward": self.base.mean_reward,
                "scored_events": self.base.scored_events,
                "trade_counts": self.base.trade_counts,
            },
            "adapted": {
                "mean_reward": self.adapted.mean_reward,
                "scored_events": self.adapted.scored_events,
                "trade_counts": self.adapted.trade_counts,
            },
            "improvement": self.improvement,
        }


def read_event_ids(events_path: str | Path) -> list[str]:
    """Event ids from an aligned-events JSONL file (id order preserved)."""
    path = Path(events_path)
    if not path.exists():
        raise AdapterError(f"events file not found: {path}")
    ids: list[str] = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AdapterError(f"{path}:{line_no}: invalid JSON: {exc.msg}")
            if not isinstance(record, dict) or not isinstance(record.get("id"), str):
                raise AdapterError(f"{path}:{line_no}: missing string key 'id'")
            ids.append(record["id"])
    return ids


def check_leakage(train_event_ids, eval_event_ids) -> None:
    overlap = sorted(set(train_event_ids) & set(eval_event_ids))
    if overlap:
        shown = ", ".join(repr(i) for i in overlap[:3])
        raise EvalLeakageError(
            f"{len(overlap)} evaluation event(s) were used for adapter training, "
            f"e.g. [{shown}]"
        )


def _run_harness(cmd: list[str], step: str) -> subprocess.CompletedProcess:
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode == 2:
        raise HarnessInvocationError(
            f"harness {step} produced an empty result: {proc.stderr.strip() or proc.stdout.strip()}"
        )
    if proc.returncode != 0:
        detail = proc.stderr.strip() or proc.stdout.strip()
        raise HarnessInvocationError(
            f"harness {step} exited with code {proc.returncode}: {detail[-500:]}"
        )
    return proc


def mean_reward_from_report(report_path: str | Path) -> tuple[float, dict]:
    """Mean per-event reward from a harness backtest report."""
    path = Path(report_path)
    if not path.exists():
        raise HarnessInvocationError(f"backtest report not found: {path}")
    report = json.loads(path.read_text(encoding="utf-8"))
    try:
        total_reward = float(report["total_reward"])
        trade_counts = dict(report["trade_counts"])
    except (KeyError, TypeError, ValueError) as exc:
        raise HarnessInvocationError(f"unreadable backtest report {path}: {exc}")
    n_trades = sum(int(v) for v in trade_counts.values())
    if n_trades == 0:
        raise HarnessInvocationError(f"backtest report {path} contains no trades")
    return total_reward / n_trades, trade_counts


def _count_lines(path: Path) -> int:
    with path.open("r", encoding="utf-8") as fh:
        return sum(1 for line in fh if line.strip())


def _score_variant(model, model_name: str, variant: str, eval_events: Path,
                   work: Path, harness_cmd: list[str], reward: RewardSettings,
                   max_parallel: int, request_timeout: float) -> VariantResult:
    signals_path = work / f"signals_{variant}.jsonl"
    backtest_dir = work / f"backtest_{variant}"
    with AdapterServer(model, model_name) as server:
        _run_harness(
            [*harness_cmd, "signals",
             "--events", str(eval_events),
             "--source", "llm",
             "--endpoint", server.url,
             "--model", model_name,
             "--max-parallel", str(max_parallel),
             "--request-timeout", str(request_timeout),
             "--out", str(signals_path)],
            step=f"signals({variant})",
        )
    _run_harness(
        [*harness_cmd, "backtest",
         "--events", str(eval_events),
         "--signals", str(signals_path),
         "--out-dir", str(backtest_dir),
         *reward.to_flags()],
        step=f"backtest({variant})",
    )
    mean_reward, trade_counts = mean_reward_from_report(backtest_dir / "report.json")
    return VariantResult(
        mean_reward=mean_reward,
        scored_events=_count_lines(signals_path),
        trade_counts=trade_counts,
    )


def evaluate_adapter(
    adapter_dir: str | Path,
    eval_events_path: str | Path,
    *,
    eval_feedback_path: str | Path | None = None,
    harness_cmd: list[str] | tuple[str, ...] | None = None,
    reward: RewardSettings = RewardSettings(),
    work_dir: str | Path | None = None,
    out_path: str | Path | None = None,
    max_parallel: int = 2,
    request_timeout: float = 30.0,
) -> EvalReport:
    """Score base and adapted models on held-out events via the harness.

    `eval_events_path` is the harness's aligned-events JSONL for the
    evaluation period; `eval_feedback_path` optionally names a feedback
    file whose event ids are included in the leakage check. Artifacts
    (signal files, backtest reports) go to `work_dir` when given, else to
    a temporary directory that is removed afterwards.
    """
    adapter_dir = Path(adapter_dir)
    eval_events = Path(eval_events_path)
    metadata = read_metadata(adapter_dir)
    event_ids = read_event_ids(eval_events)
    if not event_ids:
        raise AdapterError(f"no events to evaluate in {eval_events}")
    leakage_ids = set(event_ids)
    if eval_feedback_path is not None:
        leakage_ids |= {example.event_id for example in load_feedback(eval_feedback_path)}
    check_leakage(metadata.get("train_event_ids", []), leakage_ids)

    harness = list(harness_cmd) if harness_cmd else list(DEFAULT_HARNESS_CMD)
    cleanup = work_dir is None
    work = Path(work_dir) if work_dir is not None else Path(tempfile.mkdtemp(prefix="adapter-eval-"))
    work.mkdir(parents=True, exist_ok=True)
    try:
        base_model = build_base_model(metadata["base_model"])
        base = _score_variant(base_model, metadata["base_model"], "base",
                              eval_events, work, harness, reward,
                              max_parallel, request_timeout)
        adapted_model, _ = load_trained_model(adapter_dir)
        adapted = _score_variant(adapted_model, f"{metadata['base_model']}+adapter",
                                 "adapted", eval_events, work, harness, reward,
                                 max_parallel, request_timeout)
    finally:
        if cleanup:
            shutil.rmtree(work, ignore_errors=True)

    report = EvalReport(
        base=base,
        adapted=adapted,
        eval_events=len(event_ids),
        base_model=metadata["base_model"],
    )
    if out_path is not None:
        Path(out_path).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    return report
