"""Grid calibration of reward thresholds and feedback-dataset export.

The adjustable surface is (action threshold, movement threshold, hold
reward); every grid point is scored by mean reward over the training events
and the argmax wins with deterministic ties (smallest tau, then theta, then
beta). Calibrated parameters may only touch held-out data through a guard
that rejects any event overlap with the training set.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Mapping

from .backtester import BacktestReport, run_backtest
from .errors import JoinMismatchError, LeakageError
from .market_data import AlignedEvent
from .prompt_forge import PromptText
from .rlmf_reward import Action, RewardParams, RewardRecord, batch_rewards
from .signal_engine import SentimentSignal


@dataclass(frozen=True)
class CalibrationGrid:
    tau_values: tuple[int, ...] = (1, 2, 3, 4, 5)
    theta_values: tuple[float, ...] = (0.0, 0.005, 0.01, 0.02, 0.05)
    beta_values: tuple[float, ...] = (0.0, 0.001)

    def validate(self, signal_strength: int) -> None:
        if not (self.tau_values and self.theta_values and self.beta_values):
            raise ValueError("grid axes must be non-empty")
        for tau in self.tau_values:
            if not 0 < tau < signal_strength:
                raise ValueError(f"tau {tau} outside (0, {signal_strength})")
        if any(theta < 0 for theta in self.theta_values):
            raise ValueError("theta values must be >= 0")
        if any(beta < 0 for beta in self.beta_values):
            raise ValueError("beta values must be >= 0")

    def points(self, signal_strength: int) -> list[RewardParams]:
        return [
            RewardParams(
                signal_strength=signal_strength,
                action_threshold=tau,
                movement_threshold=theta,
                hold_reward=beta,
            )
            for tau, theta, beta in product(
                self.tau_values, self.theta_values, self.beta_values
            )
        ]


@dataclass(frozen=True)
class SurfacePoint:
    params: RewardParams
    mean_reward: float
    win_rate: float | None


@dataclass(frozen=True)
class CalibrationResult:
    best_params: RewardParams
    best_mean_reward: float
    full_surface: list[SurfacePoint]
    train_fingerprint: str
    train_event_ids: tuple[str, ...]


def fingerprint_events(events: list[AlignedEvent]) -> str:
    ids = sorted(e.headline.id for e in events)
    return hashlib.sha256("\n".join(ids).encode("utf-8")).hexdigest()


def _surface_win_rate(records: list[RewardRecord]) -> float | None:
    directional = [r for r in records if r.action is not Action.HOLD]
    if not directional:
        return None
    wins = sum(
        1
        for r in directional
        if (r.action is Action.LONG and r.forward_return > 0)
        or (r.action is Action.SHORT and r.forward_return < 0)
    )
    return wins / len(directional)


def grid_calibrate(
    train_events: list[AlignedEvent],
    train_signals: list[SentimentSignal],
    grid: CalibrationGrid,
    signal_strength: int,
) -> CalibrationResult:
    """Exhaustively score the grid on training data and return the argmax."""
    grid.validate(signal_strength)
    if not train_events or not train_signals:
        raise ValueError("empty training set")
    surface: list[SurfacePoint] = []
    for params in grid.points(signal_strength):
        batch = batch_rewards(train_signals, train_events, params)
        if batch.mean_reward is None:
            raise ValueError("empty training set")
        surface.append(
            SurfacePoint(
                params=params,
                mean_reward=batch.mean_reward,
                win_rate=_surface_win_rate(batch.records),
            )
        )
    best = min(
        surface,
        key=lambda p: (
            -p.mean_reward,
            p.params.action_threshold,
            p.params.movement_threshold,
            p.params.hold_reward,
        ),
    )
    return CalibrationResult(
        best_params=best.params,
        best_mean_reward=best.mean_reward,
        full_surface=surface,
        train_fingerprint=fingerprint_events(train_events),
        train_event_ids=tuple(sorted(e.headline.id for e in train_events)),
    )


def evaluate_params(
    eval_events: list[AlignedEvent],
    eval_signals: list[SentimentSignal],
    calibration: CalibrationResult,
    params: RewardParams | None = None,
) -> tuple[float | None, BacktestReport]:
    """Held-out evaluation under calibrated parameters.

    The calibration's training event set must be disjoint from the eval set;
    any overlap is a leakage error, not a warning.
    """
    train_ids = set(calibration.train_event_ids)
    overlap = sorted(
        e.headline.id for e in eval_events if e.headline.id in train_ids
    )
    if overlap:
        raise LeakageError(
            f"{len(overlap)} eval event(s) appear in the calibration training set, "
            f"e.g. {overlap[:5]}"
        )
    chosen = params if params is not None else calibration.best_params
    batch = batch_rewards(eval_signals, eval_events, chosen)
    report = run_backtest(eval_signals, eval_events, chosen)
    return batch.mean_reward, report


def export_feedback(
    records: list[RewardRecord],
    prompts: Mapping[str, PromptText],
    path: str | Path,
) -> int:
    """Write reward-annotated feedback records as JSONL, sorted by event_id.

    `prompts` maps event_id to the exact prompt text the score was produced
    from. Every record must have a prompt; a miss is a join error.
    """
    rows = []
    for record in sorted(records, key=lambda r: r.event_id):
        prompt = prompts.get(record.event_id)
        if prompt is None:
            raise JoinMismatchError(
                f"record {record.event_id!r} has no matching prompt"
            )
        rows.append(
            {
                "event_id": record.event_id,
                "prompt": prompt.body,
                "score": record.score,
                "action": record.action.value,
                "forward_return": record.forward_return,
                "reward": record.reward,
            }
        )
    with Path(path).open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return len(rows)


def _params_to_dict(params: RewardParams) -> dict:
    return {
        "signal_strength": params.signal_strength,
        "action_threshold": params.action_threshold,
        "movement_threshold": params.movement_threshold,
        "hold_reward": params.hold_reward,
    }


def _params_from_dict(payload: dict) -> RewardParams:
    return RewardParams(
        signal_strength=int(payload["signal_strength"]),
        action_threshold=int(payload["action_threshold"]),
        movement_threshold=float(payload["movement_threshold"]),
        hold_reward=float(payload["hold_reward"]),
    )


def calibration_to_dict(result: CalibrationResult) -> dict:
    return {
        "best_params": _params_to_dict(result.best_params),
        "best_mean_reward": result.best_mean_reward,
        "full_surface": [
            {
                "params": _params_to_dict(point.params),
                "mean_reward": point.mean_reward,
                "win_rate": point.win_rate,
            }
            for point in result.full_surface
        ],
        "train_fingerprint": result.train_fingerprint,
        "train_event_ids": list(result.train_event_ids),
    }


def calibration_from_dict(payload: dict) -> CalibrationResult:
    return CalibrationResult(
        best_params=_params_from_dict(payload["best_params"]),
        best_mean_reward=float(payload["best_mean_reward"]),
        full_surface=[
            SurfacePoint(
                params=_params_from_dict(point["params"]),
                mean_reward=float(point["mean_reward"]),
                win_rate=None if point["win_rate"] is None else float(point["win_rate"]),
            )
            for point in payload["full_surface"]
        ],
        train_fingerprint=payload["train_fingerprint"],
        train_event_ids=tuple(payload["train_event_ids"]),
    )


def write_calibration_json(result: CalibrationResult, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(calibration_to_dict(result), fh, indent=2)
        fh.write("\n")


def read_calibration_json(path: str | Path) -> CalibrationResult:
    with Path(path).open(encoding="utf-8") as fh:
        return calibration_from_dict(json.load(fh))
