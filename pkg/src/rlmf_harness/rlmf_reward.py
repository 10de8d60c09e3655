"""Threshold action bands and the confidence-weighted market-feedback reward.

A score above the action threshold goes long, below the negative threshold
goes short, anything in between holds. Directional trades earn the realized
forward return weighted by confidence |score|/S outside a dead band of
minimum movement; holds earn a small flat reward when the market indeed
stayed inside the band and the same penalty when it did not.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import JoinMismatchError
from .market_data import AlignedEvent
from .signal_engine import SentimentSignal

DEFAULT_MOVEMENT_THRESHOLD = 0.01
DEFAULT_HOLD_REWARD = 0.001


class Action(Enum):
    LONG = "long"
    SHORT = "short"
    HOLD = "hold"


@dataclass(frozen=True)
class RewardParams:
    signal_strength: int = 10
    action_threshold: int = 3
    movement_threshold: float = DEFAULT_MOVEMENT_THRESHOLD
    hold_reward: float = DEFAULT_HOLD_REWARD

    def validate(self) -> None:
        if self.signal_strength < 1:
            raise ValueError("signal_strength must be >= 1")
        if not 0 < self.action_threshold < self.signal_strength:
            raise ValueError("action_threshold must satisfy 0 < tau < signal_strength")
        if self.movement_threshold < 0:
            raise ValueError("movement_threshold must be >= 0")
        if self.hold_reward < 0:
            raise ValueError("hold_reward must be >= 0")

    def fingerprint(self) -> str:
        canonical = json.dumps(
            {
                "signal_strength": self.signal_strength,
                "action_threshold": self.action_threshold,
                "movement_threshold": self.movement_threshold,
                "hold_reward": self.hold_reward,
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RewardRecord:
    event_id: str
    score: int
    action: Action
    forward_return: float
    reward: float
    config_fingerprint: str


@dataclass(frozen=True)
class BatchRewardResult:
    records: list[RewardRecord]
    reward_sum: float
    mean_reward: float | None  # None when the batch is empty
    action_counts: dict[str, int]


def map_action(score: int, action_threshold: int) -> Action:
    """Band mapping; the |score| == threshold boundary is inclusive to Hold."""
    if score > action_threshold:
        return Action.LONG
    if score < -action_threshold:
        return Action.SHORT
    return Action.HOLD


def compute_reward(score: int, params: RewardParams, forward_return: float) -> float:
    """Confidence-weighted reward of acting on `score` given the realized return."""
    params.validate()
    if abs(score) > params.signal_strength:
        raise ValueError(
            f"score {score} outside [-{params.signal_strength}, {params.signal_strength}]"
        )
    if not math.isfinite(forward_return):
        raise ValueError("forward_return must be finite")
    action = map_action(score, params.action_threshold)
    r = forward_return
    strong_move = abs(r) >= params.movement_threshold
    if action is Action.HOLD:
        return -params.hold_reward if strong_move else params.hold_reward
    confidence = abs(score) / params.signal_strength
    if not strong_move:
        return 0.0
    return confidence * r if action is Action.LONG else -confidence * r


def batch_rewards(
    signals: list[SentimentSignal],
    events: list[AlignedEvent],
    params: RewardParams,
) -> BatchRewardResult:
    """Join signals to events by event_id and score every pair."""
    params.validate()
    by_id = {e.headline.id: e for e in events}
    fingerprint = params.fingerprint()
    records = []
    counts = {"long": 0, "short": 0, "hold": 0}
    for signal in signals:
        event = by_id.get(signal.event_id)
        if event is None:
            raise JoinMismatchError(
                f"signal event_id {signal.event_id!r} has no matching event"
            )
        action = map_action(signal.score, params.action_threshold)
        reward = compute_reward(signal.score, params, event.forward_return)
        counts[action.value] += 1
        records.append(
            RewardRecord(
                event_id=signal.event_id,
                score=signal.score,
                action=action,
                forward_return=event.forward_return,
                reward=reward,
                config_fingerprint=fingerprint,
            )
        )
    reward_sum = sum(r.reward for r in records)
    mean_reward = reward_sum / len(records) if records else None
    return BatchRewardResult(
        records=records,
        reward_sum=reward_sum,
        mean_reward=mean_reward,
        action_counts=counts,
    )


def record_to_dict(record: RewardRecord) -> dict:
    return {
        "event_id": record.event_id,
        "score": record.score,
        "action": record.action.value,
        "forward_return": record.forward_return,
        "reward": record.reward,
        "config_fingerprint": record.config_fingerprint,
    }


def write_records_jsonl(records: list[RewardRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record)) + "\n")
