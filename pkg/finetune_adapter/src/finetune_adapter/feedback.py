"""Loading of reward-annotated feedback records.

The input contract is a JSONL file where each line carries the outcome of
one scored event:

    {"event_id": str, "prompt": str, "score": int, "action": str,
     "forward_return": float, "reward": float}

Each record becomes a supervised example: the prompt is the model input,
the integer score is the training target, and the reward determines the
example's training weight. Weights never go negative — a penalized example
is de-emphasized, not anti-trained — and never reach exactly zero, so
every example keeps a live gradient path:

    weight = max(reward, 0) + 1e-6
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import FeedbackFormatError

WEIGHT_EPSILON = 1e-6

VALID_ACTIONS = frozenset({"long", "short", "hold"})

_REQUIRED_KEYS = ("event_id", "prompt", "score", "action", "forward_return", "reward")


@dataclass(frozen=True)
class FeedbackExample:
    """One supervised fine-tuning example derived from a feedback record."""

    event_id: str
    prompt: str
    target_score: int
    action: str
    forward_return: float
    reward: float

    @property
    def weight(self) -> float:
        return max(self.reward, 0.0) + WEIGHT_EPSILON


def _require_number(record: dict, key: str):
    value = record[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"key {key!r} must be a number, got {type(value).__name__}")
    return float(value)


def parse_feedback_record(record: object) -> FeedbackExample:
    """Convert one decoded JSON object into a FeedbackExample.

    Raises ValueError with a key-specific message on any schema violation.
    """
    if not isinstance(record, dict):
        raise ValueError(f"expected a JSON object, got {type(record).__name__}")
    for key in _REQUIRED_KEYS:
        if key not in record:
            raise ValueError(f"missing key {key!r}")
    if not isinstance(record["event_id"], str) or not record["event_id"]:
        raise ValueError("key 'event_id' must be a non-empty string")
    if not isinstance(record["prompt"], str) or not record["prompt"]:
        raise ValueError("key 'prompt' must be a non-empty string")
    score = record["score"]
    if isinstance(score, bool) or not isinstance(score, int):
        raise ValueError(f"key 'score' must be an integer, got {type(score).__name__}")
    action = record["action"]
    if action not in VALID_ACTIONS:
        raise ValueError(f"key 'action' must be one of {sorted(VALID_ACTIONS)}, got {action!r}")
    forward_return = _require_number(record, "forward_return")
    reward = _require_number(record, "reward")
    return FeedbackExample(
        event_id=record["event_id"],
        prompt=record["prompt"],
        target_score=score,
        action=action,
        forward_return=forward_return,
        reward=reward,
    )


def load_feedback(path: str | Path) -> list[FeedbackExample]:
    """Load feedback records from a JSONL file, one example per line.

    Schema violations are rejected with the offending line number.
    """
    path = Path(path)
    if not path.exists():
        raise FeedbackFormatError(path, None, "file not found")
    examples: list[FeedbackExample] = []
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FeedbackFormatError(path, line_no, f"invalid JSON: {exc.msg}")
            try:
                example = parse_feedback_record(record)
            except ValueError as exc:
                raise FeedbackFormatError(path, line_no, str(exc))
            if example.event_id in seen_ids:
                raise FeedbackFormatError(
                    path, line_no, f"duplicate event_id {example.event_id!r}"
                )
            seen_ids.add(example.event_id)
            examples.append(example)
    return examples
