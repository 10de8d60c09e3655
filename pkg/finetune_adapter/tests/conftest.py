"""Shared fixtures for the fine-tune adapter test suite.

The planted corpus used here is intentionally tiny: two headline templates
whose wording determines the sign of the forward move, so a model that
reads the prompt can recover the target score's sign, and one that does
not cannot beat a coin flip.
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from finetune_adapter import FeedbackExample, TrainingConfig, train_adapter

POSITIVE_TEXT = "reports record quarterly profit and raises full-year outlook"
NEGATIVE_TEXT = "announces layoffs amid weakening demand and cuts guidance"


def _planted_examples(count: int, noise_every: int = 5) -> list[FeedbackExample]:
    """Alternating up/down examples; every noise_every-th is sign-flipped.

    Flipped examples carry a negative reward, so their training weight is
    the epsilon floor — reward weighting is expected to silence them.
    """
    examples = []
    for i in range(count):
        positive = i % 2 == 0
        text = POSITIVE_TEXT if positive else NEGATIVE_TEXT
        ticker = f"TK{i % 7:02d}"
        prompt = (
            f"Headline ({ticker}, 2021-03-{(i % 28) + 1:02d}): "
            f"{ticker} {text}. Respond with one integer from -10 to 10."
        )
        score = 8 if positive else -8
        reward = 0.04
        if noise_every and i % noise_every == noise_every - 1:
            score = -score
            reward = -0.02
        examples.append(
            FeedbackExample(
                event_id=f"{ticker}-{i:03d}",
                prompt=prompt,
                target_score=score,
                action="long" if score > 0 else "short",
                forward_return=0.05 if positive else -0.05,
                reward=reward,
            )
        )
    return examples


@pytest.fixture
def planted_examples():
    """Factory for planted feedback examples of a requested size."""
    return _planted_examples


@pytest.fixture
def feedback_record():
    """Factory for one schema-valid feedback record as a plain dict."""

    def make(i: int = 0, **overrides) -> dict:
        record = {
            "event_id": f"EV-{i:03d}",
            "prompt": f"Headline {i}: example company {POSITIVE_TEXT}.",
            "score": 8,
            "action": "long",
            "forward_return": 0.05,
            "reward": 0.04,
        }
        record.update(overrides)
        return record

    return make


@pytest.fixture
def write_jsonl(tmp_path):
    """Write rows (dicts or raw strings) to a JSONL file under tmp_path."""

    def write(rows, name: str = "feedback.jsonl") -> Path:
        path = tmp_path / name
        lines = [row if isinstance(row, str) else json.dumps(row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write


@pytest.fixture(scope="session")
def trained_adapter(tmp_path_factory):
    """One shared 3-epoch training run on 20 planted examples.

    Returns (adapter_dir, examples, result). Session-scoped because several
    modules only need *a* trained adapter, not their own.
    """
    out_dir = tmp_path_factory.mktemp("adapter")
    examples = _planted_examples(20)
    result = train_adapter(examples, out_dir, TrainingConfig())
    return out_dir, examples, result
