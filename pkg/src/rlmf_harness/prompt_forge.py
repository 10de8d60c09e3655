"""Sentiment-scoring prompt construction.

The prompt asks for a single integer in [-S, S], anchored by five labelled
score levels, optional market-feedback instructions, few-shot examples, the
headline under analysis, and a window of recent closes. Rendering is a pure
function of (config, headline, price context) so any two runs with equal
inputs produce byte-equal prompts.
"""

from __future__ import annotations

import hashlib
import json
import re
import sys
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from .errors import InvalidConfigError
from .market_data import Headline

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MAX_PRICE_CONTEXT_DAYS = 30

CONTEXT_SENTENCE = (
    "Task: Analyze the stock-related news headline and output a sentiment score "
    "reflecting the sentiment's potential impact on stock performance."
)

FEEDBACK_LINES = [
    "Past Market Responses: Incorporate past market responses to similar news events.",
    "Market Sentiment Alignment: Evaluate if the news aligns with or contradicts "
    "prevailing market sentiment.",
    "Historical Price Patterns: Analyze the historical impact of similar news on "
    "stock prices.",
]

DEFAULT_FEW_SHOT = [
    ("Company X announces layoffs amid economic downturn.", -8),
    ("Company Y reports record revenue growth in Q1.", 7),
    ("Market responds positively to Company Z's new product launch.", 5),
]

ANCHOR_RE = re.compile(r"^(-?\d+):", re.MULTILINE)


@dataclass(frozen=True)
class PromptConfig:
    signal_strength: int = 10
    threshold: int = 3
    few_shot_examples: tuple[tuple[str, int], ...] = field(
        default_factory=lambda: tuple(DEFAULT_FEW_SHOT)
    )
    include_market_feedback: bool = True
    price_context_days: int = 5

    def fingerprint(self) -> str:
        canonical = json.dumps(
            {
                "signal_strength": self.signal_strength,
                "threshold": self.threshold,
                "few_shot_examples": [list(p) for p in self.few_shot_examples],
                "include_market_feedback": self.include_market_feedback,
                "price_context_days": self.price_context_days,
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class PromptText:
    body: str
    config_fingerprint: str


def default_config() -> PromptConfig:
    return PromptConfig()


def validate_config(config: PromptConfig) -> list[str]:
    """Return every violated invariant; an empty list means the config is valid."""
    violations = []
    if config.signal_strength < 1:
        violations.append("signal_strength must be a positive integer")
    if config.threshold < 1:
        violations.append("threshold must be a positive integer")
    elif config.threshold >= config.signal_strength:
        violations.append("threshold must be < signal_strength")
    for i, (text, score) in enumerate(config.few_shot_examples):
        if not text.strip():
            violations.append(f"few-shot example {i} has empty text")
        if abs(score) > config.signal_strength:
            violations.append(
                f"few-shot example {i} ({text!r}) score {score} outside "
                f"[-{config.signal_strength}, {config.signal_strength}]"
            )
    if not 0 <= config.price_context_days <= MAX_PRICE_CONTEXT_DAYS:
        violations.append(
            f"price_context_days must be in [0, {MAX_PRICE_CONTEXT_DAYS}]"
        )
    return violations


def render_prompt(
    config: PromptConfig,
    headline: Headline,
    price_context: list[tuple[date, float]],
) -> PromptText:
    """Render the scoring prompt. Price context lines are newest last."""
    violations = validate_config(config)
    if violations:
        raise InvalidConfigError(violations)
    if len(price_context) > config.price_context_days:
        raise ValueError(
            f"price context has {len(price_context)} entries, config allows "
            f"{config.price_context_days}"
        )
    s, tau = config.signal_strength, config.threshold
    sections: list[str] = []
    sections.append("[CONTEXT]\n" + CONTEXT_SENTENCE)
    sections.append(
        "[SENTIMENT SCORING PARAMETERS]\n"
        f"-{s}: Highly negative market sentiment\n"
        f"-{tau}: Moderately negative market sentiment\n"
        "0: Neutral market sentiment\n"
        f"{tau}: Moderately positive sentiment\n"
        f"{s}: Highly positive sentiment"
    )
    if config.include_market_feedback:
        sections.append("[MARKET FEEDBACK CONSIDERATIONS]\n" + "\n".join(FEEDBACK_LINES))
    if config.few_shot_examples:
        example_lines = [
            f'"{text}" Sentiment Score: {score}'
            for text, score in config.few_shot_examples
        ]
        sections.append("[SENTIMENT SCORING EXAMPLES]\n" + "\n".join(example_lines))
    sections.append(
        "[NEWS HEADLINE]\n"
        f"{headline.ticker} ({headline.timestamp.date().isoformat()}): {headline.text}"
    )
    if price_context:
        price_lines = [f"{d.isoformat()}: {close}" for d, close in price_context]
        sections.append("[PRICE DATA]\n" + "\n".join(price_lines))
    sections.append(
        f"[OUTPUT]\nInteger sentiment score in range [-{s}, {s}] based on analysis."
    )
    return PromptText(body="\n\n".join(sections), config_fingerprint=config.fingerprint())


def scan_anchor_values(body: str) -> list[int]:
    """Recover the anchor score levels from a rendered prompt body."""
    return [int(m) for m in ANCHOR_RE.findall(body)]


def save_config_toml(config: PromptConfig, path: str | Path) -> None:
    lines = [
        f"signal_strength = {config.signal_strength}",
        f"threshold = {config.threshold}",
        f"include_market_feedback = {'true' if config.include_market_feedback else 'false'}",
        f"price_context_days = {config.price_context_days}",
    ]
    for text, score in config.few_shot_examples:
        lines += ["", "[[few_shot_examples]]", f"text = {json.dumps(text)}", f"score = {score}"]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_config_toml(path: str | Path) -> PromptConfig:
    with Path(path).open("rb") as fh:
        payload = tomllib.load(fh)
    examples = tuple(
        (entry["text"], int(entry["score"]))
        for entry in payload.get("few_shot_examples", [])
    )
    config = PromptConfig(
        signal_strength=int(payload["signal_strength"]),
        threshold=int(payload["threshold"]),
        few_shot_examples=examples,
        include_market_feedback=bool(payload.get("include_market_feedback", True)),
        price_context_days=int(payload.get("price_context_days", 5)),
    )
    violations = validate_config(config)
    if violations:
        raise InvalidConfigError(violations)
    return config
