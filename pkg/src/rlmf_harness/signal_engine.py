"""Pluggable sentiment-signal sources and raw-output normalization.

Three sources produce integer scores for aligned events: an OpenAI-compatible
chat-completions endpoint, a deterministic replay file (the canonical
experiment medium), and a fixed-lexicon baseline. All of them emit validated
SentimentSignal values; events that cannot be scored land in an error tally
instead of being guessed.
"""

from __future__ import annotations

import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import requests

from .errors import EndpointError, MalformedInputError, UnparseableOutputError
from .market_data import AlignedEvent, PriceSeries
from .prompt_forge import PromptConfig, PromptText, render_prompt

ENDPOINT_ENV = "RLMF_LLM_ENDPOINT"
API_KEY_ENV = "RLMF_LLM_API_KEY"
COMPLETIONS_PATH = "/v1/chat/completions"

_INT_TOKEN_RE = re.compile(r"[-+]?\d+")

# Retry knobs for the LLM client (module-level so tests can shrink the waits).
MAX_ATTEMPTS = 3
RETRY_BACKOFF_SECONDS = 0.25

BULLISH_TERMS = frozenset({
    "beat", "beats", "boom", "boost", "boosts", "breakthrough", "bullish",
    "climb", "climbs", "expand", "expands", "expansion", "gain", "gains",
    "growth", "high", "jump", "jumps", "momentum", "optimistic", "outperform",
    "outperforms", "profit", "profitable", "rally", "rallies", "rebound",
    "rebounds", "record", "robust", "soar", "soars", "strong", "surge",
    "surges", "upbeat", "upgrade", "upgraded", "win", "wins",
})

BEARISH_TERMS = frozenset({
    "bankruptcy", "bearish", "concern", "concerns", "crash", "crashes", "cut",
    "cuts", "decline", "declines", "default", "downgrade", "downgraded",
    "downturn", "drop", "drops", "fall", "falls", "fear", "fears", "fraud",
    "investigation", "lawsuit", "layoff", "layoffs", "loss", "losses", "miss",
    "misses", "plunge", "plunges", "probe", "recall", "recession", "slump",
    "slumps", "tumble", "tumbles", "warning", "weak",
})

_WORD_RE = re.compile(r"[a-z]+")


@dataclass(frozen=True)
class SentimentSignal:
    event_id: str
    score: int
    raw_output: str
    source_tag: str  # llm | replay | baseline
    clamped: bool


@dataclass(frozen=True)
class SignalSourceSpec:
    kind: str  # llm | replay | baseline
    endpoint: str | None = None
    model_name: str | None = None
    replay_path: Path | None = None
    request_timeout: float = 30.0
    max_parallel: int = 4

    @classmethod
    def llm(cls, endpoint: str, model_name: str, request_timeout: float = 30.0,
            max_parallel: int = 4) -> "SignalSourceSpec":
        return cls(kind="llm", endpoint=endpoint, model_name=model_name,
                   request_timeout=request_timeout, max_parallel=max_parallel)

    @classmethod
    def replay(cls, replay_path: str | Path) -> "SignalSourceSpec":
        return cls(kind="replay", replay_path=Path(replay_path))

    @classmethod
    def baseline(cls) -> "SignalSourceSpec":
        return cls(kind="baseline")

    def validate(self) -> None:
        if self.kind not in ("llm", "replay", "baseline"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        llm_fields = (self.endpoint, self.model_name)
        if self.kind == "llm":
            if not all(llm_fields) or self.replay_path is not None:
                raise ValueError("llm source needs endpoint and model_name only")
        elif self.kind == "replay":
            if self.replay_path is None or any(llm_fields):
                raise ValueError("replay source needs replay_path only")
        else:
            if self.replay_path is not None or any(llm_fields):
                raise ValueError("baseline source takes no endpoint or replay fields")


@dataclass(frozen=True)
class GenerationResult:
    signals: list[SentimentSignal]
    failures: list[tuple[str, str]]  # (event_id, reason)


def parse_score(raw_output: str, signal_strength: int) -> tuple[int, bool]:
    """Extract the first signed integer token, clamping to [-S, S].

    Returns (score, clamped). Raises UnparseableOutputError when the text
    contains no integer token at all.
    """
    if signal_strength < 1:
        raise ValueError("signal_strength must be >= 1")
    match = _INT_TOKEN_RE.search(raw_output)
    if match is None:
        raise UnparseableOutputError(raw_output)
    value = int(match.group())
    if value > signal_strength:
        return signal_strength, True
    if value < -signal_strength:
        return -signal_strength, True
    return value, False


def baseline_score(headline, signal_strength: int) -> int:
    """Fixed-lexicon score: (bullish hits - bearish hits) * 2, clipped to [-S, S]."""
    if signal_strength < 1:
        raise ValueError("signal_strength must be >= 1")
    tokens = _WORD_RE.findall(headline.text.lower())
    diff = sum(1 for t in tokens if t in BULLISH_TERMS) - sum(
        1 for t in tokens if t in BEARISH_TERMS
    )
    return max(-signal_strength, min(signal_strength, 2 * diff))


def _completions_url(endpoint: str) -> str:
    base = endpoint.rstrip("/")
    if base.endswith(COMPLETIONS_PATH.rstrip("/")):
        return base
    return base + COMPLETIONS_PATH


def llm_complete(spec: SignalSourceSpec, prompt: PromptText) -> str:
    """Send one prompt to the chat-completions endpoint at temperature 0.

    Failures (connection errors, timeouts, non-2xx) are retried with
    exponential backoff up to MAX_ATTEMPTS total tries.
    """
    if spec.kind != "llm":
        raise ValueError("llm_complete requires an llm source spec")
    url = _completions_url(spec.endpoint)
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(API_KEY_ENV)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    payload = {
        "model": spec.model_name,
        "messages": [{"role": "user", "content": prompt.body}],
        "temperature": 0,
    }
    last_error = "unknown"
    for attempt in range(MAX_ATTEMPTS):
        if attempt:
            time.sleep(RETRY_BACKOFF_SECONDS * 2 ** (attempt - 1))
        try:
            response = requests.post(
                url, json=payload, headers=headers, timeout=spec.request_timeout
            )
        except requests.RequestException as exc:
            last_error = f"request failed: {exc}"
            continue
        if response.status_code // 100 == 2:
            try:
                body = response.json()
                content = body["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise EndpointError(f"malformed completion envelope from {url}: {exc}")
            if not isinstance(content, str):
                raise EndpointError(f"non-text completion content from {url}")
            return content
        last_error = f"HTTP {response.status_code}"
    raise EndpointError(
        f"endpoint {url} failed after {MAX_ATTEMPTS} attempts: {last_error}"
    )


def _price_context(
    prices: PriceSeries | None, event: AlignedEvent, days: int
) -> list[tuple]:
    if not prices or days <= 0:
        return []
    bars = prices.get(event.headline.ticker, [])
    window = [b for b in bars if b.date <= event.entry_date]
    return [(b.date, b.close) for b in window[-days:]]


def _read_replay(path: Path, signal_strength: int) -> dict[str, dict]:
    if not path.exists():
        raise MalformedInputError(path, None, "replay file not found")
    records: dict[str, dict] = {}
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                event_id = record["event_id"]
                score = int(record["score"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MalformedInputError(path, line_no, f"bad signal record: {exc}")
            if abs(score) > signal_strength:
                raise MalformedInputError(
                    path, line_no,
                    f"replay score {score} outside [-{signal_strength}, {signal_strength}]",
                )
            records[event_id] = record
    return records


def generate_signals(
    spec: SignalSourceSpec,
    events: list[AlignedEvent],
    config: PromptConfig,
    prices: PriceSeries | None = None,
) -> GenerationResult:
    """Score every event through the configured source.

    One signal per scorable event, in input event order; events that fail
    (missing replay entry, unparseable model output, endpoint failure) are
    tallied with a reason instead. len(signals) + len(failures) always
    equals len(events).
    """
    spec.validate()
    s = config.signal_strength

    if spec.kind == "baseline":
        signals = [
            SentimentSignal(
                event_id=e.headline.id,
                score=baseline_score(e.headline, s),
                raw_output="",
                source_tag="baseline",
                clamped=False,
            )
            for e in events
        ]
        return GenerationResult(signals=signals, failures=[])

    if spec.kind == "replay":
        records = _read_replay(spec.replay_path, s)
        signals, failures = [], []
        for event in events:
            record = records.get(event.headline.id)
            if record is None:
                failures.append((event.headline.id, "missing from replay file"))
                continue
            signals.append(
                SentimentSignal(
                    event_id=event.headline.id,
                    score=int(record["score"]),
                    raw_output=str(record.get("raw_output", "")),
                    source_tag="replay",
                    clamped=bool(record.get("clamped", False)),
                )
            )
        return GenerationResult(signals=signals, failures=failures)

    # llm source: bounded-parallel requests, results reassembled in input order
    def score_one(event: AlignedEvent):
        context = _price_context(prices, event, config.price_context_days)
        prompt = render_prompt(config, event.headline, context)
        try:
            raw = llm_complete(spec, prompt)
        except EndpointError as exc:
            return event.headline.id, None, str(exc)
        try:
            score, clamped = parse_score(raw, s)
        except UnparseableOutputError:
            return event.headline.id, None, f"unparseable output: {raw!r}"
        return event.headline.id, (score, clamped, raw), None

    if events and spec.max_parallel > 1:
        with ThreadPoolExecutor(max_workers=spec.max_parallel) as pool:
            outcomes = list(pool.map(score_one, events))
    else:
        outcomes = [score_one(e) for e in events]

    signals, failures = [], []
    for event_id, result, reason in outcomes:
        if result is None:
            failures.append((event_id, reason))
        else:
            score, clamped, raw = result
            signals.append(
                SentimentSignal(
                    event_id=event_id, score=score, raw_output=raw,
                    source_tag="llm", clamped=clamped,
                )
            )
    return GenerationResult(signals=signals, failures=failures)


def signal_to_dict(signal: SentimentSignal) -> dict:
    return {
        "event_id": signal.event_id,
        "score": signal.score,
        "raw_output": signal.raw_output,
        "source_tag": signal.source_tag,
        "clamped": signal.clamped,
    }


def write_signals_jsonl(signals: list[SentimentSignal], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for signal in signals:
            fh.write(json.dumps(signal_to_dict(signal)) + "\n")


def read_signals_jsonl(path: str | Path, signal_strength: int) -> list[SentimentSignal]:
    path = Path(path)
    if not path.exists():
        raise MalformedInputError(path, None, "file not found")
    signals = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                signal = SentimentSignal(
                    event_id=record["event_id"],
                    score=int(record["score"]),
                    raw_output=str(record.get("raw_output", "")),
                    source_tag=str(record.get("source_tag", "replay")),
                    clamped=bool(record.get("clamped", False)),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MalformedInputError(path, line_no, f"bad signal record: {exc}")
            if abs(signal.score) > signal_strength:
                raise MalformedInputError(
                    path, line_no,
                    f"score {signal.score} outside [-{signal_strength}, {signal_strength}]",
                )
            signals.append(signal)
    return signals
