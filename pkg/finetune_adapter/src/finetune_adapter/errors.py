"""Exception hierarchy for the fine-tuning adapter."""

from __future__ import annotations


class AdapterError(Exception):
    """Base class for all adapter errors."""


class FeedbackFormatError(AdapterError):
    """A feedback JSONL file violates the expected schema."""

    def __init__(self, path, line: int | None, reason: str):
        self.path = str(path)
        self.line = line
        self.reason = reason
        location = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{location}: {reason}")


class ModelNotFoundError(AdapterError):
    """The requested base model is not in the local registry."""


class TrainingConfigError(AdapterError):
    """Training was requested with invalid settings."""


class EndpointStartupError(AdapterError):
    """The local serving endpoint failed to start."""


class HarnessInvocationError(AdapterError):
    """The external evaluation harness exited with an error."""


class EvalLeakageError(AdapterError):
    """Evaluation data overlaps the adapter's training data."""
