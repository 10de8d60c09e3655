"""Exception types shared across the harness."""

from __future__ import annotations


class HarnessError(Exception):
    """Base class for every error the pipeline raises on purpose."""


class MalformedInputError(HarnessError):
    """An input file violates its schema. Carries the offending location."""

    def __init__(self, path, line: int | None, reason: str):
        self.path = str(path)
        self.line = line
        self.reason = reason
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {reason}")


class InvalidConfigError(HarnessError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid config: " + "; ".join(self.violations))


class UnparseableOutputError(HarnessError):
    """Model output contained no integer token. Keeps the raw text for audit."""

    def __init__(self, raw_output: str):
        self.raw_output = raw_output
        super().__init__(f"no integer sentiment score in model output: {raw_output!r}")


class EndpointError(HarnessError):
    """The completion endpoint failed after retries or returned garbage."""


class JoinMismatchError(HarnessError):
    """Two inputs that must join by event_id are out of sync."""


class LeakageError(HarnessError):
    """Evaluation data intersects the training set a calibration was fit on."""


class ComparisonError(HarnessError):
    """Two reports cannot be compared (mismatched ticker universes)."""
