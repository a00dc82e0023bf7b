"""Exception types raised across the package."""

from __future__ import annotations


class BplinkError(Exception):
    """Base class for every error raised by this package."""


class NumericFailure(BplinkError):
    """A computation ran out of numeric headroom (CLI exit status 3)."""


class SupportOverflow(NumericFailure):
    """A truncated support grew past the configured cap."""


class LikelihoodUnderflow(NumericFailure):
    """A sampled transition has zero probability under its own kernel."""


class NonFiniteMoment(NumericFailure):
    """A requested moment is infinite or undefined."""


class DegenerateRatio(BplinkError):
    """The closed-form bound is undefined because its growth ratio equals 1."""


class InfeasibleVariance(BplinkError, ValueError):
    """No law on the non-negative integers has the requested mean and variance."""


class ConstructionUnavailable(BplinkError):
    """Existence is known but no closed-form construction is available."""


class ParseError(BplinkError, ValueError):
    """Malformed config or distribution text."""

    def __init__(self, message: str, position: int | None = None, expected: tuple[str, ...] = (), line: int | None = None):
        self.message = message
        self.position = position
        self.expected = tuple(expected)
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if position is not None:
            where.append(f"column {position + 1}")
        text = message
        if where:
            text = f"{', '.join(where)}: {message}"
        if self.expected:
            text += f" (expected {' or '.join(self.expected)})"
        super().__init__(text)


class ValidationError(BplinkError, ValueError):
    """Well-formed input whose values are out of range or inconsistent."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.message = message
        self.key = key
        self.line = line
        prefix = []
        if line is not None:
            prefix.append(f"line {line}")
        if key is not None:
            prefix.append(f"key {key!r}")
        super().__init__(f"{', '.join(prefix)}: {message}" if prefix else message)
