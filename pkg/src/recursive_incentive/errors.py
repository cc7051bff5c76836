"""Exception hierarchy shared by every module."""

from __future__ import annotations


class RecursiveIncentiveError(Exception):
    """Base class for all package errors."""


class ParseError(RecursiveIncentiveError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(RecursiveIncentiveError, ValueError):
    pass


class ChronologyError(ValidationError):
    """A child signed up no later than its recruiter."""


class UnknownAgentError(RecursiveIncentiveError, KeyError):
    def __init__(self, agent):
        self.agent = agent
        super().__init__(f"unknown agent {agent!r}")

    def __str__(self) -> str:
        return self.args[0]


class UnknownTaskError(UnknownAgentError):
    def __init__(self, task):
        self.agent = task
        KeyError.__init__(self, f"unknown task {task!r}")


class DomainError(RecursiveIncentiveError, ValueError):
    pass


class SettlementError(RecursiveIncentiveError, ValueError):
    pass


class ConfigurationError(RecursiveIncentiveError, ValueError):
    pass


class CapabilityError(RecursiveIncentiveError):
    """The requested analysis cannot be performed under the given process."""


class SizeError(RecursiveIncentiveError):
    """Strategy space exceeds the enumeration cap."""


class FitError(RecursiveIncentiveError, ValueError):
    pass
