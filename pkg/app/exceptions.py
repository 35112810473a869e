"""
Domain errors.

Every error carries the process exit status the command line reports for it and a
human readable detail, the same pair an HTTP layer would carry as status code and detail.
"""

# Command-line usage errors (unknown command, preset or option); sysexits EX_USAGE
USAGE_EXIT_CODE = 64


class SkewlessError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigError(SkewlessError):
    """A configuration file could not be parsed or validated."""

    def __init__(self, detail: str, path: str | None = None, line: int | None = None):
        anchor = ""
        if path is not None:
            anchor = f"{path}:{line if line is not None else 1}: "
        super().__init__(f"{anchor}{detail}")
        self.path = path
        self.line = line


class ClockDomainError(SkewlessError, ValueError):
    """A clock operation received a non-finite input."""


class DegenerateIntervalError(SkewlessError, ZeroDivisionError):
    """Two measurement epochs share the same clock reading."""


class TopologyError(SkewlessError, ValueError):
    """The measurement graph or its weights are invalid."""


class DisconnectedGraphError(TopologyError):
    """The zero eigenvalue of the Laplacian is not simple."""


class ParameterConditionError(SkewlessError, ValueError):
    """Protocol parameters violate a condition required by a bound."""


class StabilityInputError(SkewlessError, ValueError):
    """An analysis routine was called outside its preconditions."""


class MetricsInputError(SkewlessError, ValueError):
    """A metric was requested over an empty or invalid window."""
