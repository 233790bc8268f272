"""Exception taxonomy shared by the library and the CLI.

The CLI maps these onto exit codes: ConfigError -> 2, GuardError and any
other BellheraldError -> 3, CheckFailure -> 4.
"""


class BellheraldError(Exception):
    """Base class for all package errors."""


class ConfigError(BellheraldError):
    """Malformed, unknown, or out-of-range configuration input."""


class GuardError(BellheraldError):
    """A numerical validity guard was violated (step size, drive regime,
    degenerate null space, trace collapse, Hermiticity drift)."""


class CheckFailure(BellheraldError):
    """A consistency check ran to completion and failed."""


class PreconditionError(BellheraldError, ValueError):
    """An operation received input outside its documented domain."""
