"""Exception hierarchy shared by all modules.

The CLI maps each class to a process exit code (see ``harness.cli``).
"""


class AlmabError(Exception):
    """Base class for errors raised by this package."""


class InputError(AlmabError, ValueError):
    """An argument violates an operation's precondition."""


class ConfigError(AlmabError, ValueError):
    """An experiment or oracle configuration is invalid."""


class NumericalError(AlmabError, ArithmeticError):
    """A numerical routine failed (factorization, fitting)."""
