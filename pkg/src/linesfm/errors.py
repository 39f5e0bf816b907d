"""Exception hierarchy shared by the library and the CLI."""


class LineSfMError(Exception):
    """Base class for every error raised by :mod:`linesfm`."""


class InvalidLineError(LineSfMError, ValueError):
    """The direction vector of a line is zero or not finite."""


class DegenerateLineError(LineSfMError, ValueError):
    """The line passes through the optical center (zero moment)."""


class DepthOverflowError(LineSfMError, ArithmeticError):
    """The reconstructed inverse-depth vector is zero: the line is at infinity."""


class EliminationSingularityError(LineSfMError, ArithmeticError):
    """The moment component used to eliminate a coordinate of chi is ~0."""


class ScenarioError(LineSfMError, RuntimeError):
    """A scenario could not be generated within the rejection budget."""


class ConfigError(LineSfMError, ValueError):
    """A run configuration failed schema validation."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
