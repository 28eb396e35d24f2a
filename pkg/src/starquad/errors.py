"""Exception types shared across the package."""


class StarquadError(Exception):
    """Base class for all package errors."""


class DomainError(StarquadError):
    """Invalid domain definition (bad shape parameters, dimension, radii)."""


class ConfigError(StarquadError):
    """Domain config file could not be parsed.

    Carries the 1-based line number when the error is tied to a line.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PreconditionError(StarquadError):
    """A numerical precondition is violated (resolution, smallness of h_n, ...)."""


class NodeConstructionError(PreconditionError):
    """No admissible interior point was found for a boundary cube."""
