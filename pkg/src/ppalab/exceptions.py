"""Exception hierarchy shared by the ppalab modules."""


class PpaLabError(Exception):
    """Base class for every error raised by ppalab."""


class DimensionError(PpaLabError, ValueError):
    """Operands live in spaces of different dimension."""


class EmptySetError(PpaLabError, ValueError):
    """An operation needs a nonempty set."""


class DomainError(PpaLabError, ValueError):
    """A map was evaluated outside its domain."""


class RepresentationError(PpaLabError, ValueError):
    """A result cannot be expressed with the supported set variants."""


class ResolventError(PpaLabError, RuntimeError):
    """The resolvent could not be computed (non-monotone model, unsupported
    combination, or a solver that failed to bracket)."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class PreconditionError(PpaLabError, ValueError):
    """Caller violated a documented precondition."""


class NoDataError(PpaLabError, ValueError):
    """Every sample was discarded, nothing to estimate from."""


class FitError(PpaLabError, ValueError):
    """A modulus fit was rejected."""


class ConfigError(PpaLabError, ValueError):
    """A scenario file is malformed; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
