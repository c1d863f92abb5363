"""Exception hierarchy shared by every engine."""


class FermiAccelError(Exception):
    """Base class for all package errors."""


class ParameterError(FermiAccelError, ValueError):
    """A physical or dimensionless parameter violates its invariants."""


class DomainError(FermiAccelError, ValueError):
    """Argument outside the supported evaluation range."""


class DegenerateEnsembleError(FermiAccelError):
    """Initial ensemble would mostly start below the mirror."""


class EscapeError(FermiAccelError):
    """No wall crossing found within the search horizon."""


class BlowupError(FermiAccelError):
    """Integration produced a non-finite state.

    ``last_state`` holds the last finite state seen.
    """

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class InstabilityError(FermiAccelError):
    """Norm jumped within a single propagation step."""


class GridTooSmallError(FermiAccelError):
    """The wavepacket does not fit inside the spatial grid."""


class FitError(FermiAccelError):
    """A model fit could not be carried out or did not converge.

    ``best`` carries the best-so-far result when one exists.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class CoverageError(FermiAccelError):
    """A sweep does not sample some windows densely enough."""

    def __init__(self, message, windows=()):
        super().__init__(message)
        self.windows = list(windows)


class ConfigError(FermiAccelError):
    """Run configuration failed validation.

    ``key`` is the dotted key path and ``line`` its source line, when known.
    """

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line


class VerificationError(FermiAccelError):
    """Output files do not match the manifest."""


class MissingInputError(FermiAccelError):
    """Inputs needed to draw a figure are absent.

    ``missing`` lists the absent files or series.
    """

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = list(missing)
