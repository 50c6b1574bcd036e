"""Exception and warning types shared across the package.

Each error carries the process exit code the command-line front end maps it to.
"""


class HomFisherError(Exception):
    exit_code = 1


class ParameterError(HomFisherError, ValueError):
    """A physical parameter lies outside its domain."""

    exit_code = 2


class ConfigError(HomFisherError, ValueError):
    """An invalid binning/detector/run configuration."""

    exit_code = 2


class BoundaryError(HomFisherError, ValueError):
    """A differentiated parameter sits on the edge of its domain."""

    exit_code = 3


class DegenerateDataError(HomFisherError):
    """Counts carry no information about the requested parameters."""

    exit_code = 4


class SingularInformationError(HomFisherError):
    """The Fisher matrix for the requested parameters is rank deficient."""

    exit_code = 4

    def __init__(self, message, analysis=None):
        super().__init__(message)
        self.analysis = analysis


class ConvergenceError(HomFisherError, RuntimeError):
    """An iterative numerical routine failed to meet its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateDistributionWarning(UserWarning):
    pass


class FlatFunctionWarning(UserWarning):
    pass


class SearchBoundaryWarning(UserWarning):
    pass
