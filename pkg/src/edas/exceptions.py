"""Exception hierarchy shared by every module of the package."""


class EdasError(Exception):
    """Base class for all package errors."""


class InvalidTopologyError(EdasError):
    """The communication graph is malformed or disconnected."""


class ParameterError(EdasError, ValueError):
    """A scalar parameter lies outside its admissible range."""


class ContractError(EdasError, ValueError):
    """Array shapes or call preconditions do not match."""


class NumericalError(EdasError):
    """A numerical routine failed to converge or produced garbage."""


class DegenerateSpectrumError(NumericalError):
    """The mixing matrix spectrum does not support the requested object."""


class DivergenceError(NumericalError):
    """An iterate became non-finite during a run."""

    def __init__(self, message, *, iteration=None, algorithm=None, replica=None):
        super().__init__(message)
        self.iteration = iteration
        self.algorithm = algorithm
        self.replica = replica


class DataError(EdasError):
    """Datasets are missing, empty or too small."""


class DataFormatError(DataError):
    """A binary data file does not follow the expected layout."""


class ConfigError(EdasError):
    """An experiment configuration is malformed."""
