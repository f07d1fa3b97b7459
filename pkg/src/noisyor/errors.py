"""Exception hierarchy shared across the package."""


class NoisyOrError(Exception):
    """Base class for all errors raised by this package."""


class DataError(NoisyOrError):
    """Invalid, missing, or insufficient input data."""


class NumericalError(NoisyOrError):
    """A numerical routine failed or produced an inconsistent result."""


class ModelTooLargeError(DataError):
    """Variable count exceeds a hard size cap."""


class UndefinedConditionalError(DataError):
    """Conditioning event has probability zero."""


class NoDataError(DataError):
    """An empirical stratum is empty."""


class UnreliableEstimateError(NumericalError):
    """A causal-power denominator fell below the reliability threshold."""


class InconsistentOrderError(DataError):
    """The detected ancestor relation admits no total order."""


class InvalidLinksError(NumericalError):
    """Link estimates produce a singular conditional-probability matrix."""


class MissingPassiveDataError(DataError):
    """Disturbance recovery requires a passive-observational dataset."""


class ImpossibleDataError(DataError):
    """An observed configuration has zero likelihood under every disturbance."""


class EmDivergedError(NumericalError):
    """Expected log-likelihood decreased beyond tolerance."""
