"""Exception hierarchy. The CLI maps each class to its own exit status."""


class EpiFramesError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(EpiFramesError, ValueError):
    """Invalid simulation, design or experiment parameters."""

    exit_code = 2


class DesignError(EpiFramesError, ValueError):
    """A sampling design cannot be executed as requested."""

    exit_code = 3


class EstimationError(EpiFramesError, ValueError):
    """Estimator inputs violate the estimator's preconditions."""

    exit_code = 4


class NotComputableError(EstimationError):
    """The requested quantity is undefined for this sample (e.g. empty overlap)."""


class NoVerifiedCasesError(DesignError):
    """The verified-case frame is empty on the requested day."""


class ConsistencyError(EpiFramesError, AssertionError):
    """An internal identity failed. Always an implementation bug."""

    exit_code = 70
