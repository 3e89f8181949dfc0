"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class ArtifactError(Exception):
    exit_code = 3

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class ConfigError(ArtifactError):
    exit_code = 4


class ParameterError(ConfigError):
    """Nonpositive or otherwise malformed model parameter."""


class AssumptionError(ArtifactError):
    """A structural hypothesis of the model is violated."""

    exit_code = 2


class MonostabilityError(AssumptionError):
    pass


class DominanceError(AssumptionError):
    """Block-triangular linearization whose first block does not dominate."""


class SpeedError(AssumptionError):
    """Requested wave speed is not above the critical speed."""


class EnvelopeError(AssumptionError):
    pass


class HypothesisError(AssumptionError):
    pass


class NumericalError(ArtifactError):
    exit_code = 3


class DomainError(NumericalError, ValueError):
    pass


class ConvergenceError(NumericalError):
    pass


class ScanError(NumericalError):
    pass


class GridError(NumericalError):
    """Computational domain too short for the requested quantity."""


class DegenerateError(NumericalError):
    pass


class TimestepError(NumericalError):
    pass


class StabilityError(NumericalError):
    pass


class SchemeError(NumericalError):
    """A discrete ordering property that the scheme guarantees was violated."""


class ConstructionError(NumericalError):
    pass
