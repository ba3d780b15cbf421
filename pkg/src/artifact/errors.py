"""Exception hierarchy shared by all modules."""


class ArtifactError(Exception):
    """Base class for every error raised by the package."""


class InvalidParameterError(ArtifactError, ValueError):
    """A physical or numerical parameter is outside its admissible range."""


class DegenerateStateError(ArtifactError, ValueError):
    """Moments do not define a valid Maxwellian (non-positive mass or temperature)."""


class ShapeError(ArtifactError, ValueError):
    """Arrays do not live on the same grid."""


class CapacityError(ArtifactError, MemoryError):
    """A dense object would exceed the configured memory guard."""


class WeightDominationError(ArtifactError, ArithmeticError):
    """The reference weight does not dominate the tails of the profile."""


class NumericalError(ArtifactError, ArithmeticError):
    """A solver diverged, lost positivity or failed to converge."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class StepSizeError(ArtifactError, ValueError):
    """The requested time step violates the stability restriction."""


class ConfigError(ArtifactError, ValueError):
    """A configuration file or command line could not be understood."""


class AlignmentError(ArtifactError, ValueError):
    """Kinetic and fluid snapshots do not refer to the same time or grid."""
