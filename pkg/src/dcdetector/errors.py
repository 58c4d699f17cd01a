"""Exception hierarchy shared across the package."""


class DCDetectorError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(DCDetectorError, ValueError):
    pass


class ParameterError(DCDetectorError, ValueError):
    pass


class DomainError(DCDetectorError, ValueError):
    pass


class ContractError(DCDetectorError, ValueError):
    pass


class NonFiniteError(DCDetectorError, FloatingPointError):
    """A forward op produced NaN or Inf from finite inputs."""


class IngestionError(DCDetectorError, ValueError):
    pass


class ConfigError(DCDetectorError, ValueError):
    pass


class SpecError(DCDetectorError, ValueError):
    """Invalid synthetic-data spec; ``field`` holds the offending path."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class CorruptCheckpointError(DCDetectorError, ValueError):
    pass


class TrainingDivergedError(DCDetectorError, FloatingPointError):
    def __init__(self, message, epoch=None, step=None):
        super().__init__(message)
        self.epoch = epoch
        self.step = step
