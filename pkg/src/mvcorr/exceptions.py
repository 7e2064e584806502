"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Array shapes are incompatible with the requested operation."""


class NotSymmetricError(ValueError):
    pass


class NotPSDError(ValueError):
    """A matrix expected to be positive semi-definite has a clearly negative eigenvalue."""


class SingularCovarianceError(ValueError):
    """A covariance needs regularization before it can be whitened."""


class TrainingDivergedError(RuntimeError):
    """Raised when a training objective or gradient becomes non-finite."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class DatasetFormatError(ValueError):
    pass


class MalformedHeaderError(DatasetFormatError):
    pass


class AlignmentError(DatasetFormatError):
    pass


class TruncatedFileError(DatasetFormatError):
    pass
