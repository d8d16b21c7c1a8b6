"""Exception hierarchy; the CLI maps each family to an exit code."""


class IQGANError(Exception):
    pass


class ValidationError(IQGANError, ValueError):
    """Malformed input to a library call (bad gate, wrong length, bad config value)."""


class ConfigError(ValidationError):
    """Run configuration is inconsistent or references missing files."""


class DataError(IQGANError):
    pass


class IdxFormatError(DataError):
    def __init__(self, path, observed, expected):
        self.observed = observed
        self.expected = expected
        super().__init__(f"{path}: bad IDX magic {observed} (expected {expected})")


class TruncatedFileError(DataError):
    pass


class CountMismatchError(DataError):
    pass


class ArtifactError(DataError):
    """A saved parameter/model file is missing or unreadable."""


class NumericError(IQGANError, ArithmeticError):
    """Numerical degeneracy (rank-deficient data, non-invertible scale, ...)."""


class DegenerateDataError(NumericError):
    pass
