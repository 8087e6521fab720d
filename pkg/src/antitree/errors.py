"""Exception types shared across the package."""


class AntitreeError(Exception):
    pass


class ConfigurationError(AntitreeError, ValueError):
    """Invalid parameters or config file content."""


class DomainError(AntitreeError, ValueError):
    """A spectral parameter lies where the requested quantity is undefined."""


class SingularityError(AntitreeError, ArithmeticError):
    """A harmonic sum vanished, so the effective potential has a pole.

    ``slice_index`` (1-based) identifies the offending slice when known.
    """

    def __init__(self, message, slice_index=None):
        super().__init__(message)
        self.slice_index = slice_index


class CapacityError(AntitreeError, MemoryError):
    pass


class IntegrationError(AntitreeError, ArithmeticError):
    pass


class GridTooCoarseError(AntitreeError):
    """Scan found a different number of zeros than the dense oracle."""


class MultiplicityWarning(UserWarning):
    pass


class ReturnTimeWarning(UserWarning):
    pass


class UnresolvedZerosWarning(UserWarning):
    pass
