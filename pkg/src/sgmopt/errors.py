"""Exception hierarchy shared by all modules."""


class SgmError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(SgmError, ValueError):
    pass


class NumericalError(SgmError, ArithmeticError):
    pass


class DomainError(SgmError, ValueError):
    """Objective evaluated where it is undefined (e.g. zero denominator)."""


class ProjectionError(SgmError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class NonDescentError(SgmError):
    pass


class BacktrackExhaustedError(SgmError):
    pass


class InsufficientDataError(SgmError, ValueError):
    pass


class ConfigError(SgmError, ValueError):
    pass
