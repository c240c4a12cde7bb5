"""Error taxonomy shared across the package."""


class OdegenError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(OdegenError, ValueError):
    """Operands have incompatible or invalid dimensions."""


class DomainError(OdegenError, ValueError):
    """An input value lies outside an op's documented domain (e.g. division by zero)."""


class ContractError(OdegenError, ValueError):
    """An API was called in a way its contract forbids (wrong key, non-scalar loss, ...)."""


class ConfigError(OdegenError, ValueError):
    """A run configuration failed validation. The message names the offending key."""


class ConvergenceError(OdegenError, RuntimeError):
    """The adaptive solver exceeded its step budget; carries the last reached time."""

    def __init__(self, message: str, last_time: float):
        super().__init__(message)
        self.last_time = last_time


class DivergenceError(OdegenError, RuntimeError):
    """A derivative evaluation produced a non-finite value."""


class UnsupportedConfigError(OdegenError, ValueError):
    """The requested combination of options is not supported (e.g. recorded dopri5)."""


class TrainingError(OdegenError, RuntimeError):
    """Training hit a non-finite loss; carries the offending step index."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step
