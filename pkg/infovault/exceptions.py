class InfovaultError(Exception):
    """Base class for all errors raised by infovault."""


class DomainError(InfovaultError, ValueError):
    """An argument lies outside the domain of the formula being evaluated."""


class ConvergenceError(InfovaultError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, best_residual: float, best_point=None) -> None:
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual
        self.best_point = best_point


class StructuralError(InfovaultError):
    """Aggregate demand is not strictly decreasing, so no unique clearing price."""

    def __init__(self, slope: float) -> None:
        super().__init__(
            f"aggregate demand slope is {slope!r}; clearing requires a negative slope"
        )
        self.slope = slope


class PolicyViolationError(InfovaultError):
    """A reserve or pool policy rule would be broken."""


class StateError(InfovaultError):
    """Operation is not valid in the current state of the simulation."""


class CapExceededError(InfovaultError):
    """A mint would push the token supply past the maximum cap."""


class PoolPausedError(InfovaultError):
    """The liquidity pool is paused by the safeguard policy."""

    def __init__(self, reason: str) -> None:
        super().__init__(f"pool is paused: {reason}")
        self.reason = reason


class DustError(InfovaultError):
    """An amount rounds to zero micro-units."""


class ConfigError(InfovaultError):
    """A configuration document failed to parse or validate."""

    def __init__(self, errors: list[tuple[str, str]]) -> None:
        lines = [f"{path}: {message}" for path, message in errors]
        super().__init__("invalid configuration\n  " + "\n  ".join(lines))
        self.errors = errors
