"""
Exception hierarchy for the EBM lab.

Every error raised on purpose by the package derives from ``EbmLabError`` so the
command-line front end can map whole families onto exit codes.
"""

from typing import Any, Sequence


class EbmLabError(RuntimeError):
    """Base class for all errors raised deliberately by this package."""


class NonFiniteError(EbmLabError, ValueError):
    pass


class DimensionMismatchError(EbmLabError, ValueError):
    pass


class DegenerateSpectrumError(EbmLabError, ValueError):
    def __init__(self, message: str = "degenerate spectrum"):
        super().__init__(message)


class NotPsdError(EbmLabError, ValueError):
    def __init__(self, min_eigenvalue: float):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(f"not PSD (smallest eigenvalue {min_eigenvalue:.3e})")


class InsufficientSamplesError(EbmLabError, ValueError):
    def __init__(self, n: int, required: int = 2):
        self.n = n
        super().__init__(f"insufficient samples: got {n}, need at least {required}")


class EnumerationTooLargeError(EbmLabError, ValueError):
    def __init__(self, n_units: int, limit: int):
        super().__init__(f"enumeration too large: {n_units} units exceeds limit {limit}")


class InvalidStateError(EbmLabError, ValueError):
    pass


class SamplerDivergedError(EbmLabError):
    """Raised when an MCMC path produces non-finite or exploding scores."""

    def __init__(self, step: int, nu_history: Sequence[float], reason: str = "sampler diverged"):
        self.step = step
        self.nu_history = list(nu_history)
        super().__init__(f"{reason} at step {step}")


class NoiseSpecError(EbmLabError, TypeError):
    pass


class FrozenModelError(EbmLabError, ValueError):
    def __init__(self, message: str = "noise model must be frozen"):
        super().__init__(message)


class DomainError(EbmLabError, ValueError):
    pass


class RatioOverflowError(EbmLabError, OverflowError):
    def __init__(self, point: Any, log_ratio: float):
        self.point = point
        self.log_ratio = log_ratio
        super().__init__(f"ratio overflow (log ratio {log_ratio:.3f}) at point {point}")


class SPairValidationError(EbmLabError, ValueError):
    def __init__(self, name: str, residual: float):
        self.name = name
        self.residual = residual
        super().__init__(f"S-pair '{name}' violates S0'/S1' = g (residual {residual:.3e})")


class NonFiniteGradientError(EbmLabError, FloatingPointError):
    def __init__(self, iteration: int | None = None):
        self.iteration = iteration
        where = f" at iteration {iteration}" if iteration is not None else ""
        super().__init__(f"non-finite gradient{where}")


class ConfigurationError(EbmLabError, ValueError):
    pass


class CheckpointFormatError(EbmLabError, ValueError):
    pass


class GridCoverageError(EbmLabError, ValueError):
    def __init__(self, coverage: float, required: float):
        self.coverage = coverage
        super().__init__(
            f"grid covers {coverage:.6f} of the target mass, need at least {required}"
        )


class MetricConstraintError(EbmLabError, ValueError):
    pass


class FreezeIsolationError(EbmLabError):
    pass
