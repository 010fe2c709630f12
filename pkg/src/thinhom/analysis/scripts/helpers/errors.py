"""Exceptions raised by the thin-domain workbench."""

from typing import Optional, Tuple


class ThinDomainError(Exception):
    """Base class for all workbench errors."""


class DomainError(ThinDomainError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class MeshError(ThinDomainError):
    """The mesh could not be built or does not support the request."""


class ContractError(ThinDomainError):
    """Inputs are individually valid but do not belong together."""


class UnsupportedError(ThinDomainError):
    """The request is outside what the implementation supports."""


class NumericError(ThinDomainError, ArithmeticError):
    """Non-finite values appeared during a computation."""


class ConvergenceError(ThinDomainError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (relative residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class PartialSliceError(MeshError):
    """A horizontal slice leaves the domain for part of the interval."""

    def __init__(self, y: float, x_range: Tuple[float, float], count: Optional[int] = None):
        super().__init__(
            f"Line y={y} leaves the domain for x in [{x_range[0]:.6g}, {x_range[1]:.6g}]"
            + (f" ({count} samples)" if count is not None else "")
        )
        self.y = y
        self.x_range = x_range
