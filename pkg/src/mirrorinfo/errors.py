"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point lies outside the domain of a function or kernel."""


class NotHermitianError(ValueError):
    """A matrix expected to be Hermitian is not, beyond tolerance."""

    def __init__(self, residual, tol):
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"matrix is not Hermitian: max |H - H^dag| = {residual:.3e} exceeds {tol:.3e}"
        )


class DimensionError(ValueError):
    """Operand dimensions are inconsistent."""


class InfeasibleError(RuntimeError):
    """The constraint set of a problem appears to be empty."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NumericalFailureError(RuntimeError):
    """A solver detected behaviour that its convergence theory rules out."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class InstanceBudgetError(RuntimeError):
    """Random instance generation ran out of resamples."""
