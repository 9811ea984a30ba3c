"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain an operation accepts."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (singular solve, non-convergence, ...)."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class RegimeError(NumericalError):
    """The effective diffusion a + h*rho dropped below the admissible floor."""
