"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the model."""


class InstabilityError(ValueError):
    """The explicit time step is too large for the process pole."""


class RiccatiBlowupError(ArithmeticError):
    """A Riccati solution escaped (P -> infinity) before the end of the horizon."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class IndefiniteError(ArithmeticError):
    """A batch quadratic lost positive definiteness."""

    def __init__(self, message, pivot=None, index=None):
        super().__init__(message)
        self.pivot = pivot
        self.index = index


class FixedPointError(RuntimeError):
    """The sigma_f^2 <-> R_sq iteration failed to converge."""


class DegenerateIntervalError(ValueError):
    """Fixed-interval smoothing needs at least 10 grid points."""
