"""Exception types shared across the package."""


class QdivError(Exception):
    """Base class for all package errors."""


class ShapeError(QdivError):
    """Operands have incompatible dimensions."""


class DomainError(QdivError):
    """A spectral function was evaluated outside its domain."""


class FeasibilityError(QdivError):
    """An operator violates a feasibility constraint beyond tolerance."""


class ConvergenceError(QdivError):
    """An iterative routine failed to reach its target residual."""
