"""Exception hierarchy shared by all modules."""


class ElastoError(Exception):
    """Base class for package errors."""


class ConfigurationError(ElastoError, ValueError):
    """Invalid or inconsistent configuration."""


class DomainError(ElastoError, ValueError):
    """Input outside the admissible physical domain (point outside mesh, c^2 <= 0)."""


class ShapeMismatchError(ElastoError, ValueError):
    """Arrays or grids with incompatible shapes."""


class ContractViolation(ElastoError, ValueError):
    """A documented precondition was not met (e.g. inadmissible parameters)."""


class NumericalError(ElastoError, ArithmeticError):
    """Numerical failure: instability, failed factorization, stalled iteration."""


class CFLViolation(NumericalError):
    """Time step too large for the requested speed field."""


class InstabilityError(NumericalError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, step):
        super().__init__(f"non-finite values at time step {step}")
        self.step = step


class DetectionError(ElastoError, RuntimeError):
    """No anomaly candidate could be extracted from the energy fields."""


class InitializationError(ElastoError, RuntimeError):
    """Ensemble initialization could not find admissible walkers."""


class InverseCrimeError(ConfigurationError):
    """Inversion requested on the data-generation discretization."""


class JacobianError(NumericalError):
    """A finite-difference perturbation stayed inadmissible after shrinking."""


class StallError(NumericalError):
    """The damping parameter grew without producing an acceptable step."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
