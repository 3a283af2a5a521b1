"""Exception types shared across the package.

Every error raised on a contract violation derives from :class:`AblabError`,
so callers (and the CLI) can separate physics/config failures from bugs.
"""


class AblabError(Exception):
    """Base class for all package errors."""


class DomainError(AblabError):
    """An evaluation point or path entered a region where the model is undefined
    (inside an obstacle, g00 <= 0, ...)."""


class GrazingRayError(AblabError):
    """A ray met an obstacle tangentially; the specular reflection law and the
    underlying short-wavelength ansatz break down there."""


class ReflectionBudgetError(AblabError):
    """Broken-ray tracing exceeded max_reflections without escaping the outer
    bound.  Carries the partial ray in ``partial``."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class GeometryError(AblabError):
    """An experiment geometry is inconsistent (beams fail to meet, a circuit
    crosses an obstacle, a ray that must be straight is blocked, ...)."""


class ConvergenceError(AblabError):
    """Adaptive quadrature failed to reach the requested tolerance.  Carries the
    best estimate in ``best_estimate`` and the error bound in ``error_bound``."""

    def __init__(self, message, best_estimate=None, error_bound=None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_bound = error_bound


class ResolutionError(AblabError):
    """The lattice is too coarse to represent a scene feature."""


class SolverError(AblabError):
    """The iterative linear solve did not reach the residual target.  Carries
    the achieved relative residual in ``residual``."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ExperimentDesignError(AblabError):
    """An experiment cannot produce a measurement (packets never overlap,
    schedule moves the boundary too fast, ...)."""


class LabelingError(AblabError):
    """A site partition required by an operation is incomplete."""


class DataError(AblabError):
    """Measured data outside its physical range."""


class RankDeficientError(AblabError):
    """The winding matrix of a flux-recovery system is singular: some flux
    combination is unobservable."""


class AmbiguityError(AblabError):
    """The winding matrix has |det| > 1: recovery is only determined up to a
    coset of ``coset_size`` admissible solutions (``solutions`` when small)."""

    def __init__(self, message, coset_size=None, solutions=None):
        super().__init__(message)
        self.coset_size = coset_size
        self.solutions = solutions


class MeasurementDesignError(AblabError):
    """Automatic circuit design failed; supply circuits manually."""


class InconsistentMeasurementsError(AblabError):
    """No flux assignment reproduces all measurements within tolerance.
    Carries the best residual vector in ``residuals``."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class ConfigError(AblabError):
    """A CLI configuration file failed validation (exit code 2)."""
