"""Exception and warning types shared across the package."""


class FracorderError(Exception):
    """Base class for all library errors."""


# --- Mittag-Leffler evaluation ---

class NonConvergence(FracorderError):
    """Series did not meet the tolerance within the term cap."""


class DomainError(FracorderError):
    """Argument outside the regime an operation is reliable in."""


class NotImplementedSector(FracorderError):
    """Argument outside the supported sector of the complex plane."""


# --- operator assembly ---

class SpecError(FracorderError):
    """Problem specification violates a structural invariant."""


class EllipticityError(FracorderError):
    """Coefficient matrix is not uniformly positive definite."""


class ConditionViolatedWarning(UserWarning):
    """Positivity condition value is <= 0; forward solving still allowed."""


class PecletWarning(UserWarning):
    """Cell Peclet number >= 1; central advection may oscillate."""


# --- spectral decomposition ---

class EigensolverFailure(FracorderError):
    """Dense Schur/eigenvalue computation failed to converge."""


class ClusterAmbiguityWarning(UserWarning):
    """Eigenvalue clustering changes under a +-10% tolerance perturbation."""


class ContourError(FracorderError):
    """Quadrature circle intersects or encloses foreign eigenvalues."""


class SingularCluster(FracorderError):
    """Cluster eigenvalue too close to zero to invert."""


# --- solvers ---

class ToleranceExceeded(FracorderError):
    """Imaginary residue of a nominally real result exceeds tolerance."""


class LinearSolveFailure(FracorderError):
    """A time-step linear system could not be solved."""


class StabilityWarning(UserWarning):
    """Time-step norm grew; signals an assembly or scheme error."""


class OutOfDomain(FracorderError):
    """Observation point outside the spatial domain."""


class DegenerateSeries(FracorderError):
    """Observation series is identically below the underflow floor."""


# --- asymptotics and recovery ---

class RemainderDominates(FracorderError):
    """Remainder exceeds the leading term; asymptotic regime not reached."""


class SignChangeInWindow(FracorderError):
    """Observation data crosses zero inside the fit window."""


class WindowTooNarrow(FracorderError):
    """Too few samples inside the requested fit window."""


class NoConvergence(FracorderError):
    """Nonlinear fit hit its iteration cap without converging."""


class WindowSuspect(FracorderError):
    """Refined order estimate moved too far from the log-log estimate."""


class UniquenessInconclusive(DegenerateSeries):
    """Both observation series vanish: order comparison is undecidable."""


class BoundaryEstimate(UserWarning):
    """Recovered order was clamped to the open-interval bounds."""


# --- CLI ---

class ConfigError(FracorderError):
    """Configuration file is malformed or violates an invariant."""
