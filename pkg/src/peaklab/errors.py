"""Exception types shared across the package.

Everything raised on purpose derives from PeaklabError so callers can
catch one base class at the CLI boundary.
"""


class PeaklabError(Exception):
    """Base class for all package errors."""


class GeometryError(PeaklabError):
    """Invalid domain description (non-positive radius, bad dimension, ...)."""


class EmptyGrid(GeometryError):
    """Spacing too coarse: no lattice point falls strictly inside the domain."""


class UnsupportedDomain(GeometryError):
    """Operation not available for this domain kind."""


class ShapeMismatch(PeaklabError):
    """Field length does not match the grid it claims to live on."""


class SolverDiverged(PeaklabError):
    """Linear solve ended without meeting its residual tolerance."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class FacetOutsideGrid(PeaklabError):
    """Normal-derivative sampling stencil left the grid entirely."""


class NotConverged(PeaklabError):
    """Outer iteration (minimization or fixed point) hit its budget."""

    def __init__(self, message, iterations=None, last_decrease=None):
        super().__init__(message)
        self.iterations = iterations
        self.last_decrease = last_decrease


class NegativePhase(PeaklabError):
    """Iterate lost positivity and positive-projection restarts kept failing."""


class ExponentDegenerate(PeaklabError):
    """Exponent p too close to (N-2)/2: the rescaling power blows up."""


class OverflowInPower(PeaklabError):
    """A scaled power left the representable range even in log form."""


class ShootFailed(PeaklabError):
    """Radial shooting could not bracket or match the joint zero."""


class StiffFailure(PeaklabError):
    """Radial integrator broke down (step collapse or range exhausted)."""


class SourceTooCloseToBoundary(PeaklabError):
    """Green-function source violates the minimum distance to the boundary."""


class InsufficientData(PeaklabError):
    """Not enough samples for the requested fit or lattice operation."""


class NoCriticalPoint(PeaklabError):
    """Critical-point search found no candidate cell on the probe lattice."""


class ConfigError(PeaklabError):
    """Malformed or inconsistent run configuration."""
