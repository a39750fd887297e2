"""Exception types shared across the package."""


class Scat2dError(Exception):
    """Base class for package errors."""


class InvalidParameterError(Scat2dError, ValueError):
    """A numeric argument is outside its admissible range."""


class InvalidDomainError(Scat2dError, ValueError):
    """A polygonal domain is malformed (self-intersecting, overlapping, ...)."""


class DegenerateSimplexError(Scat2dError, ValueError):
    """A triangle has (numerically) zero area."""


class NotAdmissibleError(Scat2dError, ValueError):
    """A coefficient pair violates its bound box / ellipticity constraints."""


class InvalidPairError(Scat2dError, ValueError):
    """Two coefficient pairs are not comparable (mismatched domains)."""


class MeshResolutionError(Scat2dError, ValueError):
    """A mesh is too coarse for the requested wavenumber or quadrature."""


class SolverFailureError(Scat2dError, RuntimeError):
    """The linear solver failed (possibly a discrete resonance)."""


class NumericError(Scat2dError, ArithmeticError):
    """A special-function or quadrature evaluation produced non-finite values."""


class InvalidScheduleError(Scat2dError, ValueError):
    """Schedule exponents violate their admissibility constraints."""
