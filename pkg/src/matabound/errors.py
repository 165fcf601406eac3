"""Exception hierarchy shared across the package."""


class MatacoverError(Exception):
    """Base class for all errors raised by this package."""


class RankDeficient(MatacoverError):
    """Design matrix does not have full column rank."""


class MissingResponse(MatacoverError):
    """Operation needs a response vector but the problem has none."""


class SingularRestriction(MatacoverError):
    """Restriction quadratic form H_K (X'X)^-1 H_K' is numerically singular.

    Cannot occur for a full-rank design; raised defensively.
    """


class EmptySubset(MatacoverError):
    """Operation requires a non-empty coefficient subset."""


class DegenerateFit(MatacoverError):
    """Residual sum of squares is zero (perfect fit); tail areas undefined."""


class InvalidKernel(MatacoverError):
    """Weight kernel violated positivity/finiteness or a monotonicity probe."""


class BracketFailure(MatacoverError):
    """Root bracket expansion failed to find a sign change."""


class DomainError(MatacoverError):
    """Argument outside the mathematical domain of the function."""


class QuadratureError(MatacoverError):
    """Numerical integration failed its convergence check."""


class EventMismatch(MatacoverError):
    """Audited replicate: h-event and endpoint-containment coverage disagree.

    This signals an implementation bug, not a statistical failure.
    """
