"""Exception hierarchy shared by every qchlab module."""


class QchError(Exception):
    """Base class for all qchlab errors."""


class DomainError(QchError, ValueError):
    """A point (or finite-difference stencil) lies outside a chart domain."""


class NonFiniteError(QchError, ArithmeticError):
    """An evaluation produced NaN or Inf."""


class ShapeError(QchError, ValueError):
    """An array has the wrong shape or lacks a required symmetry."""


class SingularMetricError(QchError, ArithmeticError):
    """The metric is singular or not positive-definite at the point."""


class SignatureError(SingularMetricError):
    """A family produced a non-Riemannian metric on its probe grid."""


class NotPositiveError(SingularMetricError):
    """A Kahler potential has a non-positive complex Hessian."""


class DegenerateDistributionError(QchError, ValueError):
    """Spanning vectors of a distribution are (numerically) dependent."""


class DistributionInvarianceError(DegenerateDistributionError):
    """A distribution is not invariant under the complex structure."""


class NoSimpleEigenvalueError(QchError, ValueError):
    """A Weyl block has no simple eigenvalue to pick an eigenform from."""


class NotComplexStructureError(QchError, ValueError):
    """A candidate endomorphism does not square to minus the identity."""


class ZeroVectorError(QchError, ValueError):
    pass


class IllConditionedError(QchError, ArithmeticError):
    pass


class PreconditionError(QchError, ValueError):
    """Input does not satisfy the hypothesis a check relies on."""


class BadParameterError(QchError, ValueError):
    pass
