"""Exception hierarchy shared by all modules."""


class SparseWishartError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SparseWishartError, ValueError):
    """Invalid user input (bad shapes, bad config values, malformed files)."""


class DimMismatch(ValidationError):
    pass


class AsymmetricInput(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class InvalidDof(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class AllZeroPrior(ValidationError):
    pass


class TooFewObservations(ValidationError):
    pass


class NotPositiveDefinite(SparseWishartError, ValueError):
    pass


class SingularInit(NotPositiveDefinite):
    pass


class NumericalFailure(SparseWishartError, ArithmeticError):
    pass


class Diverged(NumericalFailure):
    """The covariance solver increased its objective; this is a solver bug."""


class NoRootInBracket(NumericalFailure):
    """The degrees-of-freedom equation has no root inside the admissible range.

    ``bound`` holds the admissible endpoint closest to the root, which is
    the constrained maximiser of the concave objective in that case.
    """

    def __init__(self, message, bound):
        super().__init__(message)
        self.bound = bound


class EmptyComponent(NumericalFailure):
    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class DegenerateFit(NumericalFailure):
    pass


class AllFitsFailed(NumericalFailure):
    pass
