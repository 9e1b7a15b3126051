"""Exception types shared across the package."""


class CsrgError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(CsrgError):
    """Matrix/vector dimensions are inconsistent."""


class SingularMatrix(CsrgError):
    """A linear solve encountered an (almost) singular matrix."""


class NotSchur(CsrgError):
    """A matrix required to be Schur stable is not."""


class NotPD(CsrgError):
    """A matrix required to be positive definite is not."""


class NotPSD(CsrgError):
    """A matrix required to be positive semidefinite is not."""


class DomainError(CsrgError):
    """Scalar function argument outside its domain."""


class Infeasible(CsrgError):
    """A constraint set is empty."""


class Unbounded(CsrgError):
    """An optimization problem is unbounded."""


class NotFinitelyDetermined(CsrgError):
    """The admissible-set recursion did not terminate within the stage cap."""


class AssumptionViolated(CsrgError):
    """A standing assumption of the construction fails on the given data."""


class InitialStateInadmissible(CsrgError):
    """Governor started from a state outside the admissible set."""
