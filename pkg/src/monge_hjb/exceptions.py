"""Exception types raised across the package."""


class MongeHJBError(Exception):
    """Base class for all package errors."""


class NonDivisibleSpacing(MongeHJBError, ValueError):
    pass


class DisconnectedDomain(MongeHJBError, ValueError):
    pass


class NegativeSource(MongeHJBError, ValueError):
    pass


class UnsupportedDimension(MongeHJBError, ValueError):
    pass


class InsufficientReach(MongeHJBError, ValueError):
    pass


class NoAdmissibleDirection(MongeHJBError, ValueError):
    pass


class SingularSystem(MongeHJBError, RuntimeError):
    pass


class NotConverged(MongeHJBError, RuntimeError):
    """Soft failure: the solver still returns its report."""


class NonNestedGrids(MongeHJBError, ValueError):
    pass


class MissingCertificates(MongeHJBError, ValueError):
    pass


class SemanticsMismatch(MongeHJBError, ValueError):
    """Boundary semantics incompatible with the grid's boundary split."""


class DiagonalMisaligned(MongeHJBError, ValueError):
    pass
