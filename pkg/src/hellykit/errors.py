"""Exception types shared across the toolkit."""


class HellyKitError(Exception):
    """Base class for all toolkit errors."""


class OriginNotInterior(HellyKitError):
    """The origin is not an interior point of the body (polar/gauge precondition)."""


class Unbounded(HellyKitError):
    """The polytope has a recession direction; the requested quantity is infinite."""


class InfeasibleBody(HellyKitError):
    """The half-space intersection is empty."""


class DegenerateBody(HellyKitError):
    """The body is not full-dimensional."""


class DegeneratePointSet(HellyKitError):
    """The point set does not affinely span the ambient space."""


class DimensionTooLarge(HellyKitError):
    """Exact enumeration was requested above the configured dimension cap."""


class TooFewContacts(HellyKitError):
    """Fewer contact points were found than John's theorem guarantees."""


class NoValidDecomposition(HellyKitError):
    """Nonnegative weights reproducing the identity could not be recovered."""


class BudgetInfeasible(HellyKitError):
    """No multiset within the budget met the sparsification accuracy targets."""


class IndexOutOfRange(HellyKitError):
    """A multiset index does not refer to the source decomposition."""


class NotInHull(HellyKitError):
    """The target point is not a convex combination of the given points."""


class SandwichViolated(HellyKitError):
    """The lifted operator escaped the required spectral sandwich."""


class EmptyInterior(HellyKitError):
    """The family intersection has no interior point."""


class NotInPosition(HellyKitError):
    """A body failed the re-solve audit for the requested extremal position."""


class GenerationFailed(HellyKitError):
    """A random family generator exhausted its retries."""


class IoFailure(HellyKitError):
    """A report could not be written."""


class SolverFailure(HellyKitError):
    """An underlying convex solver did not return a usable optimum."""
