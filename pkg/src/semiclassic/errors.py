"""Exception types shared across the toolkit."""


class SemiclassicError(Exception):
    """Base class for every toolkit-specific failure."""


class ScenarioError(SemiclassicError):
    """A scenario file or component definition failed validation."""


class NonFinite(SemiclassicError):
    """A trajectory or field overflowed; blow-up or a bad model."""


class CausticProximity(SemiclassicError):
    """A requested point sits on or too close to the caustic set.

    Carries the offending branches (Jacobian below threshold) so drivers can
    record the cell instead of aborting.
    """

    def __init__(self, message, branches=()):
        super().__init__(message)
        self.branches = list(branches)


class NoRoot(SemiclassicError):
    """No Newton start converged; box too small or point out of range."""


class NonTransversalCrossing(SemiclassicError):
    """Degenerate caustic touch; the crossing count is not trustworthy."""


class OnCaustic(SemiclassicError):
    """An endpoint or eigenvalue test landed on the caustic."""


class NotCommuting(SemiclassicError):
    """Block-determinant shortcut requires the top blocks to commute."""


class BranchJump(SemiclassicError):
    """A warm-started root refinement left its branch across a stencil."""


class UnderResolved(SemiclassicError):
    """Oscillatory quadrature exceeded its node budget."""


class BoundaryContamination(SemiclassicError):
    """Wave mass reached the guard band of the periodic box."""


class WindowClipped(SemiclassicError):
    """A correlation window does not fit inside the guard band."""


class OverlappingBranches(SemiclassicError):
    """Branch momenta are closer than the concentration windows allow."""


class CausticInWindow(SemiclassicError):
    """A comparison window contains caustic points."""
