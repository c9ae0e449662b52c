"""Exception hierarchy shared by all modules."""


class DPPError(Exception):
    """Base class for every error raised by this package."""


class DomainError(DPPError, ValueError):
    """A constructor was handed a ground space of the wrong kind."""


class NearSingularPalm(DPPError):
    """det K(v, v) is below tolerance: the observed points have (numerically) zero density."""


class SingularResolvent(DPPError):
    """det(1 - M_sqrt(theta) K M_sqrt(theta)) is numerically zero."""


class ZeroProbabilityStratum(DPPError):
    """The event {xi_1(Lambda) = m} has no mass."""


class ZeroProbabilityObservation(DPPError):
    """The observed mark-1 configuration has no mass in the tabulated process."""


class NotAValidDPP(DPPError):
    """Kernel produces probabilities outside [0, 1] beyond roundoff."""


class EigenvalueOutOfRange(DPPError):
    """Spectrum of the symmetrized kernel leaves [0, 1] beyond the clipping window."""


class GramBreakdown(DPPError):
    """Discrete measure cannot support the requested number of orthogonal polynomials."""


class MomentsNotConverged(DPPError):
    """Hankel/Toeplitz moment matrix is too ill-conditioned to trust."""


class IntegrableConstraintError(DPPError):
    """f(x)^T g(x) does not vanish on the nodes."""
