"""Exception types shared across the package."""


class InvmetError(Exception):
    """Base class for all package-specific errors."""


class OutsideDomainError(InvmetError, ValueError):
    """A point that must be interior to the domain is not."""


class CapabilityError(InvmetError, NotImplementedError):
    """The requested quantity is not available for this domain kind."""


class SamplingError(InvmetError, RuntimeError):
    """A sampler could not satisfy its constraints within its retry budget."""


class SolverFailure(InvmetError, RuntimeError):
    """No certified solution was found.

    The best uncertified candidate (if any) is attached for diagnostics.
    """

    def __init__(self, message, best_candidate=None):
        super().__init__(message)
        self.best_candidate = best_candidate


class SetupError(InvmetError, ValueError):
    """An experiment setup violates its geometric preconditions."""


class TopologyError(InvmetError, RuntimeError):
    """No interior path could be found between the given points."""


class GeodesicRejection(InvmetError, RuntimeError):
    """A candidate geodesic failed its isometry verification.

    Carries the verification record in ``record`` for diagnostics.
    """

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record
