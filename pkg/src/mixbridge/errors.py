"""Exception types shared across mixbridge modules."""


class MixBridgeError(Exception):
    """Base class for all mixbridge errors."""


class NotSymmetric(MixBridgeError, ValueError):
    """Matrix violates the symmetry tolerance."""


class NotPositiveDefinite(MixBridgeError, ValueError):
    """Matrix has an eigenvalue below the positive-definiteness floor."""


class DimensionMismatch(MixBridgeError, ValueError):
    """Operands have incompatible dimensions."""


class DomainError(MixBridgeError, ValueError):
    """Scalar argument outside its admissible interval (typically t in [0, 1])."""


class InvalidSimplex(MixBridgeError, ValueError):
    """Weight vector has a nonpositive entry or does not sum to one."""


class PatternInfeasible(MixBridgeError, ValueError):
    """Structured prior pattern requires a square coupling."""


class SupportViolation(MixBridgeError, ValueError):
    """Plan puts mass where the prior coupling has none."""


class EmptyCluster(MixBridgeError, RuntimeError):
    """EM component lost all responsibility mass and re-seeding failed."""


class NotConverged(MixBridgeError, RuntimeError):
    """Iterative solver failed to reach tolerance; carries the best iterate."""

    def __init__(self, message, iterations, residuals, best=None):
        super().__init__(message)
        self.iterations = iterations
        self.residuals = residuals
        self.best = best


class NonFinite(MixBridgeError, RuntimeError):
    """Particle simulation produced a non-finite state."""


class DegeneratePosterior(MixBridgeError, RuntimeError):
    """All label log-weights underflowed; the path is off-support."""


class BoxTooSmall(MixBridgeError, ValueError):
    """Discretization box misses more than the allowed density mass."""


class UnknownPreset(MixBridgeError, KeyError):
    """Requested experiment preset does not exist."""
