"""Exception types raised across the package."""


class KirchsimError(Exception):
    """Base class for all package-specific errors."""


class NegativePowerOnKernel(KirchsimError):
    """Negative operator power applied to a vector with mass on a zero eigenvalue."""


class NonpositiveCutoff(KirchsimError):
    """Frequency split requested with cutoff <= 0."""


class NegativeSigma(KirchsimError):
    """Nonlinearity evaluated at a negative argument."""


class ZeroWeightNotInvertible(KirchsimError):
    """Inverse requested for the identically-zero weight."""


class WrongFamily(KirchsimError):
    """Operation requires a specific weight or nonlinearity family."""


class NonFiniteState(KirchsimError):
    """Integration produced NaN or Inf coordinates."""


class DriftExceeded(KirchsimError):
    """Recorded Hamiltonian drift exceeds the step-size failure threshold."""


class CoefficientBoundViolated(KirchsimError):
    """Sampled propagation speed left its certified range."""


class EmptyTrajectory(KirchsimError):
    """Constants requested from a trajectory with no samples."""


class MissingField(KirchsimError):
    """A constants bundle lacks a field required by the requested case."""


class GapTooLarge(KirchsimError):
    """Initial energy gap already violates the smallness condition at time zero."""


class LambdaConditionFails(KirchsimError):
    """High-frequency smallness condition fails for the chosen cutoff."""


class EpsilonTooLarge(KirchsimError):
    """Perturbation size above the admissible threshold for the requested case."""


class ZeroE(KirchsimError):
    """Interpolation requested for a sequence with zero total mass."""


class InfiniteKb(KirchsimError):
    """Weighted supremum constant could not be certified finite."""


class IncompatibleWeight(KirchsimError):
    """Envelope family does not match the weight used for the energy."""


class HypothesisFailed(KirchsimError):
    """A named hypothesis inequality of an experiment failed.

    The failing inequality's short name is carried in ``name``.
    """

    def __init__(self, name, message=""):
        self.name = name
        super().__init__(f"{name}: {message}" if message else name)


class ConfigError(KirchsimError):
    """Malformed scenario configuration (unknown keys, bad types, bad values)."""
