"""Exception types shared across the package."""


class TomographyError(Exception):
    """Base class for all package errors."""


class MalformedTopologyError(TomographyError, ValueError):
    """Topology input is cyclic, disconnected or otherwise unusable."""


class SingularCovarianceError(TomographyError, ValueError):
    """A covariance matrix that must be inverted is singular."""


class NonIdentifiableDesignError(TomographyError, ValueError):
    """The projection design does not identify the parameters."""


class InvalidSampleError(TomographyError, ValueError):
    """Sample block violates its preconditions (size, finiteness)."""


class DegenerateDistributionError(TomographyError, ValueError):
    """Distribution has zero spread where a positive one is required."""


class ConfigError(TomographyError, ValueError):
    """Experiment configuration file is malformed."""
