"""Exception hierarchy shared by the simulation modules."""


class QcorrError(Exception):
    """Base class for all errors raised by qcorr."""


class CloudSamplingError(QcorrError):
    """Rejection sampling could not place the atoms at the requested separation."""


class SingularSystemError(QcorrError):
    """The evolution matrix could not be inverted for a steady state."""


class IntegratorError(QcorrError):
    """Time stepping failed to converge or violated a structural invariant."""


class DegenerateIntensityError(QcorrError):
    """The detected intensity is too small to normalise a correlation function."""


class BudgetExceededError(QcorrError):
    """A requested computation exceeds the configured size budget."""


class RealizationError(QcorrError):
    """A single disorder realization failed inside an ensemble run."""

    def __init__(self, index, seed, cause):
        self.index = index
        self.seed = seed
        self.cause = cause
        super().__init__(f"realization {index} (seed {seed}) failed: {cause}")
