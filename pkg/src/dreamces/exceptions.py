"""Exception types raised across the package."""

import numpy as np


class DreamError(Exception):
    """Base class for all package errors."""


class ValidationError(DreamError, ValueError):
    """Input arrays or configuration values violate a documented contract."""


class ConfigError(ValidationError):
    """A pipeline configuration file is malformed or inconsistent."""


class NumericalError(DreamError, ArithmeticError):
    """Base class for numerical failures (CLI exit code 3)."""


class SolverFailure(NumericalError):
    """A forward solve failed; carries the offending parameter vector."""

    def __init__(self, message, u=None):
        super().__init__(message)
        self.u = None if u is None else np.array(u, copy=True)


class UnsupportedGradient(DreamError, NotImplementedError):
    """The model does not provide exact gradients."""


class RegularizationFailure(NumericalError):
    """The Kalman gain system could not be solved."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class TrainingDivergence(NumericalError):
    """Loss became non-finite while training a network."""

    def __init__(self, epoch, learning_rate):
        super().__init__(
            f"training diverged (non-finite loss) at epoch {epoch} "
            f"with learning rate {learning_rate:g}"
        )
        self.epoch = epoch
        self.learning_rate = learning_rate


class RankDeficiencyError(NumericalError):
    """A Jacobian has a singular value below the rank floor."""

    def __init__(self, which, smallest):
        super().__init__(
            f"{which} Jacobian is rank deficient "
            f"(smallest singular value {smallest:.3e})"
        )
        self.which = which
        self.smallest = smallest


class FormatError(DreamError, ValueError):
    """A persisted file has the wrong magic bytes, version or layout."""
