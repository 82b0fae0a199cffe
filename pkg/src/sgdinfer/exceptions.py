"""Exception types shared across the package."""

import numpy as np


class StabilityError(ValueError):
    """A system matrix has an eigenvalue on the wrong side of the stability boundary."""


class FactorizationError(np.linalg.LinAlgError):
    """A matrix required to be (semi-)definite failed to factorize."""


class DegenerateNoiseError(ValueError):
    """Gradient noise is zero where a tuning formula needs to divide by it."""


class ConvergenceError(RuntimeError):
    """An iterative optimizer ran out of iterations.

    Carries the best iterate seen so far in ``best_theta`` and its gradient
    infinity norm in ``grad_inf_norm``.
    """

    def __init__(self, message, best_theta=None, grad_inf_norm=None):
        super().__init__(message)
        self.best_theta = best_theta
        self.grad_inf_norm = grad_inf_norm


class DivergenceError(RuntimeError):
    """A sampling chain exceeded the divergence threshold.

    ``iteration`` is the 0-based global iteration at which the threshold was
    crossed; ``algorithm`` names the chain that diverged.
    """

    def __init__(self, message, iteration=None, algorithm=None):
        super().__init__(message)
        self.iteration = iteration
        self.algorithm = algorithm


class DegenerateMomentError(RuntimeError):
    """The running second moment collapsed, signalling a degenerate posterior fit."""


class DataFormatError(ValueError):
    """A data file failed to parse; the message carries the row/column location."""


class NormalizationError(ValueError):
    """Normalization was asked to rescale an all-zero vector."""


class ConfigError(ValueError):
    """A run configuration is inconsistent or incomplete."""
