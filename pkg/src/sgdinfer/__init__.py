"""Constant-rate SGD as an approximate Gaussian posterior sampler.

The package predicts the stationary distribution of constant-step stochastic
gradient descent through its Ornstein-Uhlenbeck limit, tunes learning rates
and preconditioners to minimize KL divergence to the Gaussian posterior,
runs SGD/SGLD/SGFS chains for comparison, and learns prior precisions by
variational EM. See README.md for the CLI pipeline.
"""

from . import data, hyperopt, linalg, models, samplers, stationary
from ._kernels import BACKEND as KERNEL_BACKEND
from .exceptions import (
    ConfigError,
    ConvergenceError,
    DataFormatError,
    DegenerateMomentError,
    DegenerateNoiseError,
    DivergenceError,
    FactorizationError,
    NormalizationError,
    StabilityError,
)

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "ConfigError",
    "ConvergenceError",
    "DataFormatError",
    "DegenerateMomentError",
    "DegenerateNoiseError",
    "DivergenceError",
    "FactorizationError",
    "NormalizationError",
    "StabilityError",
    "data",
    "hyperopt",
    "linalg",
    "models",
    "samplers",
    "stationary",
]
