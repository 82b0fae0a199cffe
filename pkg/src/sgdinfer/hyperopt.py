"""Joint learning of softmax weights and the prior precision by variational EM.

The E-step is implicit: constant-rate SGD's stationary distribution plays the
role of the variational posterior, so plain SGD iterates double as posterior
samples. The M-step maximizes the expected log-joint over the prior precision
in closed form, fed by an exponentially weighted running average of the
squared parameter norm.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter
from scipy.special import logsumexp

from .data import train_val_split
from .exceptions import DegenerateMomentError
from .models import TASK_SOFTMAX, ModelProblem, gradient_noise_covariance
from .samplers import SamplerConfig, run_constant_sgd
from .stationary import optimal_scalar_rate

_LOG_2PI = float(np.log(2.0 * np.pi))

_MOMENT_FLOOR = 1e-30


@dataclass
class VemConfig:
    """Knobs for the VEM loop.

    ``sgd`` supplies the step size (initial value when ``auto_tune``), the
    minibatch size, and the seed; its chain-recording fields are unused here.
    The loop runs ``max_outer_iters`` rounds of ``lambda_update_period`` SGD
    iterations, refreshing the prior precision after each round.
    """

    sgd: SamplerConfig
    lambda0: float
    moment_decay: float = 0.999
    lambda_update_period: int = 100
    max_outer_iters: int = 200
    retune_factor: float = 2.0
    validation_fraction: float = 0.2
    auto_tune: bool = True

    def __post_init__(self):
        if not self.lambda0 > 0.0:
            raise ValueError("lambda0 must be positive")
        if not 0.0 < self.moment_decay < 1.0:
            raise ValueError("moment_decay must lie in (0, 1)")
        if self.lambda_update_period < 1 or self.max_outer_iters < 1:
            raise ValueError("update period and outer iterations must be at least 1")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in (0, 1)")


@dataclass
class VemTrace:
    """Per-update records of the running moment, precision, and held-out loss."""

    iterations: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    moments: list = field(default_factory=list)
    validation_losses: list = field(default_factory=list)

    def append(self, iteration, lam, moment, validation_loss):
        self.iterations.append(int(iteration))
        self.lambdas.append(float(lam))
        self.moments.append(float(moment))
        self.validation_losses.append(float(validation_loss))


def softmax_log_joint(dataset, theta, lam):
    """Negative log-joint of softmax regression with a normal prior.

    ``(lam/2) sum theta^2 - (DK/2) log lam + (DK/2) log 2pi
    + sum_n [logsumexp_k(x_n^T theta_k) - x_n^T theta_{y_n}]``.
    """
    if dataset.task != TASK_SOFTMAX:
        raise ValueError(f"softmax_log_joint needs a softmax dataset, got {dataset.task}")
    if not lam > 0.0:
        raise ValueError(f"lambda must be positive, got {lam}")
    dim = dataset.param_dim
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.shape != (dim,):
        raise ValueError(f"theta has length {theta.shape[0]}, expected {dim}")
    logits = dataset.features @ theta.reshape(dataset.n_features, dataset.n_classes)
    picked = logits[np.arange(dataset.n_examples), dataset.targets - 1]
    nll = float(np.sum(logsumexp(logits, axis=1) - picked))
    prior = (
        0.5 * lam * float(theta @ theta)
        - 0.5 * dim * np.log(lam)
        + 0.5 * dim * _LOG_2PI
    )
    return nll + prior


def lambda_m_step(moment, n_features, n_classes):
    """Closed-form M-step: the precision maximizing the expected log-joint.

    ``lam = D K / E_q[sum theta^2]``, the unique stationary point of
    ``-(lam/2) m + (DK/2) log lam`` in lam.
    """
    if not moment > 0.0:
        raise DegenerateMomentError(
            f"second moment must be positive, got {moment} (collapsed posterior?)"
        )
    return n_features * n_classes / moment


def validation_loss(dataset_val, theta):
    """Mean held-out negative log-likelihood, prior terms excluded."""
    if dataset_val.task != TASK_SOFTMAX:
        raise ValueError(f"validation_loss needs a softmax dataset, got {dataset_val.task}")
    if dataset_val.n_examples < 1:
        raise ValueError("validation set is empty")
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.shape != (dataset_val.param_dim,):
        raise ValueError(
            f"theta has length {theta.shape[0]}, expected {dataset_val.param_dim}"
        )
    logits = dataset_val.features @ theta.reshape(
        dataset_val.n_features, dataset_val.n_classes
    )
    picked = logits[np.arange(dataset_val.n_examples), dataset_val.targets - 1]
    return float(np.mean(logsumexp(logits, axis=1) - picked))


def _tune_rate(dataset, lam, theta, minibatch_size):
    problem = ModelProblem(dataset, lam)
    cov, _ = gradient_noise_covariance(problem, theta)
    return optimal_scalar_rate(
        cov, dataset.param_dim, minibatch_size, dataset.n_examples
    )


def run_vem(dataset, config, val_dataset=None):
    """Alternate constant-SGD rounds with closed-form precision updates.

    Returns ``(theta, lam, trace)``. When no validation set is passed, one is
    split off with ``config.validation_fraction`` (seeded by the SGD seed).
    The running moment uses bias-corrected exponential averaging; a collapsed
    moment raises :class:`DegenerateMomentError` instead of letting the
    precision diverge.
    """
    if dataset.task != TASK_SOFTMAX:
        raise ValueError(f"run_vem needs a softmax dataset, got {dataset.task}")
    if val_dataset is None:
        train, val = train_val_split(
            dataset, 1.0 - config.validation_fraction, config.sgd.seed
        )
    else:
        train, val = dataset, val_dataset

    dim = train.param_dim
    period = config.lambda_update_period
    decay = config.moment_decay
    theta = np.zeros(dim)
    lam = config.lambda0
    lam_anchor = lam
    if config.auto_tune:
        epsilon = _tune_rate(train, lam, theta, config.sgd.minibatch_size)
    else:
        epsilon = config.sgd.epsilon
    round_seeds = np.random.SeedSequence(config.sgd.seed).generate_state(
        config.max_outer_iters
    )

    trace = VemTrace()
    moment_state = 0.0
    iterations = 0
    for outer in range(config.max_outer_iters):
        problem = ModelProblem(train, lam)
        round_config = SamplerConfig(
            epsilon=epsilon,
            minibatch_size=config.sgd.minibatch_size,
            n_samples=period,
            burn_in=0,
            thin=1,
            seed=int(round_seeds[outer]),
        )
        chain = run_constant_sgd(problem, theta, round_config)
        theta = chain.iterates[-1].copy()
        sq_norms = np.einsum("ij,ij->i", chain.iterates, chain.iterates)
        filtered, _ = lfilter(
            [1.0 - decay], [1.0, -decay], sq_norms, zi=[decay * moment_state]
        )
        moment_state = float(filtered[-1])
        iterations += period
        moment = moment_state / (1.0 - decay**iterations)
        if not moment > _MOMENT_FLOOR:
            raise DegenerateMomentError(
                f"running moment collapsed to {moment:.3e} after {iterations} iterations"
            )
        lam = lambda_m_step(moment, train.n_features, train.n_classes)
        if config.auto_tune and (
            lam > config.retune_factor * lam_anchor
            or lam < lam_anchor / config.retune_factor
        ):
            epsilon = _tune_rate(train, lam, theta, config.sgd.minibatch_size)
            lam_anchor = lam
        trace.append(iterations, lam, moment, validation_loss(val, theta))
    return theta, lam, trace
