"""Discrete-time stochastic samplers: constant SGD, SGLD, SGFS, OU Euler.

Every chain reduces to the same inner iteration

    theta <- theta - M_g @ g_hat(theta) + M_n @ eta_t

with a per-algorithm gradient matrix ``M_g``, optional noise matrix ``M_n``,
and fresh with-replacement minibatches. The iteration runs in the kernel
backend (compiled extension or pure-numpy twin); minibatch indices and
Gaussian draws come from two counter-based Philox streams derived from the
config seed, generated in fixed-size blocks by the driver so results do not
depend on the backend's internals or the block size.

A chain is deterministic given (problem, theta0, config, seed). Setting
``minibatch_size == N`` switches to the exact full batch (zero gradient
noise) instead of resampling.
"""

from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from . import _kernels
from .exceptions import DivergenceError, StabilityError
from .linalg import psd_factor, real_eig_range
from .stationary import GaussianApprox, dense_matrix

DIVERGENCE_THRESHOLD = 1e8

_BLOCK_ITERS = 4096
_BLOCK_SCALAR_BUDGET = 1 << 21


@dataclass
class SamplerConfig:
    """Chain parameters; ``burn_in=None`` requests the ten-relaxation default.

    ``preconditioner`` and ``injected_noise_cov`` accept None, scalar,
    diagonal (1-D), or full matrices, like the tuning functions.
    """

    epsilon: float
    minibatch_size: int
    n_samples: int
    preconditioner: Union[None, float, np.ndarray] = None
    injected_noise_cov: Union[None, float, np.ndarray] = None
    burn_in: Optional[int] = None
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.minibatch_size < 1:
            raise ValueError("minibatch_size must be at least 1")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")


@dataclass(frozen=True)
class Chain:
    """Recorded post-burn-in iterates plus the config that produced them."""

    iterates: np.ndarray
    algorithm: str
    config: SamplerConfig


def _streams(seed):
    root = np.random.SeedSequence(seed)
    idx_seq, noise_seq = root.spawn(2)
    return (
        np.random.Generator(np.random.Philox(idx_seq)),
        np.random.Generator(np.random.Philox(noise_seq)),
    )


def _drive_chain(
    kernel_args,
    theta0,
    grad_mat,
    noise_mat,
    *,
    n_examples,
    minibatch_size,
    n_samples,
    burn_in,
    thin,
    seed,
    algorithm,
    config,
    full_batch=False,
):
    kind, X, y_real, y_class, n_classes, lam_over_n = kernel_args
    theta = np.array(theta0, dtype=np.float64).reshape(-1)
    dim = theta.shape[0]
    grad_mat = np.ascontiguousarray(grad_mat, dtype=np.float64)
    if noise_mat is not None:
        noise_mat = np.ascontiguousarray(noise_mat, dtype=np.float64)
        if not noise_mat.any():
            noise_mat = None
    total = burn_in + (n_samples - 1) * thin + 1
    out = np.empty((n_samples, dim))
    rng_idx, rng_noise = _streams(seed)
    width = max(minibatch_size, dim, 1)
    block = int(max(1, min(_BLOCK_ITERS, _BLOCK_SCALAR_BUDGET // width)))
    if kind == _kernels.MODEL_IDENTITY:
        idx_pool = np.zeros((block, 1), dtype=np.int64)
    elif full_batch:
        idx_pool = np.tile(np.arange(n_examples, dtype=np.int64), (block, 1))
    else:
        idx_pool = None
    dummy_noise = np.zeros((1, 1))
    recorded = 0
    done = 0
    while done < total:
        length = min(block, total - done)
        if idx_pool is not None:
            idx = idx_pool[:length]
        else:
            idx = rng_idx.integers(
                0, n_examples, size=(length, minibatch_size), dtype=np.int64
            )
        if noise_mat is not None:
            eta = rng_noise.standard_normal((length, dim))
        else:
            eta = dummy_noise
        recorded, diverged = _kernels.run_chain_block(
            kind,
            X,
            y_real,
            y_class,
            n_classes,
            lam_over_n,
            theta,
            grad_mat,
            noise_mat,
            idx,
            eta,
            done,
            burn_in,
            thin,
            out,
            recorded,
            DIVERGENCE_THRESHOLD,
        )
        if diverged >= 0:
            raise DivergenceError(
                f"{algorithm} chain diverged at iteration {diverged} "
                f"(|theta| exceeded {DIVERGENCE_THRESHOLD:.0e})",
                iteration=int(diverged),
                algorithm=algorithm,
            )
        done += length
    return Chain(iterates=out, algorithm=algorithm, config=config)


def _auto_burn_in(grad_mat, problem, theta0):
    """Ten relaxation times of the slowest linearized mode."""
    rates, _ = _relaxation_range(grad_mat, problem.hessian(theta0))
    return int(np.ceil(10.0 / rates))


def _relaxation_range(grad_mat, hessian):
    low, high = real_eig_range(grad_mat @ hessian)
    if low <= 0.0:
        raise StabilityError(
            "preconditioned system is not contracting (non-positive relaxation rate)"
        )
    return low, high


def _resolve_burn_in(config, grad_mat, problem, theta0):
    if config.burn_in is not None:
        return config.burn_in
    return _auto_burn_in(grad_mat, problem, theta0)


def _validate_batch(config, problem):
    if config.minibatch_size > problem.n_examples:
        raise ValueError(
            f"minibatch_size {config.minibatch_size} exceeds N={problem.n_examples}"
        )


def run_constant_sgd(problem, theta0, config):
    """Constant-rate SGD, optionally preconditioned: theta <- theta - eps H g_hat."""
    _validate_batch(config, problem)
    dim = problem.param_dim
    H = dense_matrix(config.preconditioner, dim, "preconditioner")
    grad_mat = config.epsilon * H
    burn_in = _resolve_burn_in(config, grad_mat, problem, theta0)
    return _drive_chain(
        problem._kernel_args(),
        theta0,
        grad_mat,
        None,
        n_examples=problem.n_examples,
        minibatch_size=config.minibatch_size,
        n_samples=config.n_samples,
        burn_in=burn_in,
        thin=config.thin,
        seed=config.seed,
        algorithm="sgd",
        config=replace(config, burn_in=burn_in),
        full_batch=config.minibatch_size == problem.n_examples,
    )


def run_sgld(problem, theta0, config):
    """Langevin chain theta <- theta - (eps/2) N g_hat + sqrt(eps) eta.

    The N scaling makes the small-eps stationary law the posterior
    ``exp(-N * loss)`` under this package's averaged-loss convention.
    """
    _validate_batch(config, problem)
    dim = problem.param_dim
    N = problem.n_examples
    grad_mat = 0.5 * config.epsilon * N * np.eye(dim)
    noise_mat = np.sqrt(config.epsilon) * np.eye(dim)
    burn_in = _resolve_burn_in(config, grad_mat, problem, theta0)
    return _drive_chain(
        problem._kernel_args(),
        theta0,
        grad_mat,
        noise_mat,
        n_examples=N,
        minibatch_size=config.minibatch_size,
        n_samples=config.n_samples,
        burn_in=burn_in,
        thin=config.thin,
        seed=config.seed,
        algorithm="sgld",
        config=replace(config, burn_in=burn_in),
        full_batch=config.minibatch_size == N,
    )


def run_sgfs(problem, theta0, config):
    """Fisher-scoring chain theta <- theta - eps H g_hat + sqrt(eps) H E eta."""
    _validate_batch(config, problem)
    if config.preconditioner is None:
        raise ValueError("run_sgfs requires config.preconditioner")
    dim = problem.param_dim
    H = dense_matrix(config.preconditioner, dim, "preconditioner")
    EE = dense_matrix(
        0.0 if config.injected_noise_cov is None else config.injected_noise_cov,
        dim,
        "injected_noise_cov",
    )
    E = psd_factor(EE, "injected_noise_cov")
    grad_mat = config.epsilon * H
    noise_mat = np.sqrt(config.epsilon) * (H @ E)
    burn_in = _resolve_burn_in(config, grad_mat, problem, theta0)
    return _drive_chain(
        problem._kernel_args(),
        theta0,
        grad_mat,
        noise_mat,
        n_examples=problem.n_examples,
        minibatch_size=config.minibatch_size,
        n_samples=config.n_samples,
        burn_in=burn_in,
        thin=config.thin,
        seed=config.seed,
        algorithm="sgfs",
        config=replace(config, burn_in=burn_in),
        full_batch=config.minibatch_size == problem.n_examples,
    )


def run_ou_euler(A, B_scaled, theta0, dt, steps, seed, burn_in=0, thin=1):
    """Euler-Maruyama chain for d theta = -A theta dt + B_scaled dW.

    Validates both continuous stability (eigenvalues of A in the right half
    plane) and the discrete step bound ``dt |eig|^2 / Re(eig) < 2``. Records
    every ``thin``-th post-burn-in step of the ``steps`` performed.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    dim = A.shape[0]
    eigs = np.linalg.eigvals(A)
    if np.min(eigs.real) <= 0.0:
        raise StabilityError("A must have eigenvalues with positive real parts")
    discrete = dt * np.abs(eigs) ** 2 / eigs.real
    if np.max(discrete) >= 2.0:
        raise StabilityError(
            f"dt={dt} violates the Euler stability bound (max factor "
            f"{np.max(discrete):.3f} >= 2)"
        )
    if steps <= burn_in:
        raise ValueError("steps must exceed burn_in")
    n_samples = (steps - 1 - burn_in) // thin + 1
    config = SamplerConfig(
        epsilon=dt,
        minibatch_size=1,
        n_samples=n_samples,
        burn_in=burn_in,
        thin=thin,
        seed=seed,
    )
    kernel_args = (
        _kernels.MODEL_IDENTITY,
        np.zeros((1, 1)),
        np.zeros(1),
        np.zeros(1, dtype=np.int64),
        0,
        0.0,
    )
    B_scaled = dense_matrix(B_scaled, dim, "B_scaled")
    return _drive_chain(
        kernel_args,
        theta0,
        dt * A,
        np.sqrt(dt) * B_scaled,
        n_examples=1,
        minibatch_size=1,
        n_samples=n_samples,
        burn_in=burn_in,
        thin=thin,
        seed=seed,
        algorithm="ou-euler",
        config=config,
    )


def empirical_moments(chain):
    """Sample mean and unbiased sample covariance of a chain's iterates."""
    iterates = np.asarray(getattr(chain, "iterates", chain), dtype=np.float64)
    if iterates.ndim == 1:
        iterates = iterates[:, None]
    n = iterates.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 samples to estimate moments, got {n}")
    mean = iterates.mean(axis=0)
    centered = iterates - mean
    cov = centered.T @ centered / (n - 1)
    return GaussianApprox(mean, 0.5 * (cov + cov.T))
