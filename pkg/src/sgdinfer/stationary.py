"""Stationary-distribution predictions and KL-optimal tuning rules.

Conventions: ``A`` is the Hessian of the average loss at the MAP, so the
Gaussian reference posterior has precision ``N A``. ``noise_cov`` is the
per-example gradient-noise covariance ``C = B B^T``; a size-S minibatch
gradient has covariance ``C / S``. The Fisher-scoring (SGFS) formulas are
single-minibatch formulas: when chains run at minibatch size S, pass the
effective covariance ``C / S`` as ``noise_cov``.

Preconditioners and injected-noise covariances are accepted as None
(identity / zero), a scalar (multiple of the identity), a 1-D array (a
diagonal), or a full square matrix.
"""

import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .exceptions import DegenerateNoiseError, FactorizationError
from .linalg import (
    add_jitter,
    as_square_matrix,
    inverse_pd,
    logdet_pd,
    real_eig_range,
    require_symmetric,
    solve_lyapunov,
    symmetrize,
)

MatrixLike = Union[None, float, np.ndarray]


@dataclass(frozen=True)
class GaussianApprox:
    """A Gaussian summarized by mean and covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        cov = require_symmetric(self.covariance, "covariance")
        if cov.shape[0] != mean.shape[0]:
            raise ValueError("mean and covariance dimensions differ")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self):
        return self.mean.shape[0]


@dataclass
class TuningResult:
    """One algorithm's tuned knobs: step size, batch size, H, injected noise."""

    epsilon: float
    minibatch_size: int
    preconditioner: MatrixLike = None
    injected_noise_cov: MatrixLike = None


def dense_matrix(value, dim, name="matrix"):
    """Canonicalize None/scalar/diagonal/full input to a dense (dim, dim) array."""
    if value is None:
        return np.eye(dim)
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        return float(arr) * np.eye(dim)
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise ValueError(f"{name} diagonal has length {arr.shape[0]}, expected {dim}")
        return np.diag(arr)
    return as_square_matrix(arr, name)


def _inverse_with_jitter(M, name):
    try:
        return inverse_pd(M, name)
    except FactorizationError:
        return inverse_pd(add_jitter(M), name)


def predicted_covariance_sgd(A, noise_cov, epsilon, minibatch_size, preconditioner=None):
    """Stationary covariance of (preconditioned) constant SGD.

    Solves ``(HA) X + X (HA)^T = (eps/S) H C H^T``; with ``H = I`` this is the
    plain constant-SGD stationary covariance.
    """
    A = as_square_matrix(A, "A")
    C = require_symmetric(noise_cov, "noise_cov")
    H = dense_matrix(preconditioner, A.shape[0], "preconditioner")
    drift = H @ A
    diffusion = symmetrize((epsilon / minibatch_size) * (H @ C @ H.T))
    return solve_lyapunov(drift, diffusion)


def kl_to_posterior(q_cov, A, n_examples):
    """KL(q || posterior) between zero-mean-gap Gaussians.

    ``0.5 * (N tr(A S) - log|N A| - log|S| - D)``; nonnegative, and zero
    exactly when ``q_cov`` equals the posterior covariance ``(N A)^{-1}``.
    """
    A = require_symmetric(A, "A")
    q_cov = require_symmetric(q_cov, "q_cov")
    if A.shape != q_cov.shape:
        raise ValueError("covariance and Hessian dimensions differ")
    dim = A.shape[0]
    return 0.5 * (
        n_examples * float(np.trace(A @ q_cov))
        - logdet_pd(n_examples * A, "N*A")
        - logdet_pd(q_cov, "q_cov")
        - dim
    )


def gaussian_kl(q, p):
    """KL(q || p) for two full Gaussians (means included)."""
    if q.dim != p.dim:
        raise ValueError("dimensions differ")
    p_prec = _inverse_with_jitter(p.covariance, "p covariance")
    delta = q.mean - p.mean
    return 0.5 * (
        float(np.trace(p_prec @ q.covariance))
        + float(delta @ p_prec @ delta)
        - q.dim
        + logdet_pd(p.covariance, "p covariance")
        - logdet_pd(q.covariance, "q covariance")
    )


def reference_posterior(theta_star, A, n_examples):
    """Gaussian posterior: mean at the MAP, covariance ``(N A)^{-1}``."""
    A = require_symmetric(A, "A")
    return GaussianApprox(theta_star, inverse_pd(n_examples * A, "N*A"))


def optimal_scalar_rate(noise_cov, dim, minibatch_size, n_examples):
    """KL-optimal constant step size ``2 D S / (N tr(C))``."""
    trace = float(np.trace(require_symmetric(noise_cov, "noise_cov")))
    if trace <= 0.0:
        raise DegenerateNoiseError("gradient noise has non-positive trace")
    return 2.0 * dim * minibatch_size / (n_examples * trace)


def optimal_full_preconditioner(noise_cov, epsilon, minibatch_size, n_examples):
    """KL-optimal dense preconditioner ``(2S / (eps N)) C^{-1}``.

    With this choice the predicted stationary covariance is exactly the
    posterior covariance and the KL divergence vanishes.
    """
    C = require_symmetric(noise_cov, "noise_cov")
    return (2.0 * minibatch_size / (epsilon * n_examples)) * _inverse_with_jitter(
        C, "noise_cov"
    )


def optimal_diag_preconditioner(noise_cov, epsilon, minibatch_size, n_examples):
    """KL-optimal diagonal preconditioner, ``H_kk = 2S / (eps N C_kk)``."""
    diag = np.diag(require_symmetric(noise_cov, "noise_cov"))
    if np.any(diag <= 0.0):
        raise DegenerateNoiseError("gradient noise has a non-positive diagonal entry")
    return 2.0 * minibatch_size / (epsilon * n_examples * diag)


def optimal_sqrt_rate(noise_cov, dim, minibatch_size, n_examples):
    """KL-optimal step size for SGD preconditioned with ``G^{-1}``.

    ``G = sqrt(diag(C))`` is the AdaGrad-style square-root preconditioner;
    the optimal rate is ``2 D S / (N tr(C G^{-1}))``.
    """
    diag = np.diag(require_symmetric(noise_cov, "noise_cov"))
    if np.any(diag <= 0.0):
        raise DegenerateNoiseError("gradient noise has a non-positive diagonal entry")
    trace = float(np.sum(diag / np.sqrt(diag)))
    return 2.0 * dim * minibatch_size / (n_examples * trace)


def sqrt_diag_preconditioner(noise_cov):
    """The ``G^{-1}`` diagonal used by the square-root tuning, as a vector."""
    diag = np.diag(require_symmetric(noise_cov, "noise_cov"))
    if np.any(diag <= 0.0):
        raise DegenerateNoiseError("gradient noise has a non-positive diagonal entry")
    return 1.0 / np.sqrt(diag)


def sgfs_optimal_preconditioner(noise_cov, injected_noise_cov, epsilon, n_examples):
    """Fisher-scoring preconditioner ``(2/N)(eps C + EE^T)^{-1}``.

    Drives the SGFS stationary distribution exactly onto the posterior
    regardless of the injected-noise covariance.
    """
    C = require_symmetric(noise_cov, "noise_cov")
    EE = dense_matrix(injected_noise_cov, C.shape[0], "injected_noise_cov")
    combined = symmetrize(epsilon * C + EE)
    return (2.0 / n_examples) * _inverse_with_jitter(combined, "combined noise")


def sgfs_diag_or_scalar_preconditioner(
    noise_cov, injected_noise_cov, epsilon, n_examples, mode
):
    """Diagonal or scalar truncation of the Fisher-scoring preconditioner.

    ``mode="diagonal"`` returns the vector ``(2/N) / (eps C_kk + EE_kk)``;
    ``mode="scalar"`` returns the float ``2 D / (N sum_k (eps C_kk + EE_kk))``.
    """
    C = require_symmetric(noise_cov, "noise_cov")
    dim = C.shape[0]
    EE = dense_matrix(injected_noise_cov, dim, "injected_noise_cov")
    combined = epsilon * np.diag(C) + np.diag(EE)
    if np.any(combined <= 0.0):
        raise DegenerateNoiseError("combined noise has a non-positive diagonal entry")
    if mode == "diagonal":
        return (2.0 / n_examples) / combined
    if mode == "scalar":
        return 2.0 * dim / (n_examples * float(np.sum(combined)))
    raise ValueError(f"mode must be 'diagonal' or 'scalar', got {mode!r}")


def sgfs_stability_noise(h_max, epsilon, noise_cov, n_examples):
    """Injected-noise diagonal keeping every Fisher-scoring rate below h_max.

    ``EE_kk = max(0, 2/(h_max N) - eps C_kk)``: coordinates whose gradient
    noise is already large enough get no injection.
    """
    if not h_max > 0.0:
        raise ValueError(f"h_max must be positive, got {h_max}")
    diag = np.diag(require_symmetric(noise_cov, "noise_cov"))
    return np.maximum(0.0, 2.0 / (h_max * n_examples) - epsilon * diag)


def predicted_covariance_sgfs(A, noise_cov, injected_noise_cov, preconditioner, epsilon):
    """Stationary covariance of the SGFS update with preconditioner H.

    Solves ``(HA) X + X (HA)^T = H (eps C + EE^T) H^T`` for the chain
    ``theta <- theta - eps H g_hat + sqrt(eps) H E eta``.
    """
    A = as_square_matrix(A, "A")
    dim = A.shape[0]
    C = require_symmetric(noise_cov, "noise_cov")
    EE = dense_matrix(injected_noise_cov, dim, "injected_noise_cov")
    H = dense_matrix(preconditioner, dim, "preconditioner")
    drift = H @ A
    diffusion = symmetrize(H @ (epsilon * C + EE) @ H.T)
    return solve_lyapunov(drift, diffusion)


def enforce_discrete_stability(epsilon, preconditioner, A, limit=2.0, target=1.8):
    """Downgrade eps so the linearized discrete update stays stable.

    The continuous-time analysis does not see the discrete stability bound
    ``max-eig(eps H A) < limit``; violations return a reduced eps hitting
    ``target`` instead, with a warning.
    """
    A = as_square_matrix(A, "A")
    H = dense_matrix(preconditioner, A.shape[0], "preconditioner")
    _, max_eig = real_eig_range(H @ A)
    if max_eig <= 0.0:
        raise DegenerateNoiseError("preconditioned Hessian has no positive eigenvalue")
    if epsilon * max_eig < limit:
        return epsilon
    downgraded = target / max_eig
    warnings.warn(
        f"step size {epsilon:.3e} violates the discrete stability bound "
        f"(eps * max-eig = {epsilon * max_eig:.3f} >= {limit}); "
        f"downgraded to {downgraded:.3e}",
        RuntimeWarning,
        stacklevel=2,
    )
    return downgraded
