"""Regression problems: losses, gradients, Hessians, MAP fits, gradient noise.

The loss is the average of per-example contributions, each of which is the
negative per-example log-likelihood plus a 1/N share of the negative log of a
Gaussian prior with precision ``regularizer``. With that scaling the posterior
density is proportional to ``exp(-N * loss)``, the Hessian of the loss at the
MAP is the ``A`` of the quadratic approximation, and the covariance of the
per-example gradients around the full gradient is the ``C = B B^T`` feeding
every stationary-distribution prediction.

Parameter layout: linear and binary-logistic use a length-D vector; softmax
uses a (D, K) weight matrix flattened row-major to length D*K, so entry
``d*K + k`` couples feature d to class k.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import expit, logsumexp

from . import _kernels
from .exceptions import ConvergenceError
from .linalg import psd_factor, symmetrize

TASK_LINEAR = "linear"
TASK_LOGISTIC = "binary-logistic"
TASK_SOFTMAX = "softmax"
TASKS = (TASK_LINEAR, TASK_LOGISTIC, TASK_SOFTMAX)

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus targets for one of the three supported tasks.

    ``targets`` holds real values for the linear task and 1-based integer
    class labels in {1..K} otherwise (matching the UCI file conventions).
    """

    features: np.ndarray
    targets: np.ndarray
    task: str
    n_classes: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}, expected one of {TASKS}")
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise ValueError(f"features must be a non-empty 2-D matrix, got {features.shape}")
        if not np.all(np.isfinite(features)):
            raise ValueError("features contain non-finite entries")
        targets = np.asarray(self.targets)
        if targets.shape != (features.shape[0],):
            raise ValueError(
                f"targets shape {targets.shape} does not match N={features.shape[0]}"
            )
        if self.task == TASK_LINEAR:
            targets = np.ascontiguousarray(targets, dtype=np.float64)
            if not np.all(np.isfinite(targets)):
                raise ValueError("targets contain non-finite entries")
            n_classes = 1
        else:
            as_int = np.ascontiguousarray(np.rint(targets), dtype=np.int64)
            if np.any(np.abs(targets - as_int) > 0):
                raise ValueError("class labels must be integers")
            targets = as_int
            n_classes = self.n_classes
            if self.task == TASK_LOGISTIC:
                n_classes = 2
            elif n_classes <= 0:
                n_classes = int(targets.max())
            if n_classes < 2:
                raise ValueError("classification needs at least 2 classes")
            if targets.min() < 1 or targets.max() > n_classes:
                raise ValueError(
                    f"labels must lie in 1..{n_classes}, got range "
                    f"[{targets.min()}, {targets.max()}]"
                )
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "n_classes", n_classes)

    @property
    def n_examples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def param_dim(self):
        if self.task == TASK_SOFTMAX:
            return self.n_features * self.n_classes
        return self.n_features


@dataclass(frozen=True)
class ModelProblem:
    """A dataset paired with a quadratic regularizer (prior precision)."""

    dataset: Dataset
    regularizer: float

    def __post_init__(self):
        if not self.regularizer > 0:
            raise ValueError(f"regularizer must be positive, got {self.regularizer}")

    @property
    def param_dim(self):
        return self.dataset.param_dim

    @property
    def n_examples(self):
        return self.dataset.n_examples

    def _theta(self, theta):
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if theta.shape != (self.param_dim,):
            raise ValueError(
                f"theta has length {theta.shape[0]}, expected {self.param_dim}"
            )
        return theta

    def _labels0(self):
        return self.dataset.targets - 1

    def neg_log_prior(self, theta):
        lam = self.regularizer
        dim = self.param_dim
        return (
            0.5 * lam * float(theta @ theta)
            - 0.5 * dim * np.log(lam)
            + 0.5 * dim * _LOG_2PI
        )

    def _nll_all(self, theta):
        """Per-example negative log-likelihoods, shape (N,)."""
        X = self.dataset.features
        task = self.dataset.task
        if task == TASK_LINEAR:
            residual = X @ theta - self.dataset.targets
            return 0.5 * residual**2 + 0.5 * _LOG_2PI
        if task == TASK_LOGISTIC:
            z = X @ theta
            return np.logaddexp(0.0, z) - self._labels0() * z
        logits = X @ theta.reshape(self.dataset.n_features, self.dataset.n_classes)
        return logsumexp(logits, axis=1) - logits[
            np.arange(self.n_examples), self._labels0()
        ]

    def per_example_loss(self, theta, n):
        """Loss contribution of example ``n`` (0-based): NLL_n + prior/N."""
        theta = self._theta(theta)
        n = int(n)
        if not 0 <= n < self.n_examples:
            raise IndexError(f"example index {n} out of range 0..{self.n_examples - 1}")
        return float(self._nll_all(theta)[n]) + self.neg_log_prior(theta) / self.n_examples

    def full_loss(self, theta):
        theta = self._theta(theta)
        return float(np.mean(self._nll_all(theta))) + self.neg_log_prior(theta) / self.n_examples

    def per_example_gradients(self, theta):
        """Gradients of every per-example loss, stacked into an (N, P) matrix."""
        theta = self._theta(theta)
        X = self.dataset.features
        task = self.dataset.task
        if task == TASK_LINEAR:
            residual = X @ theta - self.dataset.targets
            grads = X * residual[:, None]
        elif task == TASK_LOGISTIC:
            margin = expit(X @ theta) - self._labels0()
            grads = X * margin[:, None]
        else:
            probs = self._softmax_probs(theta)
            probs[np.arange(self.n_examples), self._labels0()] -= 1.0
            grads = np.einsum("nd,nk->ndk", X, probs).reshape(self.n_examples, -1)
        return grads + (self.regularizer / self.n_examples) * theta

    def _softmax_probs(self, theta):
        logits = self.dataset.features @ theta.reshape(
            self.dataset.n_features, self.dataset.n_classes
        )
        logits -= logits.max(axis=1, keepdims=True)
        np.exp(logits, out=logits)
        logits /= logits.sum(axis=1, keepdims=True)
        return logits

    def full_gradient(self, theta):
        """Gradient of the average loss, (1/N) sum_n grad l_n."""
        theta = self._theta(theta)
        X = self.dataset.features
        task = self.dataset.task
        N = self.n_examples
        if task == TASK_LINEAR:
            likelihood = X.T @ (X @ theta - self.dataset.targets) / N
        elif task == TASK_LOGISTIC:
            likelihood = X.T @ (expit(X @ theta) - self._labels0()) / N
        else:
            probs = self._softmax_probs(theta)
            probs[np.arange(N), self._labels0()] -= 1.0
            likelihood = (X.T @ probs).reshape(-1) / N
        return likelihood + (self.regularizer / N) * theta

    def minibatch_gradient(self, theta, batch_indices):
        """Average gradient over an explicit index batch (0-based, with repeats)."""
        theta = self._theta(theta)
        batch = np.asarray(batch_indices, dtype=np.int64).reshape(-1)
        if batch.size == 0:
            raise ValueError("batch must contain at least one index")
        if batch.min() < 0 or batch.max() >= self.n_examples:
            raise IndexError("batch index out of range")
        X = self.dataset.features[batch]
        task = self.dataset.task
        S = batch.size
        if task == TASK_LINEAR:
            likelihood = X.T @ (X @ theta - self.dataset.targets[batch]) / S
        elif task == TASK_LOGISTIC:
            y = self._labels0()[batch]
            likelihood = X.T @ (expit(X @ theta) - y) / S
        else:
            K = self.dataset.n_classes
            logits = X @ theta.reshape(self.dataset.n_features, K)
            logits -= logits.max(axis=1, keepdims=True)
            np.exp(logits, out=logits)
            logits /= logits.sum(axis=1, keepdims=True)
            logits[np.arange(S), self._labels0()[batch]] -= 1.0
            likelihood = (X.T @ logits).reshape(-1) / S
        return likelihood + (self.regularizer / self.n_examples) * theta

    def hessian(self, theta):
        """Exact Hessian of the average loss (symmetric positive definite)."""
        theta = self._theta(theta)
        X = self.dataset.features
        task = self.dataset.task
        N = self.n_examples
        if task == TASK_LINEAR:
            likelihood = X.T @ X / N
        elif task == TASK_LOGISTIC:
            p = expit(X @ theta)
            likelihood = (X * (p * (1.0 - p))[:, None]).T @ X / N
        else:
            probs = self._softmax_probs(theta)
            # per-example curvature kron(x x^T, diag(p) - p p^T), summed
            curv = np.einsum("nk,nl->nkl", -probs, probs)
            curv[:, np.arange(probs.shape[1]), np.arange(probs.shape[1])] += probs
            likelihood = np.einsum("nd,ne,nkl->dkel", X, X, curv).reshape(
                self.param_dim, self.param_dim
            ) / N
        hess = likelihood + (self.regularizer / N) * np.eye(self.param_dim)
        return symmetrize(hess)

    def _kernel_args(self):
        data = self.dataset
        dummy_real = np.zeros(1)
        dummy_int = np.zeros(1, dtype=np.int64)
        if data.task == TASK_LINEAR:
            kind, y_real, y_class = _kernels.MODEL_LINEAR, data.targets, dummy_int
        elif data.task == TASK_LOGISTIC:
            kind, y_real, y_class = _kernels.MODEL_LOGISTIC, dummy_real, self._labels0()
        else:
            kind, y_real, y_class = _kernels.MODEL_SOFTMAX, dummy_real, self._labels0()
        return (
            kind,
            data.features,
            np.ascontiguousarray(y_real, dtype=np.float64),
            np.ascontiguousarray(y_class, dtype=np.int64),
            data.n_classes,
            self.regularizer / self.n_examples,
        )


@dataclass(frozen=True)
class NoiseProfile:
    """Everything the stationary analysis needs, measured at the MAP point."""

    theta_star: np.ndarray
    hessian: np.ndarray
    noise_cov: np.ndarray
    noise_factor: np.ndarray
    n_examples: int
    grad_inf_norm: float = field(default=np.nan)


def fit_map(problem, theta0=None, tol=1e-8, max_iters=100):
    """Fit the MAP point by damped Newton with Armijo backtracking.

    Deterministic given its inputs. Raises :class:`ConvergenceError` carrying
    the best iterate if ``max_iters`` is exhausted before the gradient
    infinity norm drops below ``tol``.
    """
    theta = (
        np.zeros(problem.param_dim)
        if theta0 is None
        else np.array(theta0, dtype=np.float64).reshape(-1)
    )
    best_theta, best_norm = theta.copy(), np.inf
    for _ in range(max_iters):
        grad = problem.full_gradient(theta)
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm < best_norm:
            best_theta, best_norm = theta.copy(), grad_norm
        if grad_norm <= tol:
            return theta
        hess = problem.hessian(theta)
        step = scipy.linalg.cho_solve(scipy.linalg.cho_factor(hess, lower=True), grad)
        loss = problem.full_loss(theta)
        slope = float(grad @ step)
        t = 1.0
        while t > 1e-12 and problem.full_loss(theta - t * step) > loss - 1e-4 * t * slope:
            t *= 0.5
        theta = theta - t * step
    grad_norm = float(np.max(np.abs(problem.full_gradient(theta))))
    if grad_norm <= tol:
        return theta
    if grad_norm < best_norm:
        best_theta, best_norm = theta, grad_norm
    raise ConvergenceError(
        f"MAP fit did not reach tol={tol} in {max_iters} iterations "
        f"(best gradient norm {best_norm:.3e})",
        best_theta=best_theta,
        grad_inf_norm=best_norm,
    )


def gradient_noise_covariance(problem, theta):
    """Covariance of per-example gradients around the full gradient.

    Returns ``(C, B)`` with ``B B^T = C``; a size-S with-replacement minibatch
    gradient then has covariance ``C / S``.
    """
    grads = problem.per_example_gradients(theta)
    centered = grads - grads.mean(axis=0)
    cov = symmetrize(centered.T @ centered / problem.n_examples)
    return cov, psd_factor(cov, "gradient noise covariance")


def profile_noise(problem, theta_star):
    """Bundle Hessian and gradient-noise estimates at a fitted MAP point."""
    theta_star = np.asarray(theta_star, dtype=np.float64).reshape(-1)
    cov, factor = gradient_noise_covariance(problem, theta_star)
    return NoiseProfile(
        theta_star=theta_star,
        hessian=problem.hessian(theta_star),
        noise_cov=cov,
        noise_factor=factor,
        n_examples=problem.n_examples,
        grad_inf_norm=float(np.max(np.abs(problem.full_gradient(theta_star)))),
    )
