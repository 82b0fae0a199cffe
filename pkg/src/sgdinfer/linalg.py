"""Dense symmetric-matrix primitives and the continuous Lyapunov solver.

Matrices are plain float64 numpy arrays. Validators raise early with precise
messages; solvers enforce their own residual guarantees. The Lyapunov solver
uses dense Kronecker vectorization (a D^2 x D^2 solve), which is exact and
fast for the dimensions this package targets (D up to a few dozen).
"""

import numpy as np
import scipy.linalg

from .exceptions import FactorizationError, StabilityError

SYMMETRY_RTOL = 1e-10
PSD_EIG_RTOL = 1e-10
LYAPUNOV_RESIDUAL_RTOL = 1e-8


def as_square_matrix(M, name="matrix"):
    """Coerce to a C-contiguous float64 square matrix, validating finiteness."""
    arr = np.ascontiguousarray(M, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def require_symmetric(M, name="matrix", rtol=SYMMETRY_RTOL):
    arr = as_square_matrix(M, name)
    scale = np.linalg.norm(arr)
    if scale > 0 and np.linalg.norm(arr - arr.T) > rtol * scale:
        raise ValueError(f"{name} is not symmetric within relative tolerance {rtol}")
    return arr


def require_sym_psd(M, name="matrix", eig_rtol=PSD_EIG_RTOL):
    """Validate symmetry and positive semi-definiteness.

    Eigenvalues down to ``-eig_rtol * max_eig`` are accepted as roundoff from
    an exact zero; anything below that raises :class:`FactorizationError`.
    """
    arr = require_symmetric(M, name)
    eigs = np.linalg.eigvalsh(arr)
    floor = -eig_rtol * max(eigs[-1], 0.0)
    if eigs[0] < floor:
        raise FactorizationError(
            f"{name} is not positive semi-definite: min eigenvalue {eigs[0]:.3e}"
        )
    return arr


def symmetrize(M):
    return 0.5 * (M + M.T)


def solve_lyapunov(A, Q):
    """Solve the continuous Lyapunov equation ``A X + X A^T = Q``.

    Parameters
    ----------
    A : (D, D) array
        Must have eigenvalues with strictly positive real parts (a stable
        relaxation matrix; note the sign convention of the equation above).
    Q : (D, D) array
        Symmetric right-hand side.

    Returns
    -------
    X : (D, D) array
        Symmetrized solution with relative residual
        ``||A X + X A^T - Q||_F / ||Q||_F <= 1e-8``.

    Raises
    ------
    StabilityError
        If an eigenvalue of ``A`` has a non-positive real part.
    FactorizationError
        If the assembled Kronecker system is too ill-conditioned to meet the
        residual guarantee.
    """
    A = as_square_matrix(A, "A")
    Q = require_symmetric(Q, "Q")
    if A.shape != Q.shape:
        raise ValueError(f"A and Q dimensions differ: {A.shape} vs {Q.shape}")
    eigs = np.linalg.eigvals(A)
    min_real = float(np.min(eigs.real))
    if min_real <= 0.0:
        raise StabilityError(
            f"A must have strictly positive eigenvalue real parts; min is {min_real:.3e}"
        )
    q_norm = np.linalg.norm(Q)
    if q_norm == 0.0:
        return np.zeros_like(Q)
    dim = A.shape[0]
    eye = np.eye(dim)
    system = np.kron(A, eye) + np.kron(eye, A)
    X = np.linalg.solve(system, Q.ravel()).reshape(dim, dim)
    X = symmetrize(X)
    residual = np.linalg.norm(A @ X + X @ A.T - Q) / q_norm
    if residual > LYAPUNOV_RESIDUAL_RTOL:
        raise FactorizationError(
            f"Lyapunov solve too ill-conditioned: relative residual {residual:.3e}"
        )
    return X


def logdet_pd(M, name="matrix"):
    """Log determinant of a symmetric positive definite matrix via Cholesky."""
    arr = require_symmetric(M, name)
    try:
        chol = np.linalg.cholesky(arr)
    except np.linalg.LinAlgError as err:
        raise FactorizationError(f"{name} is not positive definite: {err}") from err
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def inverse_pd(M, name="matrix"):
    """Inverse of a symmetric positive definite matrix via Cholesky."""
    arr = require_symmetric(M, name)
    try:
        factor = scipy.linalg.cho_factor(arr, lower=True)
    except scipy.linalg.LinAlgError as err:
        raise FactorizationError(f"{name} is not positive definite: {err}") from err
    inv = scipy.linalg.cho_solve(factor, np.eye(arr.shape[0]))
    return symmetrize(inv)


def add_jitter(M, scale=1e-12):
    """Return ``M + scale * trace(M)/D * I``, the package's standard jitter."""
    arr = as_square_matrix(M)
    dim = arr.shape[0]
    return arr + (scale * np.trace(arr) / dim) * np.eye(dim)


def psd_factor(M, name="matrix"):
    """A factor ``B`` with ``B B^T = M`` for symmetric PSD ``M``.

    Tries Cholesky, then Cholesky with trace-scaled jitter (rank-deficient
    inputs), then an eigenvalue factor with negative roundoff eigenvalues
    clamped to zero. Any PSD factor is equivalent downstream, where only
    ``B B^T`` enters.
    """
    arr = require_symmetric(M, name)
    try:
        return np.linalg.cholesky(arr)
    except np.linalg.LinAlgError:
        pass
    if np.trace(arr) > 0.0:
        try:
            return np.linalg.cholesky(add_jitter(arr))
        except np.linalg.LinAlgError:
            pass
    eigs, vecs = np.linalg.eigh(arr)
    if eigs[0] < -PSD_EIG_RTOL * max(eigs[-1], 0.0):
        raise FactorizationError(
            f"{name} is not positive semi-definite: min eigenvalue {eigs[0]:.3e}"
        )
    return vecs * np.sqrt(np.clip(eigs, 0.0, None))


def real_eig_range(M):
    """(min, max) of the real parts of the eigenvalues of a square matrix."""
    eigs = np.linalg.eigvals(as_square_matrix(M))
    return float(np.min(eigs.real)), float(np.max(eigs.real))
