"""Dataset ingestion, normalization, splitting, and synthetic generators.

CSV files are parsed strictly: every non-target cell must be numeric, and the
header row is auto-detected (a first line with any non-numeric cell). Class
labels are 1-based integers, matching the UCI files this mirrors.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .exceptions import DataFormatError, NormalizationError
from .linalg import inverse_pd
from .models import TASK_LINEAR, TASK_LOGISTIC, TASK_SOFTMAX, TASKS, Dataset
from .stationary import GaussianApprox


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a synthetic problem with a known generative process.

    Features are equicorrelated Gaussians (``feature_correlation``) with
    per-column scales spread geometrically up to ``feature_scale_spread``;
    true weights are drawn from the prior with precision ``lambda_gen``.
    """

    task: str
    n_examples: int
    n_features: int
    n_classes: int = 2
    lambda_gen: float = 1.0
    noise_scale: float = 1.0
    feature_correlation: float = 0.0
    feature_scale_spread: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.n_examples < 1 or self.n_features < 1:
            raise ValueError("n_examples and n_features must be positive")
        if self.task == TASK_SOFTMAX and self.n_classes < 2:
            raise ValueError("softmax needs at least 2 classes")
        if not self.lambda_gen > 0.0:
            raise ValueError("lambda_gen must be positive")
        if not 0.0 <= self.feature_correlation < 1.0:
            raise ValueError("feature_correlation must lie in [0, 1)")
        if self.feature_scale_spread < 1.0:
            raise ValueError("feature_scale_spread must be at least 1")


def make_synthetic(spec):
    """Generate a dataset; linear specs also return the conjugate posterior.

    The linear oracle is the exact Gaussian posterior under unit observation
    noise and prior precision ``lambda_gen``: mean ``(X^T X + lam I)^{-1} X^T y``
    and covariance ``(X^T X + lam I)^{-1}``.
    """
    rng = np.random.default_rng(spec.seed)
    N, D = spec.n_examples, spec.n_features
    X = rng.standard_normal((N, D))
    rho = spec.feature_correlation
    if rho > 0.0:
        mix = np.linalg.cholesky((1.0 - rho) * np.eye(D) + rho * np.ones((D, D)))
        X = X @ mix.T
    if spec.feature_scale_spread > 1.0:
        X *= np.geomspace(1.0, spec.feature_scale_spread, D)

    if spec.task == TASK_LINEAR:
        theta_true = rng.normal(0.0, 1.0 / np.sqrt(spec.lambda_gen), D)
        y = X @ theta_true + spec.noise_scale * rng.standard_normal(N)
        precision = X.T @ X + spec.lambda_gen * np.eye(D)
        cov = inverse_pd(precision, "posterior precision")
        posterior = GaussianApprox(np.linalg.solve(precision, X.T @ y), cov)
        return Dataset(X, y, TASK_LINEAR), posterior

    if spec.task == TASK_LOGISTIC:
        theta_true = rng.normal(0.0, 1.0 / np.sqrt(spec.lambda_gen), D)
        labels = 1 + (rng.random(N) < expit(X @ theta_true)).astype(np.int64)
        return Dataset(X, labels, TASK_LOGISTIC), None

    K = spec.n_classes
    theta_true = rng.normal(0.0, 1.0 / np.sqrt(spec.lambda_gen), (D, K))
    logits = X @ theta_true
    logits -= logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=1, keepdims=True)
    draws = rng.random(N)
    labels = 1 + (draws[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
    labels = np.minimum(labels, K).astype(np.int64)
    return Dataset(X, labels, TASK_SOFTMAX, n_classes=K), None


def _try_float(cell):
    try:
        return float(cell)
    except ValueError:
        return None


def load_csv(path, target_column, delimiter=",", task=TASK_LINEAR, n_classes=0):
    """Load a delimited numeric table into a Dataset.

    ``target_column`` is a column name (requires a header) or a 0-based
    index; negative indices count from the end. Any unparseable cell raises
    :class:`DataFormatError` with its row and column.
    """
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle, delimiter=delimiter))
    rows = [row for row in rows if row]
    if not rows:
        raise DataFormatError(f"{path}: file contains no rows")
    widths = {len(row) for row in rows}
    if len(widths) != 1:
        raise DataFormatError(f"{path}: rows have inconsistent column counts {sorted(widths)}")
    n_cols = widths.pop()

    header = None
    if any(_try_float(cell) is None for cell in rows[0]):
        header = [cell.strip() for cell in rows[0]]
        rows = rows[1:]
        if not rows:
            raise DataFormatError(f"{path}: no data rows after the header")

    if isinstance(target_column, str) and not _is_intlike(target_column):
        if header is None:
            raise DataFormatError(
                f"{path}: target column {target_column!r} needs a header row"
            )
        try:
            target_idx = header.index(target_column)
        except ValueError:
            raise DataFormatError(
                f"{path}: no column named {target_column!r} in header {header}"
            ) from None
    else:
        target_idx = int(target_column)
        if target_idx < 0:
            target_idx += n_cols
        if not 0 <= target_idx < n_cols:
            raise DataFormatError(f"{path}: target column index out of range")

    table = np.empty((len(rows), n_cols))
    offset = 2 if header is not None else 1
    for i, row in enumerate(rows):
        for j, cell in enumerate(row):
            value = _try_float(cell)
            if value is None:
                raise DataFormatError(
                    f"{path}: non-numeric cell at row {i + offset}, column {j + 1}: {cell!r}"
                )
            table[i, j] = value
    features = np.delete(table, target_idx, axis=1)
    targets = table[:, target_idx]
    return Dataset(features, targets, task, n_classes=n_classes)


def _is_intlike(text):
    try:
        int(text)
    except ValueError:
        return False
    return True


def normalize_rows_unit_length(dataset):
    """Rescale every example's feature vector to unit Euclidean norm."""
    norms = np.linalg.norm(dataset.features, axis=1)
    zero_rows = np.flatnonzero(norms == 0.0)
    if zero_rows.size:
        raise NormalizationError(
            f"cannot normalize all-zero feature rows at indices {zero_rows.tolist()}"
        )
    return Dataset(
        dataset.features / norms[:, None],
        dataset.targets,
        dataset.task,
        n_classes=dataset.n_classes,
    )


def normalize_columns_max_abs(dataset):
    """Alternative normalization: scale each feature column by its max |value|."""
    scales = np.abs(dataset.features).max(axis=0)
    zero_cols = np.flatnonzero(scales == 0.0)
    if zero_cols.size:
        raise NormalizationError(
            f"cannot normalize all-zero feature columns at indices {zero_cols.tolist()}"
        )
    return Dataset(
        dataset.features / scales,
        dataset.targets,
        dataset.task,
        n_classes=dataset.n_classes,
    )


def train_val_split(dataset, fraction, seed):
    """Disjoint, exhaustive, seed-deterministic split; ``fraction`` is the train share."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    N = dataset.n_examples
    n_train = int(round(N * fraction))
    if n_train == 0 or n_train == N:
        raise ValueError(f"split of N={N} at fraction={fraction} leaves an empty side")
    perm = np.random.default_rng(seed).permutation(N)
    parts = []
    for idx in (np.sort(perm[:n_train]), np.sort(perm[n_train:])):
        parts.append(
            Dataset(
                dataset.features[idx],
                dataset.targets[idx],
                dataset.task,
                n_classes=dataset.n_classes,
            )
        )
    return tuple(parts)
