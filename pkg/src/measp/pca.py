"""Two-component PCA by power iteration, for dataset coverage plots.

Data is z-scored internally (population convention, constant columns
dropped to zero), the top two eigenvectors of the sample covariance are
found by power iteration with deflation, and each component's sign is
fixed so its largest-magnitude entry is positive.  Output is per-instance
2D coordinates plus the two explained variances.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .features import FeatureVector

POWER_TOLERANCE = 1e-9
MAX_ITERATIONS = 20000


def _as_array(data) -> np.ndarray:
    if isinstance(data, np.ndarray):
        return np.asarray(data, dtype=float)
    if len(data) and isinstance(data[0], FeatureVector):
        versions = {v.manifest_version for v in data}
        if len(versions) > 1:
            raise ValueError(f"mixed manifest versions: {sorted(versions)}")
        return np.asarray([v.values for v in data], dtype=float)
    return np.asarray(data, dtype=float)


def _zscore(x: np.ndarray) -> np.ndarray:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return (x - mean) / std


def power_iteration(
    matrix: np.ndarray,
    tol: float = POWER_TOLERANCE,
    max_iter: int = MAX_ITERATIONS,
) -> tuple[float, np.ndarray]:
    """Dominant eigenpair of a symmetric PSD matrix.

    Starts from a fixed vector so results are deterministic; a (near) zero
    matrix yields eigenvalue 0.
    """
    d = matrix.shape[0]
    v = np.ones(d) / np.sqrt(d)
    for _ in range(max_iter):
        w = matrix @ v
        norm = float(np.linalg.norm(w))
        if norm < 1e-30:
            return 0.0, v
        w /= norm
        if float(np.linalg.norm(w - v)) < tol:
            v = w
            break
        v = w
    eigenvalue = float(v @ matrix @ v)
    return eigenvalue, v


def _fix_sign(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))  # first index among ties
    return -v if v[i] < 0 else v


def pca_project(
    data: Sequence[FeatureVector] | np.ndarray,
    tol: float = POWER_TOLERANCE,
) -> tuple[np.ndarray, tuple[float, float]]:
    """Project onto the top two principal components.

    Returns (coordinates of shape (n, 2), (variance_1, variance_2)).
    Needs at least 3 rows.
    """
    x = _as_array(data)
    if x.ndim != 2 or x.shape[0] < 3:
        raise ValueError("pca_project needs at least 3 vectors")
    z = _zscore(x)
    n = z.shape[0]
    cov = (z.T @ z) / (n - 1)
    lam1, v1 = power_iteration(cov, tol)
    deflated = cov - lam1 * np.outer(v1, v1)
    lam2, v2 = power_iteration(deflated, tol)
    v1, v2 = _fix_sign(v1), _fix_sign(v2)
    coords = np.column_stack([z @ v1, z @ v2])
    return coords, (max(lam1, 0.0), max(lam2, 0.0))
