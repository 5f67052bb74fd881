"""Choosing the number of sources from a PCA scree of the shape curves.

Curves that are convex combinations of K sources span a (K-1)-dimensional
affine subspace, so ``d`` principal components call for ``K = d + 1``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DegenerateData


@dataclass
class ScreeResult:
    explained_variance_ratio: np.ndarray
    cumulative: np.ndarray
    suggested_d: int
    suggested_K: int


def scree(X, threshold: float = 0.97) -> ScreeResult:
    """Centered PCA of the rows of ``X``.

    ``suggested_d`` is the smallest number of components whose cumulative
    explained variance reaches ``threshold``; zero when the rows carry no
    variance at all.
    """
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    X = np.asarray(getattr(X, "X", X), dtype=np.float64)
    if X.ndim != 2:
        raise DegenerateData(f"X must be 2-D, got shape {X.shape}")
    n, p = X.shape
    if n <= p:
        raise DegenerateData(f"need more curves than samples per curve (n={n}, p={p})")
    if not np.all(np.isfinite(X)):
        raise DegenerateData("X contains non-finite values")

    centered = X - X.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    var = sv**2
    total = var.sum()
    # total variance at rounding level: identical rows
    if total <= 1e-24 * max(float(np.sum(X**2)), 1e-300):
        ratio = np.zeros(p)
        return ScreeResult(ratio, ratio.copy(), 0, 1)
    ratio = np.zeros(p)
    ratio[: len(var)] = var / total
    cumulative = np.cumsum(ratio)
    d = int(np.searchsorted(cumulative, threshold - 1e-12) + 1)
    d = min(d, p)
    return ScreeResult(ratio, cumulative, d, d + 1)


def pca_reconstruction(X, n_components: int) -> np.ndarray:
    """Centered rank-``n_components`` PCA reconstruction of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    mean = X.mean(axis=0)
    U, s, Vt = np.linalg.svd(X - mean, full_matrices=False)
    k = n_components
    return mean + (U[:, :k] * s[:k]) @ Vt[:k]


def write_scree_csv(path, result: ScreeResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["component", "ratio", "cumulative"])
        for i, (r, c) in enumerate(zip(result.explained_variance_ratio, result.cumulative), 1):
            w.writerow([i, repr(float(r)), repr(float(c))])


class ScreeRank(BaseEstimator):
    """Estimator wrapper around :func:`scree`.

    Parameters
    ----------
    threshold : float, default=0.97
        Cumulative explained-variance ratio to reach.

    Attributes
    ----------
    explained_variance_ratio_ : ndarray of shape (n_features,)
    cumulative_ : ndarray of shape (n_features,)
    n_dims_ : int
        Number of principal components kept.
    n_components_ : int
        Suggested number of sources, ``n_dims_ + 1``.
    """

    def __init__(self, threshold=0.97):
        self.threshold = threshold

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        res = scree(X, self.threshold)
        self.explained_variance_ratio_ = res.explained_variance_ratio
        self.cumulative_ = res.cumulative
        self.n_dims_ = res.suggested_d
        self.n_components_ = res.suggested_K
        self.n_features_in_ = X.shape[1]
        return self

    def result(self) -> ScreeResult:
        check_is_fitted(self, "n_components_")
        return ScreeResult(self.explained_variance_ratio_, self.cumulative_, self.n_dims_, self.n_components_)
