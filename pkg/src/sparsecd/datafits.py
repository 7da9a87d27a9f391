"""Smooth data-fitting terms: quadratic, logistic, multitask quadratic, SVM dual.

Each descriptor is bound to a dataset with ``bind``; the bound object
precomputes the per-coordinate Lipschitz constants once and never again.
Bound objects are stateless beyond those constants: the fitted-values
cache belongs to the caller (the solver) and is passed into every call.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.special import expit

from .data import Dataset, DesignMatrix, column_squared_norms
from . import _kernels

__all__ = ["Quadratic", "Logistic", "QuadraticMultiTask", "SVMDual", "svm_primal_objective"]


def _labels_of(dataset: Dataset) -> np.ndarray:
    y = dataset.y
    labels = y.labels
    if labels is None:
        vals = y.values
        if vals.ndim == 1 and np.all(np.isin(vals, (-1.0, 1.0))):
            labels = vals
    if labels is None:
        raise ValueError("this datafit needs +-1 labels")
    return labels


class Quadratic:
    """f(beta) = ||y - X beta||^2 / (2 n); the cache is X beta."""

    multitask = False

    def bind(self, dataset: Dataset):
        return _BoundQuadratic(dataset)


class _BoundQuadratic:
    multitask = False
    kernel_code = _kernels.DF_QUADRATIC

    def __init__(self, dataset: Dataset):
        if dataset.y.is_multitask:
            raise ValueError("use QuadraticMultiTask for matrix targets")
        self.design = dataset.X
        self.y = dataset.y.values
        self.n = self.design.n_samples
        self.lipschitz = column_squared_norms(self.design) / self.n
        self.kernel_aux = self.y

    def init_cache(self, beta):
        return np.asarray(self.design.matvec(beta), dtype=np.float64)

    def value(self, beta, cache):
        r = self.y - cache
        return 0.5 * float(r @ r) / self.n

    def full_gradient(self, cache):
        return self.design.rmatvec(cache - self.y) / self.n

    def gradient_coord(self, j, cache):
        return _col_dot(self.design, j, cache - self.y) / self.n


class Logistic:
    """f(beta) = (1/n) sum log(1 + exp(-y_i (X beta)_i)); the cache is X beta."""

    multitask = False

    def bind(self, dataset: Dataset):
        return _BoundLogistic(dataset)


class _BoundLogistic:
    multitask = False
    kernel_code = _kernels.DF_LOGISTIC

    def __init__(self, dataset: Dataset):
        self.design = dataset.X
        self.labels = _labels_of(dataset)
        self.n = self.design.n_samples
        # 1/4 bound on the logistic curvature
        self.lipschitz = column_squared_norms(self.design) / (4.0 * self.n)
        self.kernel_aux = self.labels

    def init_cache(self, beta):
        return np.asarray(self.design.matvec(beta), dtype=np.float64)

    def value(self, beta, cache):
        return float(np.logaddexp(0.0, -self.labels * cache).mean())

    def _grad_points(self, cache):
        return -self.labels * expit(-self.labels * cache) / self.n

    def full_gradient(self, cache):
        return self.design.rmatvec(self._grad_points(cache))

    def gradient_coord(self, j, cache):
        return _col_dot(self.design, j, self._grad_points(cache))


class QuadraticMultiTask:
    """f(W) = ||Y - X W||_F^2 / (2 n); the cache is X W."""

    multitask = True

    def bind(self, dataset: Dataset):
        return _BoundQuadraticMultiTask(dataset)


class _BoundQuadraticMultiTask:
    multitask = True
    kernel_code = _kernels.DF_QUADRATIC

    def __init__(self, dataset: Dataset):
        if not dataset.y.is_multitask:
            raise ValueError("QuadraticMultiTask needs an n x T target")
        self.design = dataset.X
        self.Y = np.asarray(dataset.y.values, order="F")
        self.n = self.design.n_samples
        self.n_tasks = self.Y.shape[1]
        self.lipschitz = column_squared_norms(self.design) / self.n
        self.kernel_aux = self.Y

    def init_cache(self, beta):
        return np.asarray(self.design.matvec(beta), dtype=np.float64, order="F")

    def value(self, beta, cache):
        r = self.Y - cache
        return 0.5 * float(np.sum(r * r)) / self.n

    def full_gradient(self, cache):
        return self.design.rmatvec(cache - self.Y) / self.n

    def gradient_coord(self, j, cache):
        return _col_dot(self.design, j, cache - self.Y) / self.n


class SVMDual:
    """Dual of the hinge-loss SVM as a box-constrained quadratic.

    The optimization variable alpha lives on the samples, so the design is
    transposed internally: the solver iterates over the columns of
    G = (diag(y) X)^T and the cache is the primal vector w = G alpha.
    """

    multitask = False

    def bind(self, dataset: Dataset):
        return _BoundSVMDual(dataset)


class _BoundSVMDual:
    multitask = False
    kernel_code = _kernels.DF_SVM

    def __init__(self, dataset: Dataset):
        labels = _labels_of(dataset)
        X = dataset.X
        if X.is_sparse:
            G = sparse.csc_matrix(X.raw.multiply(labels[:, None]).T)
        else:
            G = np.asfortranarray((X.raw * labels[:, None]).T)
        self.design = DesignMatrix(G)
        self.labels = labels
        self.n = self.design.n_features  # coordinates are samples
        self.lipschitz = column_squared_norms(self.design)
        self.kernel_aux = np.empty(0)

    def init_cache(self, alpha):
        return np.asarray(self.design.matvec(alpha), dtype=np.float64)

    def value(self, alpha, cache):
        return 0.5 * float(cache @ cache) - float(np.sum(alpha))

    def full_gradient(self, cache):
        return self.design.rmatvec(cache) - 1.0

    def gradient_coord(self, i, cache):
        return _col_dot(self.design, i, cache) - 1.0

    def primal_coef(self, cache):
        """beta = sum_i y_i alpha_i X_i:, maintained as the cache itself."""
        return cache


def svm_primal_objective(dataset: Dataset, beta: np.ndarray, C: float) -> float:
    """Hinge-loss primal 0.5 ||beta||^2 + C sum max(0, 1 - y_i X_i: beta)."""
    labels = _labels_of(dataset)
    margins = 1.0 - labels * np.asarray(dataset.X.matvec(beta))
    return 0.5 * float(beta @ beta) + C * float(np.maximum(margins, 0.0).sum())


def _col_dot(design: DesignMatrix, j: int, v: np.ndarray):
    """X_:j^T v without materializing sparse columns; v may be a matrix."""
    if not 0 <= j < design.n_features:
        raise IndexError(f"coordinate {j} out of range for p={design.n_features}")
    if design.is_sparse:
        raw = design.raw
        lo, hi = raw.indptr[j], raw.indptr[j + 1]
        out = raw.data[lo:hi] @ v[raw.indices[lo:hi]]
    else:
        out = design.raw[:, j] @ v
    return float(out) if np.ndim(out) == 0 else out
