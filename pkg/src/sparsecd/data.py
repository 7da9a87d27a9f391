"""Data containers, libsvm text IO and synthetic problem generation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

__all__ = [
    "DesignMatrix",
    "Target",
    "Dataset",
    "LibsvmParseError",
    "read_libsvm",
    "write_libsvm",
    "generate_correlated_gaussian",
    "lambda_max",
    "column_squared_norms",
    "scale_columns_to_sqrt_n",
]


class LibsvmParseError(ValueError):
    """Malformed libsvm input; the message carries the 1-based line number."""


class DesignMatrix:
    """Design matrix, dense or compressed-sparse-column.

    Dense storage is kept column-major so per-column access in the
    coordinate loops is contiguous; CSC plays the same role for sparse
    data. Instances are immutable after construction.
    """

    def __init__(self, matrix):
        if sparse.issparse(matrix):
            csc = matrix.tocsc().astype(np.float64)
            csc.sort_indices()
            idx_dtype = np.int64 if csc.nnz > np.iinfo(np.int32).max else np.int32
            csc = sparse.csc_matrix(
                (csc.data, csc.indices.astype(idx_dtype), csc.indptr.astype(idx_dtype)),
                shape=csc.shape,
            )
            _validate_csc(csc)
            self._csc, self._dense = csc, None
            self.n_samples, self.n_features = csc.shape
        else:
            arr = np.asfortranarray(matrix, dtype=np.float64)
            if arr.ndim != 2:
                raise ValueError(f"design matrix must be 2-d, got ndim={arr.ndim}")
            self._dense, self._csc = arr, None
            self.n_samples, self.n_features = arr.shape
        if self.n_samples < 1 or self.n_features < 1:
            raise ValueError("design matrix must have at least one row and one column")

    @property
    def is_sparse(self) -> bool:
        return self._csc is not None

    @property
    def raw(self):
        """Underlying ndarray (column-major) or scipy CSC matrix."""
        return self._csc if self.is_sparse else self._dense

    @property
    def shape(self):
        return (self.n_samples, self.n_features)

    def toarray(self) -> np.ndarray:
        return self._csc.toarray() if self.is_sparse else np.array(self._dense)

    def matvec(self, v):
        return self.raw @ v

    def rmatvec(self, v):
        return self.raw.T @ v

    def kernel_arrays(self):
        """Arrays consumed by the compiled epoch kernels."""
        if self.is_sparse:
            return self._csc.data, self._csc.indices, self._csc.indptr
        return (self._dense,)


def _validate_csc(csc: sparse.csc_matrix) -> None:
    n, p = csc.shape
    indptr, indices = csc.indptr, csc.indices
    if indptr.shape[0] != p + 1:
        raise ValueError("CSC column pointer array must have length p + 1")
    if indptr[0] != 0 or indptr[-1] != csc.nnz:
        raise ValueError("CSC column pointers must start at 0 and end at nnz")
    if np.any(np.diff(indptr) < 0):
        raise ValueError("CSC column pointers must be non-decreasing")
    if indices.size and (indices.min() < 0 or indices.max() >= n):
        raise ValueError("CSC row indices out of range")
    for j in range(p):
        col = indices[indptr[j]:indptr[j + 1]]
        if col.size > 1 and np.any(np.diff(col) <= 0):
            raise ValueError(f"CSC row indices in column {j} must be strictly increasing")


@dataclass(frozen=True)
class Target:
    """Observation vector (single task) or n x T matrix (multitask).

    ``labels`` holds the +-1 class labels when the problem is a
    classification / SVM one.
    """

    values: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim not in (1, 2):
            raise ValueError("target values must be a vector or an n x T matrix")
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.float64)
            if labels.shape != (values.shape[0],):
                raise ValueError("labels must be a vector with one entry per sample")
            if not np.all(np.isin(labels, (-1.0, 1.0))):
                raise ValueError("labels must all be -1 or +1")
            object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def is_multitask(self) -> bool:
        return self.values.ndim == 2


@dataclass(frozen=True)
class Dataset:
    X: DesignMatrix
    y: Target

    def __post_init__(self):
        if self.X.n_samples != self.y.n_samples:
            raise ValueError(
                f"X has {self.X.n_samples} rows but y has {self.y.n_samples} samples"
            )

    @classmethod
    def from_arrays(cls, X, y, labels=None) -> "Dataset":
        X = X if isinstance(X, DesignMatrix) else DesignMatrix(X)
        y = np.asarray(y, dtype=np.float64)
        if labels is None and y.ndim == 1 and y.size and np.all(np.isin(y, (-1.0, 1.0))):
            labels = y.copy()
        return cls(X, Target(y, labels))


def read_libsvm(path, n_features: int | None = None) -> Dataset:
    """Parse a libsvm text file (``<label> <idx>:<val> ...``, 1-based indices).

    Feature indices must be strictly increasing within each line. The
    number of columns is the largest index seen unless ``n_features``
    overrides it.
    """
    labels: list[float] = []
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    max_idx = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            try:
                label = float(tokens[0])
            except ValueError:
                raise LibsvmParseError(f"line {lineno}: bad label {tokens[0]!r}") from None
            row = len(labels)
            labels.append(label)
            prev = 0
            for tok in tokens[1:]:
                idx_s, _, val_s = tok.partition(":")
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise LibsvmParseError(f"line {lineno}: bad entry {tok!r}") from None
                if idx < 1:
                    raise LibsvmParseError(f"line {lineno}: index {idx} is not 1-based")
                if idx <= prev:
                    raise LibsvmParseError(
                        f"line {lineno}: index {idx} is not strictly increasing"
                    )
                prev = idx
                rows.append(row)
                cols.append(idx - 1)
                vals.append(val)
            max_idx = max(max_idx, prev)
    if not labels:
        raise LibsvmParseError("no samples")
    p = max_idx if n_features is None else int(n_features)
    if p < max_idx:
        raise LibsvmParseError(f"n_features={p} smaller than largest index {max_idx}")
    if p == 0:
        raise LibsvmParseError("no features")
    X = sparse.csc_matrix(
        (vals, (rows, cols)), shape=(len(labels), p), dtype=np.float64
    )
    return Dataset.from_arrays(X, np.asarray(labels))


def write_libsvm(dataset: Dataset, path) -> None:
    """Inverse of :func:`read_libsvm`; only stored entries are written."""
    if dataset.y.is_multitask:
        raise ValueError("libsvm format holds single-task targets only")
    csr = (dataset.X.raw if dataset.X.is_sparse else sparse.csr_matrix(dataset.X.raw)).tocsr()
    y = dataset.y.values
    with open(path, "w") as fh:
        for i in range(csr.shape[0]):
            lo, hi = csr.indptr[i], csr.indptr[i + 1]
            pairs = " ".join(
                f"{j + 1}:{v:.17g}" for j, v in zip(csr.indices[lo:hi], csr.data[lo:hi])
            )
            fh.write(f"{y[i]:.17g} {pairs}".rstrip() + "\n")


def generate_correlated_gaussian(
    n: int,
    p: int,
    rho: float,
    n_nonzero: int,
    snr: float,
    seed: int,
) -> tuple[Dataset, np.ndarray]:
    """Correlated Gaussian design with a sparse ground-truth coefficient vector.

    Rows of X follow an AR(1) process with corr(x_j, x_k) = rho^|j-k|.
    beta* has ``n_nonzero`` unit entries on evenly spaced coordinates, and
    y = X beta* + eps with eps rescaled so that ||X beta*|| / ||eps|| is
    exactly ``snr``. Bit-reproducible for a fixed seed.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    if not 0 <= n_nonzero <= p:
        raise ValueError("n_nonzero must lie in [0, p]")
    if not (snr > 0 and np.isfinite(snr)):
        raise ValueError("snr must be positive and finite")
    rng = np.random.default_rng(seed)
    X = np.empty((n, p), order="F")
    X[:, 0] = rng.standard_normal(n)
    fresh = np.sqrt(1.0 - rho**2)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + fresh * rng.standard_normal(n)
    beta_star = np.zeros(p)
    if n_nonzero > 0:
        support = np.round(np.linspace(0, p - 1, n_nonzero)).astype(int)
        beta_star[support] = 1.0
    signal = X @ beta_star
    eps = rng.standard_normal(n)
    norm_eps = np.linalg.norm(eps)
    scale = np.linalg.norm(signal) / (snr * norm_eps) if norm_eps > 0 else 0.0
    y = signal + scale * eps
    return Dataset.from_arrays(X, y), beta_star


def column_squared_norms(X: DesignMatrix | np.ndarray) -> np.ndarray:
    """||X_:j||^2 for every column, exact for both dense and CSC storage."""
    raw = X.raw if isinstance(X, DesignMatrix) else X
    if sparse.issparse(raw):
        sq = raw.copy()
        sq.data = sq.data**2
        return np.asarray(sq.sum(axis=0)).ravel()
    return np.einsum("ij,ij->j", raw, raw)


def lambda_max(dataset: Dataset) -> float:
    """Smallest L1 strength with an all-zero quadratic-datafit solution.

    Single task: max_j |X_:j^T y| / n. Multitask targets use the row-norm
    variant max_j ||X_:j^T Y||_2 / n.
    """
    n = dataset.X.n_samples
    corr = dataset.X.rmatvec(dataset.y.values)
    if dataset.y.is_multitask:
        return float(np.max(np.linalg.norm(corr, axis=1)) / n)
    return float(np.max(np.abs(corr)) / n) if corr.size else 0.0


def scale_columns_to_sqrt_n(dataset: Dataset) -> tuple[Dataset, np.ndarray]:
    """Rescale every column to norm sqrt(n); zero columns are left alone.

    Returns the new dataset and the applied per-column divisors. This is
    deliberately an explicit preprocessing step, never applied implicitly.
    """
    n = dataset.X.n_samples
    norms = np.sqrt(column_squared_norms(dataset.X))
    scales = np.where(norms > 0, norms / np.sqrt(n), 1.0)
    if dataset.X.is_sparse:
        D = sparse.diags(1.0 / scales)
        X_scaled = dataset.X.raw @ D
    else:
        X_scaled = dataset.X.raw / scales
    return Dataset(DesignMatrix(X_scaled), dataset.y), scales
