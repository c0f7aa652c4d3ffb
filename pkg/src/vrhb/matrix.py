"""Data-matrix kernels: covariance and mini-batch products, projections, sampling.

The data vectors a_1..a_n are stored as the rows of an (n, d) array, which
is the column-major layout of the d x n matrix A.  The covariance
C = (1/n) A A^T is applied as two passes over the data and is only formed
explicitly for small d.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NumericError

EXPLICIT_COVARIANCE_MAX_DIM = 512
NORM_FLOOR = 1e-150
UNIT_TOL = 1e-9


class DataMatrix:
    """n data vectors in R^d, dense or CSR-sparse.

    Parameters
    ----------
    rows : array_like or scipy.sparse matrix, shape (n, d)
        Row i is the data vector a_i.
    """

    def __init__(self, rows):
        if sp.issparse(rows):
            rows = sp.csr_matrix(rows, dtype=np.float64)
            rows.sort_indices()
            values = rows.data
        else:
            rows = np.ascontiguousarray(rows, dtype=np.float64)
            if rows.ndim != 2:
                raise ValueError(f"data must be 2-d, got shape {rows.shape}")
            values = rows
        n, d = rows.shape
        if n < 1 or d < 1:
            raise ValueError(f"data must have n >= 1 and d >= 1, got {rows.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("data contains NaN or Inf")
        self.rows = rows
        self._cov = None
        self._col_norms = None

    @classmethod
    def from_columns(cls, vectors):
        """Build from a d x n array whose columns are the data vectors."""
        if sp.issparse(vectors):
            return cls(sp.csr_matrix(vectors.T))
        return cls(np.asarray(vectors, dtype=np.float64).T)

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def d(self):
        return self.rows.shape[1]

    @property
    def is_sparse(self):
        return sp.issparse(self.rows)

    @property
    def column_norms(self):
        """Squared norms ||a_i||^2, cached."""
        if self._col_norms is None:
            if self.is_sparse:
                self._col_norms = np.asarray(self.rows.multiply(self.rows).sum(axis=1)).ravel()
            else:
                self._col_norms = np.einsum("ij,ij->i", self.rows, self.rows)
        return self._col_norms

    def dense(self):
        return self.rows.toarray() if self.is_sparse else self.rows

    def to_sparse(self):
        return DataMatrix(sp.csr_matrix(self.rows))

    def to_dense(self):
        return DataMatrix(self.dense().copy())

    def take(self, indices):
        """Rows for the given indices, as a dense or sparse block."""
        return self.rows[np.asarray(indices)]

    def explicit_covariance(self):
        """The d x d covariance matrix; refused above the size threshold."""
        if self.d > EXPLICIT_COVARIANCE_MAX_DIM:
            raise ValueError(
                f"d={self.d} exceeds {EXPLICIT_COVARIANCE_MAX_DIM}; covariance is not materialized"
            )
        if self._cov is None:
            x = self.rows
            cov = (x.T @ x) / self.n
            self._cov = cov.toarray() if sp.issparse(cov) else np.asarray(cov)
        return self._cov

    def __repr__(self):
        kind = "sparse" if self.is_sparse else "dense"
        return f"DataMatrix(n={self.n}, d={self.d}, {kind})"


@dataclass(frozen=True)
class MiniBatch:
    indices: np.ndarray
    with_replacement: bool = field(default=False)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("mini-batch must be a non-empty 1-d index list")
        if not self.with_replacement and np.unique(idx).size != idx.size:
            raise ValueError("mini-batch indices must be distinct")
        object.__setattr__(self, "indices", idx)

    @property
    def size(self):
        return self.indices.size

    def validate(self, n):
        if self.indices.min() < 0 or self.indices.max() >= n:
            raise ValueError(f"mini-batch index out of range [0, {n})")
        if not self.with_replacement and self.size > n:
            raise ValueError("mini-batch larger than the data set")


def _check_vector(data, v):
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (data.d,):
        raise ValueError(f"vector has shape {v.shape}, expected ({data.d},)")
    return v


def covariance_matvec(data, v):
    """C v = (1/n) A (A^T v) without forming C."""
    v = _check_vector(data, v)
    x = data.rows
    return np.asarray(x.T @ (x @ v)).ravel() / data.n


def minibatch_matvec(data, batch, v):
    """C_S v = (1/|S|) sum_{l in S} a_l (a_l^T v)."""
    v = _check_vector(data, v)
    if not isinstance(batch, MiniBatch):
        batch = MiniBatch(batch)
    batch.validate(data.n)
    xs = data.take(batch.indices)
    return np.asarray(xs.T @ (xs @ v)).ravel() / batch.size


def project_orthogonal(anchor, v):
    """Remove the component of v along anchor: (I - w0 w0^T / ||w0||^2) v."""
    anchor = np.asarray(anchor, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nn = anchor @ anchor
    if not nn > 0:
        raise ValueError("projection anchor must be nonzero")
    return v - ((anchor @ v) / nn) * anchor


def sample_minibatch(n, size, rng, with_replacement=False):
    """Uniformly random mini-batch of `size` indices out of range(n).

    Without replacement by default; `rng` is a numpy Generator.
    """
    if size < 1 or (size > n and not with_replacement):
        raise ValueError(f"batch size {size} invalid for n={n}")
    if not with_replacement and size == n:
        return MiniBatch(np.arange(n))
    idx = rng.choice(n, size=size, replace=with_replacement)
    return MiniBatch(idx, with_replacement=with_replacement)


def rayleigh_quotient(data, w):
    w = _check_vector(data, w)
    ww = w @ w
    if not ww > 0:
        raise ValueError("Rayleigh quotient of the zero vector")
    return float(w @ covariance_matvec(data, w)) / ww


def error_gap(w, u1):
    """1 - (w^T u1)^2 for unit vectors, evaluated as ||w - (u1^T w) u1||^2.

    The residual form stays accurate far below machine epsilon, where the
    literal difference would round to zero.
    """
    w = np.asarray(w, dtype=np.float64)
    u1 = np.asarray(u1, dtype=np.float64)
    for name, x in (("w", w), ("u1", u1)):
        if abs(np.linalg.norm(x) - 1.0) > UNIT_TOL:
            raise ValueError(f"{name} must be a unit vector")
    r = w - (u1 @ w) * u1
    return float(min(max(r @ r, 0.0), 1.0))


def normalize(v):
    v = np.asarray(v, dtype=np.float64)
    nrm = np.linalg.norm(v)
    if not np.isfinite(nrm) or nrm < NORM_FLOOR:
        raise NumericError(f"cannot normalize vector with norm {nrm!r}")
    return v / nrm
