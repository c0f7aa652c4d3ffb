"""Dataset loading, preprocessing, synthetic spectra and reference eigenpairs."""
import logging
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateSpectrumError, LibsvmParseError
from .matrix import EXPLICIT_COVARIANCE_MAX_DIM, DataMatrix, covariance_matvec, normalize

log = logging.getLogger(__name__)

GAP_TOL = 1e-10

# lambda_2 / lambda_1 of the public benchmark sets (not bundled).
BENCHMARK_DATASETS = {
    "ijcnn": dict(n=91_701, d=22, density=0.5909, ratio=0.9921, preprocessing="standardize"),
    "cov": dict(n=581_012, d=54, density=0.2200, ratio=0.7894, preprocessing="standardize"),
    "msd": dict(n=463_715, d=90, density=1.0, ratio=0.6776, preprocessing="standardize"),
    "mnist": dict(n=70_000, d=764, density=0.0196, ratio=0.7167, preprocessing="standardize"),
    "sim": dict(n=72_309, d=20_958, density=0.0024, ratio=0.4053, preprocessing="minmax"),
    "rcv1": dict(n=804_414, d=47_236, density=0.0016, ratio=0.4289, preprocessing="minmax"),
}

SPECTRUM_B = (1.0, 0.95) + tuple(np.round(np.linspace(0.5, 0.1, 8), 12))


@dataclass
class SpectralReference:
    """Eigenvalues in descending order and the matching eigenvectors (columns)."""

    eigenvalues: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=np.float64)
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim == 1:
            self.vectors = self.vectors[:, None]
        if len(self.eigenvalues) < 2:
            raise ValueError("reference needs at least two eigenvalues")
        if not self.eigenvalues[0] - self.eigenvalues[1] >= GAP_TOL:
            raise DegenerateSpectrumError(
                f"lambda_1 - lambda_2 = {self.eigenvalues[0] - self.eigenvalues[1]:.3e} is below {GAP_TOL}"
            )

    @property
    def lambda1(self):
        return float(self.eigenvalues[0])

    @property
    def lambda2(self):
        return float(self.eigenvalues[1])

    @property
    def u1(self):
        return self.vectors[:, 0]

    @property
    def u2(self):
        return self.vectors[:, 1] if self.vectors.shape[1] > 1 else None

    @property
    def top_vectors(self):
        return self.vectors[:, :2]

    @property
    def gap(self):
        return self.lambda1 - self.lambda2

    @property
    def ratio(self):
        return self.lambda2 / self.lambda1


@dataclass
class DatasetSpec:
    """Where the data comes from and how it is preprocessed.

    `source` is ``"libsvm"`` (with `path`) or ``"synthetic"`` (with
    `spectrum`, `n`, `seed`).
    """

    source: str = "synthetic"
    path: Optional[str] = None
    spectrum: tuple = SPECTRUM_B
    n: int = 200
    seed: int = 0
    rotate: bool = True
    preprocessing: str = "none"
    name: str = ""

    def __post_init__(self):
        if self.source not in ("libsvm", "synthetic"):
            raise ValueError(f"unknown data source {self.source!r}")
        if self.preprocessing not in ("standardize", "minmax", "none"):
            raise ValueError(f"unknown preprocessing {self.preprocessing!r}")
        if self.source == "libsvm" and not self.path:
            raise ValueError("libsvm source needs a path")
        if not self.name:
            self.name = os.path.basename(self.path) if self.path else "synthetic"

    @classmethod
    def parse(cls, text, preprocessing="none"):
        """Parse a ``--data`` argument.

        ``synthetic:spectrum-b``, ``synthetic:fixture-a`` or
        ``synthetic:<l1,l2,...>[:n[:seed]]``; anything else is a LIBSVM path.
        """
        if not text.startswith("synthetic:"):
            return cls(source="libsvm", path=text, preprocessing=preprocessing)
        body = text[len("synthetic:"):]
        parts = body.split(":")
        head = parts[0].lower()
        if head == "spectrum-b":
            spec = dict(spectrum=SPECTRUM_B, n=2000, name="spectrum-b")
        elif head == "fixture-a":
            spec = dict(spectrum=(2.0, 0.5), n=2, rotate=False, name="fixture-a")
        else:
            spec = dict(spectrum=tuple(float(x) for x in head.split(",")), name=body)
        if len(parts) > 1 and parts[1]:
            spec["n"] = int(parts[1])
        if len(parts) > 2 and parts[2]:
            spec["seed"] = int(parts[2])
        return cls(source="synthetic", preprocessing=preprocessing, **spec)


def parse_libsvm(path_or_lines):
    """Read LIBSVM ``label idx:val ...`` lines into a sparse DataMatrix.

    Labels are dropped, indices are 1-based and may appear in any order;
    d is the largest index seen.
    """
    if isinstance(path_or_lines, (str, os.PathLike)):
        with open(path_or_lines) as fh:
            lines = fh.read().splitlines()
    else:
        lines = list(path_or_lines)

    indptr, indices, values = [0], [], []
    d = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        row = {}
        for tok in tokens[1:]:
            key, sep, val = tok.partition(":")
            if not sep:
                raise LibsvmParseError(f"expected idx:val, got {tok!r}", lineno)
            try:
                idx, x = int(key), float(val)
            except ValueError:
                raise LibsvmParseError(f"bad feature {tok!r}", lineno) from None
            if idx < 1:
                raise LibsvmParseError(f"feature index must be >= 1, got {idx}", lineno)
            if not np.isfinite(x):
                raise LibsvmParseError(f"non-finite value in {tok!r}", lineno)
            if idx in row:
                raise LibsvmParseError(f"duplicate feature index {idx}", lineno)
            row[idx] = x
        for idx in sorted(row):
            indices.append(idx - 1)
            values.append(row[idx])
        d = max(d, max(row, default=0))
        indptr.append(len(indices))
    n = len(indptr) - 1
    if n == 0:
        raise ValueError("LIBSVM input contains no data lines")
    if d == 0:
        raise ValueError("LIBSVM input has no features")
    rows = sp.csr_matrix((np.array(values), np.array(indices, dtype=np.int64), np.array(indptr)), shape=(n, d))
    return DataMatrix(rows)


def format_libsvm(data, labels=None):
    """Serialize to LIBSVM lines (label 0 unless given); values use repr."""
    rows = sp.csr_matrix(data.rows)
    out = []
    for i in range(data.n):
        lo, hi = rows.indptr[i], rows.indptr[i + 1]
        feats = " ".join(f"{j + 1}:{float(v)!r}" for j, v in zip(rows.indices[lo:hi], rows.data[lo:hi]))
        label = 0 if labels is None else labels[i]
        out.append(f"{label} {feats}".rstrip())
    return out


def write_libsvm(data, path, labels=None):
    with open(path, "w") as fh:
        fh.write("\n".join(format_libsvm(data, labels)) + "\n")


def _orthonormal(rng, rows, cols):
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def synthetic_spectrum(spectrum, n, seed=0, rotate=True):
    """Data whose sample covariance is exactly U diag(spectrum) U^T.

    A = sqrt(n) U diag(sqrt(lambda)) V^T with U (d x d) and V (n x d) having
    orthonormal columns, so (1/n) A A^T = U diag(lambda) U^T.  With
    ``rotate=False`` U and V are identity blocks.
    """
    lam = np.asarray(spectrum, dtype=np.float64)
    d = lam.size
    if d < 2:
        raise ValueError("spectrum needs at least two values")
    if np.any(lam < 0) or np.any(np.diff(lam) > 0):
        raise ValueError("spectrum must be non-negative and non-increasing")
    if d > n:
        raise ValueError(f"spectrum length {d} exceeds n={n}")
    if rotate:
        rng = np.random.default_rng(seed)
        u = _orthonormal(rng, d, d)
        v = _orthonormal(rng, n, d)
    else:
        u = np.eye(d)
        v = np.eye(n, d)
    rows = np.sqrt(n) * (v * np.sqrt(lam)) @ u.T
    return DataMatrix(rows), SpectralReference(lam.copy(), u)


def fixture_a():
    """Two data vectors a_1 = (2, 0), a_2 = (0, 1); C = diag(2, 0.5)."""
    data = DataMatrix(np.array([[2.0, 0.0], [0.0, 1.0]]))
    return data, SpectralReference(np.array([2.0, 0.5]), np.eye(2))


def spectrum_b(n=2000, seed=0):
    return synthetic_spectrum(SPECTRUM_B, n, seed)


def _deflated_power(data, k, tol, max_iter, seed):
    rng = np.random.default_rng(seed)
    vecs, vals = [], []
    for _ in range(k):
        w = normalize(rng.standard_normal(data.d))
        lam = 0.0
        for _ in range(max_iter):
            cw = covariance_matvec(data, w)
            for u, l in zip(vecs, vals):
                cw -= l * (u @ w) * u
            lam = float(w @ cw)
            if np.linalg.norm(cw - lam * w) <= tol:
                break
            w = normalize(cw)
        vecs.append(w)
        vals.append(lam)
    return np.array(vals), np.column_stack(vecs)


def reference_eigenpairs(data, k=2, tol=1e-12, max_iter=100_000, seed=0):
    """Top-k eigenpairs of C (k is 1 or 2; the second is always computed so
    the gap can be checked).  Dense eigh up to d = 512, deflated power
    iteration above."""
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    if data.d <= EXPLICIT_COVARIANCE_MAX_DIM:
        vals, vecs = np.linalg.eigh(data.explicit_covariance())
        order = np.argsort(vals)[::-1]
        vals = np.clip(vals[order], 0.0, None)
        vecs = vecs[:, order]
        if data.d == 1:
            vals = np.append(vals, 0.0)
    else:
        vals, vecs = _deflated_power(data, 2, tol, max_iter, seed)
    return SpectralReference(vals, vecs)


def standardize(data):
    """Per-feature mean 0 and population sd 1; constant features become 0.

    The result is dense since centring fills in the zeros.
    """
    if data.n < 2:
        raise ValueError("standardize needs n >= 2")
    x = data.dense()
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    z = x - mean
    keep = sd >= 1e-12
    z[:, keep] /= sd[keep]
    z[:, ~keep] = 0.0
    return DataMatrix(z)


def minmax_scale(data):
    """Map each feature to [0, 1] using min/max over all n values,
    implicit zeros included.  Sparse input stays sparse; a zero stays zero
    when the feature minimum is 0."""
    x = data.rows
    if data.is_sparse:
        x = sp.csr_matrix(x)
        lo = np.asarray(x.min(axis=0).todense()).ravel()
        hi = np.asarray(x.max(axis=0).todense()).ravel()
    else:
        lo, hi = x.min(axis=0), x.max(axis=0)
    span = hi - lo
    const = span <= 0
    if np.any(const & (hi != 0)):
        log.warning("%d constant feature(s) zeroed by min-max scaling", int(np.sum(const & (hi != 0))))
    scale = np.where(const, 0.0, 1.0 / np.where(const, 1.0, span))
    if data.is_sparse:
        if np.any(lo[~const] != 0):
            out = (x.toarray() - lo) * scale
            out[:, const] = 0.0
            return DataMatrix(out)
        out = sp.csr_matrix(x @ sp.diags(scale))
        out.eliminate_zeros()
        return DataMatrix(out)
    out = (x - lo) * scale
    out[:, const] = 0.0
    return DataMatrix(out)


def load_dataset(spec):
    """Load and preprocess; returns (DataMatrix, SpectralReference)."""
    if spec.source == "synthetic":
        data, ref = synthetic_spectrum(spec.spectrum, spec.n, spec.seed, spec.rotate)
    else:
        data, ref = parse_libsvm(spec.path), None
    if spec.preprocessing == "standardize":
        data, ref = standardize(data), None
    elif spec.preprocessing == "minmax":
        data, ref = minmax_scale(data), None
    if ref is None:
        ref = reference_eigenpairs(data)
    return data, ref
