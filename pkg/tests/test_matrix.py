import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vrhb.errors import NumericError
from vrhb.matrix import (
    DataMatrix,
    MiniBatch,
    covariance_matvec,
    error_gap,
    minibatch_matvec,
    normalize,
    project_orthogonal,
    rayleigh_quotient,
    sample_minibatch,
)

# tiny magnitudes are flushed to 0 so products of norms cannot underflow
finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False).map(lambda x: x if abs(x) > 1e-50 else 0.0)


def data_and_vec(max_n=7, max_d=6):
    return st.tuples(st.integers(1, max_n), st.integers(1, max_d)).flatmap(
        lambda nd: st.tuples(arrays(np.float64, nd, elements=finite), arrays(np.float64, nd[1], elements=finite))
    )


def brute_covariance(rows):
    n, d = rows.shape
    cov = np.zeros((d, d))
    for i in range(d):
        for j in range(d):
            cov[i, j] = sum(rows[l, i] * rows[l, j] for l in range(n)) / n
    return cov


def close(a, b, rtol=1e-12):
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    return np.max(np.abs(a - b)) <= rtol * scale


def test_covariance_fixture(fixa):
    data, _ = fixa
    assert np.allclose(covariance_matvec(data, [1.0, 1.0]), [2.0, 0.5], rtol=0, atol=1e-15)
    assert np.all(covariance_matvec(data, np.zeros(2)) == 0)


def test_covariance_against_brute_force():
    rng = np.random.default_rng(1)
    rows = rng.standard_normal((5, 8))
    v = rng.standard_normal(8)
    assert close(covariance_matvec(DataMatrix(rows), v), brute_covariance(rows) @ v)


def test_covariance_dimension_mismatch(fixa):
    with pytest.raises(ValueError):
        covariance_matvec(fixa[0], np.ones(3))


def test_minibatch_fixture(fixa):
    data, _ = fixa
    assert np.array_equal(minibatch_matvec(data, MiniBatch([0]), [1.0, 1.0]), [4.0, 0.0])
    assert np.array_equal(minibatch_matvec(data, MiniBatch([1]), [1.0, 1.0]), [0.0, 1.0])


def test_minibatch_rejects_empty_and_bad():
    with pytest.raises(ValueError):
        MiniBatch([])
    with pytest.raises(ValueError):
        MiniBatch([0, 0])
    with pytest.raises(ValueError):
        MiniBatch([5]).validate(3)


def test_projection_examples():
    w0 = np.array([0.3, -1.2, 2.0])
    assert np.allclose(project_orthogonal(w0, w0), 0, atol=1e-15)
    assert np.array_equal(project_orthogonal([1.0, 0.0], [3.0, 4.0]), [0.0, 4.0])
    with pytest.raises(ValueError):
        project_orthogonal(np.zeros(2), [1.0, 1.0])


@given(arrays(np.float64, 6, elements=finite), arrays(np.float64, 6, elements=finite))
def test_projection_orthogonal_and_idempotent(a, v):
    if np.linalg.norm(a) < 1e-3:
        return
    p = project_orthogonal(a, v)
    assert abs(a @ p) <= 1e-12 * max(np.linalg.norm(a) * np.linalg.norm(v), 1e-300) * 10
    assert np.allclose(project_orthogonal(a, p), p, rtol=1e-12, atol=1e-12 * max(np.linalg.norm(v), 1e-300))


def test_sample_minibatch_full_and_errors():
    rng = np.random.default_rng(0)
    assert list(sample_minibatch(5, 5, rng).indices) == [0, 1, 2, 3, 4]
    for bad in (0, 6):
        with pytest.raises(ValueError):
            sample_minibatch(5, bad, rng)


def test_sample_minibatch_deterministic():
    a = sample_minibatch(50, 7, np.random.default_rng(42))
    b = sample_minibatch(50, 7, np.random.default_rng(42))
    assert np.array_equal(a.indices, b.indices)
    assert len(set(a.indices)) == 7


def test_sample_minibatch_uniform():
    rng = np.random.default_rng(123)
    hits = sum(int(sample_minibatch(2, 1, rng).indices[0]) for _ in range(10_000))
    assert abs(hits / 10_000 - 0.5) <= 0.02


def test_rayleigh_quotient(fixa):
    data, _ = fixa
    assert rayleigh_quotient(data, [1.0, 0.0]) == 2.0
    assert rayleigh_quotient(data, [0.0, 1.0]) == 0.5
    assert abs(rayleigh_quotient(data, np.ones(2) / np.sqrt(2)) - 1.25) < 1e-15
    with pytest.raises(ValueError):
        rayleigh_quotient(data, np.zeros(2))


def test_error_gap_examples():
    u1, u2 = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    assert error_gap(u1, u1) == 0
    assert error_gap(-u1, u1) == 0
    assert abs(error_gap((u1 + u2) / np.sqrt(2), u1) - 0.5) < 1e-15
    with pytest.raises(ValueError):
        error_gap(2 * u1, u1)


def test_error_gap_resolves_tiny_angles():
    eps = 1e-10
    w = normalize(np.array([1.0, eps]))
    assert abs(error_gap(w, np.array([1.0, 0.0])) - eps**2) <= 1e-6 * eps**2


def test_normalize():
    assert np.allclose(normalize([3.0, 4.0]), [0.6, 0.8], rtol=0, atol=1e-16)
    u = normalize(np.array([1.0, 2.0, 2.0]))
    assert np.allclose(normalize(u), u, rtol=0, atol=1e-15)
    assert abs(np.linalg.norm(normalize([1e-120, 3e-121])) - 1) <= 1e-12
    with pytest.raises(NumericError):
        normalize([1e-200, 0.0])
    with pytest.raises(NumericError):
        normalize([np.inf, 0.0])
    with pytest.raises(NumericError):
        normalize(np.zeros(3))


@given(data_and_vec())
def test_full_batch_identity(dv):
    rows, v = dv
    data = DataMatrix(rows)
    assert close(minibatch_matvec(data, MiniBatch(np.arange(data.n)), v), covariance_matvec(data, v))


@given(data_and_vec(), arrays(np.float64, 6, elements=finite))
def test_implied_covariance_symmetric_and_psd(dv, u):
    rows, v = dv
    data = DataMatrix(rows)
    u = u[: data.d]
    lhs, rhs = u @ covariance_matvec(data, v), v @ covariance_matvec(data, u)
    scale = np.linalg.norm(u) * np.linalg.norm(v) * np.max(np.abs(rows)) ** 2 + 1e-300
    assert abs(lhs - rhs) <= 1e-12 * scale
    if np.linalg.norm(v) > 0:
        assert rayleigh_quotient(data, v) >= -1e-12 * np.max(np.abs(rows)) ** 2


@given(data_and_vec(), st.data())
def test_sparse_dense_equivalence(dv, draw):
    rows, v = dv
    rows = np.where(np.abs(rows) < 3, 0.0, rows)
    dense, sparse = DataMatrix(rows), DataMatrix(sp.csr_matrix(rows))
    assert sparse.is_sparse and not dense.is_sparse
    idx = draw.draw(st.lists(st.integers(0, dense.n - 1), min_size=1, unique=True))
    assert close(covariance_matvec(dense, v), covariance_matvec(sparse, v))
    assert close(minibatch_matvec(dense, MiniBatch(idx), v), minibatch_matvec(sparse, MiniBatch(idx), v))
    assert np.allclose(dense.column_norms, sparse.column_norms, rtol=1e-12, atol=0)
    if np.linalg.norm(v) > 0:
        assert abs(rayleigh_quotient(dense, v) - rayleigh_quotient(sparse, v)) <= 1e-12 * max(
            abs(rayleigh_quotient(dense, v)), 1e-300
        ) + 1e-300


def test_data_validation():
    with pytest.raises(ValueError):
        DataMatrix(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError):
        DataMatrix(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        DataMatrix(np.ones(3))


def test_explicit_covariance_threshold():
    with pytest.raises(ValueError):
        DataMatrix(sp.csr_matrix((2, 600))).explicit_covariance()
    data = DataMatrix(np.array([[2.0, 0.0], [0.0, 1.0]]))
    assert np.array_equal(data.explicit_covariance(), np.diag([2.0, 0.5]))
