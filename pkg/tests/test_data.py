import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from sparsecd import (
    Dataset,
    DesignMatrix,
    L1,
    LibsvmParseError,
    Quadratic,
    SolverConfig,
    Target,
    column_squared_norms,
    fit,
    generate_correlated_gaussian,
    lambda_max,
    read_libsvm,
    scale_columns_to_sqrt_n,
    write_libsvm,
)


# -- libsvm parsing ----------------------------------------------------------


def test_read_single_line(tmp_path):
    f = tmp_path / "a.svm"
    f.write_text("-1 1:0.5 3:2.0\n")
    ds = read_libsvm(f)
    X = ds.X.toarray()
    assert X.shape == (1, 3)
    assert X[0, 0] == 0.5 and X[0, 1] == 0.0 and X[0, 2] == 2.0
    assert ds.y.values[0] == -1.0
    assert ds.y.labels is not None


def test_read_empty_file(tmp_path):
    f = tmp_path / "empty.svm"
    f.write_text("")
    with pytest.raises(LibsvmParseError, match="no samples"):
        read_libsvm(f)


def test_read_two_lines_csc_fields(tmp_path):
    f = tmp_path / "b.svm"
    f.write_text("1 1:1\n-1 2:1\n")
    ds = read_libsvm(f)
    csc = ds.X.raw
    assert sparse.issparse(csc)
    np.testing.assert_array_equal(csc.indptr, [0, 1, 2])
    np.testing.assert_array_equal(csc.indices, [0, 1])
    np.testing.assert_array_equal(csc.data, [1.0, 1.0])
    np.testing.assert_array_equal(ds.y.values, [1.0, -1.0])


@pytest.mark.parametrize(
    "content,match",
    [
        ("1 a:b\n", "line 1"),
        ("foo 1:1\n", "line 1"),
        ("1 1:1\n-1 2:1 2:3\n", "line 2"),
        ("1 3:1 2:1\n", "not strictly increasing"),
        ("1 0:1\n", "not 1-based"),
    ],
)
def test_read_malformed(tmp_path, content, match):
    f = tmp_path / "bad.svm"
    f.write_text(content)
    with pytest.raises(LibsvmParseError, match=match):
        read_libsvm(f)


def test_read_n_features_override(tmp_path):
    f = tmp_path / "c.svm"
    f.write_text("1 2:3.5\n")
    assert read_libsvm(f, n_features=5).X.n_features == 5
    with pytest.raises(LibsvmParseError):
        read_libsvm(f, n_features=1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_libsvm_round_trip(seed):
    rng = np.random.default_rng(seed)
    n, p = rng.integers(1, 8), rng.integers(1, 8)
    X = sparse.random(n, p, density=0.5, random_state=np.random.RandomState(seed), format="csc")
    # keep at least one entry in the last column so p survives the round trip
    X = X.tolil()
    X[rng.integers(0, n), p - 1] = 1.2345
    X = X.tocsc()
    y = rng.standard_normal(n)
    ds = Dataset.from_arrays(X, y)
    import tempfile, os

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "rt.svm")
        write_libsvm(ds, path)
        back = read_libsvm(path)
    a, b = ds.X.raw, back.X.raw
    assert a.shape == b.shape
    np.testing.assert_array_equal(a.indptr, b.indptr)
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_allclose(a.data, b.data, rtol=1e-12)
    np.testing.assert_allclose(ds.y.values, back.y.values, rtol=1e-12)


# -- containers and invariants ----------------------------------------------


def test_csc_duplicate_indices_rejected():
    data = np.array([1.0, 2.0])
    indices = np.array([0, 0])
    indptr = np.array([0, 2])
    bad = sparse.csc_matrix((data, indices, indptr), shape=(3, 1))
    with pytest.raises(ValueError, match="strictly increasing"):
        DesignMatrix(bad)


def test_dense_and_csc_column_products_agree(rng):
    X = rng.standard_normal((7, 5))
    d = DesignMatrix(X)
    s = DesignMatrix(sparse.csc_matrix(X))
    v = rng.standard_normal(7)
    np.testing.assert_allclose(d.rmatvec(v), s.rmatvec(v), rtol=1e-12)


def test_target_label_validation():
    with pytest.raises(ValueError, match="-1 or \\+1"):
        Target(np.array([1.0, 2.0]), labels=np.array([1.0, 2.0]))
    with pytest.raises(ValueError, match="one entry per sample"):
        Target(np.array([1.0, 2.0]), labels=np.array([1.0]))


def test_dataset_shape_mismatch():
    with pytest.raises(ValueError, match="rows"):
        Dataset.from_arrays(np.eye(3), np.ones(2))


# -- synthetic generator -----------------------------------------------------


def test_generator_reproducible():
    a, bs_a = generate_correlated_gaussian(30, 12, 0.5, 4, 5.0, seed=42)
    b, bs_b = generate_correlated_gaussian(30, 12, 0.5, 4, 5.0, seed=42)
    np.testing.assert_array_equal(a.X.toarray(), b.X.toarray())
    np.testing.assert_array_equal(a.y.values, b.y.values)
    np.testing.assert_array_equal(bs_a, bs_b)


def test_generator_rho_zero_uncorrelated():
    ds, _ = generate_correlated_gaussian(2000, 4, 0.0, 2, 5.0, seed=1)
    X = ds.X.toarray()
    corr = np.corrcoef(X[:, 1], X[:, 2])[0, 1]
    assert abs(corr) < 0.1


def test_generator_snr_exact():
    ds, beta_star = generate_correlated_gaussian(200, 400, 0.6, 40, 5.0, seed=3)
    signal = ds.X.toarray() @ beta_star
    noise = ds.y.values - signal
    assert np.linalg.norm(signal) / np.linalg.norm(noise) == pytest.approx(5.0, rel=1e-12)


def test_generator_huge_snr_limit():
    ds, beta_star = generate_correlated_gaussian(50, 30, 0.3, 5, 1e9, seed=4)
    signal = ds.X.toarray() @ beta_star
    np.testing.assert_allclose(ds.y.values, signal, rtol=1e-6)


def test_generator_bad_args():
    with pytest.raises(ValueError):
        generate_correlated_gaussian(10, 5, 0.5, 6, 5.0, seed=0)  # nnz > p
    with pytest.raises(ValueError):
        generate_correlated_gaussian(10, 5, 1.0, 2, 5.0, seed=0)  # rho = 1
    with pytest.raises(ValueError):
        generate_correlated_gaussian(10, 5, 0.5, 2, np.inf, seed=0)  # snr infinite


# -- lambda_max and column norms ----------------------------------------------


def test_lambda_max_arithmetic():
    ds = Dataset.from_arrays(np.array([[1.0, 0.0], [0.0, 2.0]]), np.array([1.0, 1.0]))
    assert lambda_max(ds) == pytest.approx(1.0)


def test_lambda_max_zero_target():
    ds = Dataset.from_arrays(np.eye(3), np.zeros(3))
    assert lambda_max(ds) == 0.0


def test_lambda_max_multitask_variant():
    X = np.array([[1.0, 0.0], [0.0, 2.0]])
    Y = np.array([[1.0, 1.0], [1.0, 0.0]])
    ds = Dataset(DesignMatrix(X), Target(Y))
    # max_j ||X_:j^T Y||_2 / n
    expected = max(np.linalg.norm(X[:, j] @ Y) for j in range(2)) / 2
    assert lambda_max(ds) == pytest.approx(expected)


def test_lambda_max_solver_boundary():
    ds, _ = generate_correlated_gaussian(60, 40, 0.4, 6, 5.0, seed=5)
    lmax = lambda_max(ds)
    res_hi = fit(ds, Quadratic(), L1(1.01 * lmax), SolverConfig(tol=1e-10))
    assert np.count_nonzero(res_hi.beta) == 0
    res_lo = fit(ds, Quadratic(), L1(0.99 * lmax), SolverConfig(tol=1e-12))
    assert np.count_nonzero(res_lo.beta) >= 1


def test_column_squared_norms():
    assert np.allclose(column_squared_norms(DesignMatrix(np.eye(2))), [1.0, 1.0])
    ones = np.ones((4, 1))
    assert column_squared_norms(DesignMatrix(ones))[0] == pytest.approx(4.0)


def test_column_squared_norms_dense_vs_csc(rng):
    X = rng.standard_normal((5, 3))
    dense = column_squared_norms(DesignMatrix(X))
    csc = column_squared_norms(DesignMatrix(sparse.csc_matrix(X)))
    np.testing.assert_allclose(dense, csc, rtol=1e-12)


def test_scale_columns_to_sqrt_n():
    X = np.array([[3.0, 0.0], [4.0, 0.0]])
    ds = Dataset.from_arrays(X, np.ones(2))
    scaled, scales = scale_columns_to_sqrt_n(ds)
    norms = np.sqrt(column_squared_norms(scaled.X))
    assert norms[0] == pytest.approx(np.sqrt(2))
    assert scales[1] == 1.0  # zero column untouched
    np.testing.assert_array_equal(scaled.X.toarray()[:, 1], 0.0)
