import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import sparse

from sparsecd import (
    Dataset,
    L1,
    LHalf,
    MCP,
    Quadratic,
    SolverConfig,
    anderson_extrapolate,
    build_working_set,
    fit,
    generate_correlated_gaussian,
    lambda_max,
    path_fit,
)
from sparsecd import _kernels
from sparsecd.datafits import Quadratic as Quad


def lasso_objective(ds, lmbda, beta):
    r = ds.y.values - ds.X.toarray() @ beta
    return 0.5 * float(r @ r) / ds.X.n_samples + lmbda * float(np.abs(beta).sum())


# -- cd epoch ---------------------------------------------------------------------


def test_one_epoch_solves_1d_lasso():
    ds = Dataset.from_arrays(np.array([[1.0]]), np.array([1.0]))
    res = fit(ds, Quadratic(), L1(0.3), SolverConfig(tol=1e-14, max_inner=1))
    assert res.beta[0] == pytest.approx(0.7, abs=1e-15)


def test_epoch_noop_above_lambda_max(rng):
    ds, _ = generate_correlated_gaussian(40, 30, 0.4, 5, 5.0, seed=9)
    lmax = lambda_max(ds)
    bound = Quadratic().bind(ds)
    beta = np.zeros(30)
    cache = bound.init_cache(beta)
    pen = L1(1.2 * lmax)
    pa, pb = pen.kernel_params
    _kernels.epoch_dense(
        bound.design.raw, bound.kernel_aux, cache, beta, bound.lipschitz,
        np.arange(30, dtype=np.int64), bound.kernel_code, pen.kernel_code, pa, pb, False,
    )
    np.testing.assert_array_equal(beta, 0.0)


def test_epoch_decreases_convex_objective():
    rng = np.random.default_rng(31)
    for _ in range(500):
        n, p = rng.integers(3, 10), rng.integers(2, 8)
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        ds = Dataset.from_arrays(X, y)
        bound = Quadratic().bind(ds)
        lmbda = rng.uniform(0.01, 1.0)
        pen = L1(lmbda)
        beta = rng.standard_normal(p)
        cache = bound.init_cache(beta)
        before = lasso_objective(ds, lmbda, beta)
        pa, pb = pen.kernel_params
        _kernels.epoch_dense(
            bound.design.raw, bound.kernel_aux, cache, beta, bound.lipschitz,
            np.arange(p, dtype=np.int64), bound.kernel_code, pen.kernel_code, pa, pb, False,
        )
        after = lasso_objective(ds, lmbda, beta)
        assert after <= before + 1e-12


# -- Anderson extrapolation ---------------------------------------------------------


def test_anderson_identical_iterates_falls_back():
    x = np.ones(4)
    assert anderson_extrapolate([x, x, x]) is None


def test_anderson_2d_affine_exact():
    # exact recovery needs the initial error inside an eigenspace: with
    # x0 = (1, 1) choose b so that x* = (0, 1), making e0 an eigenvector
    T = np.diag([0.5, 0.2])
    x_star = np.array([0.0, 1.0])
    b = (np.eye(2) - T) @ x_star
    xs = [np.array([1.0, 1.0])]
    for _ in range(2):
        xs.append(T @ xs[-1] + b)
    extr = anderson_extrapolate(xs)
    oracle = np.linalg.solve(np.eye(2) - T, b)
    np.testing.assert_allclose(extr, oracle, atol=1e-10)


def test_anderson_1d_geometric_exact_through_rank_deficiency():
    # U^T U is rank one here; the null-space solve recovers the fixed point
    # exactly instead of falling back
    extr = anderson_extrapolate([np.array([1.0]), np.array([0.5]), np.array([0.25])])
    assert extr is not None
    np.testing.assert_allclose(extr, [0.0], atol=1e-12)


@pytest.mark.parametrize("dim", [1, 2, 3, 4])
def test_anderson_exact_low_dim_affine(dim):
    rng = np.random.default_rng(40 + dim)
    M = 5
    evals = rng.uniform(0.1, 0.9, size=dim)
    Q = np.linalg.qr(rng.standard_normal((dim, dim)))[0]
    T = Q @ np.diag(evals) @ Q.T
    b = rng.standard_normal(dim)
    xs = [rng.standard_normal(dim)]
    for _ in range(M):
        xs.append(T @ xs[-1] + b)
    extr = anderson_extrapolate(xs)
    oracle = np.linalg.solve(np.eye(dim) - T, b)
    np.testing.assert_allclose(extr, oracle, atol=1e-9)


def test_anderson_requires_three_iterates():
    with pytest.raises(ValueError):
        anderson_extrapolate([np.ones(2), np.ones(2)])


# -- working set construction ----------------------------------------------------------


def test_build_working_set_tie_break():
    ws, k = build_working_set(np.zeros(10), np.array([], dtype=np.int64), 0, 4, 10)
    np.testing.assert_array_equal(ws, [0, 1, 2, 3])
    assert k == 4


def test_build_working_set_growth_rule():
    scores = np.arange(20.0)
    ws, k = build_working_set(scores, np.array([0], dtype=np.int64), 7, 10, 20)
    assert k == 14  # max(10, 2 * 7)
    assert 0 in ws and len(ws) >= 14


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_build_working_set_nestedness(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.integers(3, 40))
    scores = rng.random(p)
    current = np.unique(rng.integers(0, p, size=rng.integers(0, p)))
    gsupp = int(rng.integers(0, p))
    prev = int(rng.integers(1, p + 1))
    ws, k = build_working_set(scores, current, gsupp, prev, p)
    assert set(current).issubset(set(ws.tolist()))
    assert k == min(p, max(prev, 2 * gsupp))
    assert np.all(np.diff(ws) > 0)


# -- inner/outer solver ------------------------------------------------------------------


def test_acceleration_off_is_bitwise_plain_cd():
    ds, _ = generate_correlated_gaussian(60, 80, 0.5, 10, 5.0, seed=6)
    lmax = lambda_max(ds)
    base = dict(tol=1e-30, max_outer=1, max_inner=25, use_working_sets=False)
    res_plain = fit(ds, Quadratic(), L1(lmax / 20), SolverConfig(use_acceleration=False, **base))
    # acceleration enabled but memory so large it never triggers
    res_noacc = fit(
        ds, Quadratic(), L1(lmax / 20), SolverConfig(use_acceleration=True, anderson_memory=500, **base)
    )
    np.testing.assert_array_equal(res_plain.beta, res_noacc.beta)


def reference_cyclic_prox_cd(X, y, lmbda, n_epochs):
    """Textbook cyclic prox-CD, accumulation order matching the kernels."""
    n, p = X.shape
    L = np.array([sum(X[i, j] * X[i, j] for i in range(n)) / n for j in range(p)])
    beta = np.zeros(p)
    xb = np.zeros(n)
    for _ in range(n_epochs):
        for j in range(p):
            if L[j] == 0:
                continue
            acc = 0.0
            for i in range(n):
                acc += X[i, j] * (xb[i] - y[i])
            g = acc / n
            step = 1.0 / L[j]
            z = beta[j] - g * step
            t = lmbda * step
            new = np.sign(z) * max(abs(z) - t, 0.0)
            if new != beta[j]:
                d = new - beta[j]
                for i in range(n):
                    xb[i] += d * X[i, j]
                beta[j] = new
    return beta


def test_fit_matches_textbook_cd_bitwise():
    rng = np.random.default_rng(12)
    X = rng.standard_normal((12, 7))
    y = rng.standard_normal(12)
    ds = Dataset.from_arrays(X, y)
    lmbda = 0.05
    cfg = SolverConfig(
        tol=1e-300, max_outer=1, max_inner=13,
        use_working_sets=False, use_acceleration=False,
    )
    res = fit(ds, Quadratic(), L1(lmbda), cfg)
    ref = reference_cyclic_prox_cd(X, y, lmbda, 13)
    np.testing.assert_array_equal(res.beta, ref)


def test_fit_lasso_matches_full_cd_oracle():
    ds, _ = generate_correlated_gaussian(200, 400, 0.6, 40, 5.0, seed=0)
    lmax = lambda_max(ds)
    lmbda = lmax / 10
    res_ws = fit(ds, Quadratic(), L1(lmbda), SolverConfig(tol=1e-9))
    assert res_ws.stop_reason == "tolerance_met"
    assert res_ws.kkt_violation <= 1e-9
    res_cd = fit(
        ds, Quadratic(), L1(lmbda),
        SolverConfig(tol=1e-12, use_working_sets=False, use_acceleration=False, max_inner=50_000),
    )
    o_ws = lasso_objective(ds, lmbda, res_ws.beta)
    o_cd = lasso_objective(ds, lmbda, res_cd.beta)
    assert abs(o_ws - o_cd) <= 1e-10 * abs(o_cd)


def test_fit_zero_above_lambda_max_single_outer():
    ds, _ = generate_correlated_gaussian(50, 70, 0.5, 7, 5.0, seed=2)
    lmax = lambda_max(ds)
    res = fit(ds, Quadratic(), L1(1.0001 * lmax), SolverConfig(tol=1e-10))
    assert np.count_nonzero(res.beta) == 0
    assert sum(1 for r in res.trace if r.kind == "outer") == 1
    assert res.n_epochs == 0


def test_fit_mcp_reaches_fixed_point():
    ds, _ = generate_correlated_gaussian(100, 150, 0.5, 15, 10.0, seed=3)
    from sparsecd import scale_columns_to_sqrt_n

    ds, _ = scale_columns_to_sqrt_n(ds)
    lmax = lambda_max(ds)
    pen = MCP(lmax / 5, 3.0)
    res = fit(ds, Quadratic(), pen, SolverConfig(tol=1e-10))
    assert res.stop_reason == "tolerance_met"
    bound = Quadratic().bind(ds)
    grads = bound.full_gradient(bound.init_cache(res.beta))
    scores = pen.fixed_point_score(res.beta, grads, bound.lipschitz)
    assert float(np.max(scores * bound.lipschitz)) <= 1e-8


def test_working_set_nestedness_full_fit():
    ds, _ = generate_correlated_gaussian(80, 200, 0.6, 20, 5.0, seed=4)
    lmax = lambda_max(ds)
    res = fit(ds, Quadratic(), L1(lmax / 50), SolverConfig(tol=1e-10))
    outer_ws = [set(r.ws_indices.tolist()) for r in res.trace if r.kind == "outer" and r.ws_indices is not None]
    assert len(outer_ws) >= 2
    for a, b in zip(outer_ws, outer_ws[1:]):
        assert a.issubset(b)


def test_termination_contract_recomputed():
    ds, _ = generate_correlated_gaussian(60, 90, 0.5, 9, 5.0, seed=5)
    lmax = lambda_max(ds)
    pen = L1(lmax / 10)
    res = fit(ds, Quadratic(), pen, SolverConfig(tol=1e-9))
    bound = Quadratic().bind(ds)
    grads = bound.full_gradient(bound.init_cache(res.beta))
    fresh = float(np.max(pen.subdiff_distance(res.beta, -grads)))
    assert res.kkt_violation == pytest.approx(fresh, rel=1e-12, abs=1e-18)
    assert (res.stop_reason == "tolerance_met") == (fresh <= 1e-9)


def test_budget_exhausted_is_not_an_error():
    ds, _ = generate_correlated_gaussian(60, 90, 0.5, 9, 5.0, seed=5)
    lmax = lambda_max(ds)
    res = fit(ds, Quadratic(), L1(lmax / 100), SolverConfig(tol=1e-14, max_outer=1, max_inner=1))
    assert res.stop_reason == "budget_exhausted"
    assert np.all(np.isfinite(res.beta))


def test_anderson_guard_strict_decrease():
    ds, _ = generate_correlated_gaussian(120, 300, 0.6, 30, 5.0, seed=7)
    lmax = lambda_max(ds)
    res = fit(ds, Quadratic(), L1(lmax / 100), SolverConfig(tol=1e-10))
    assert res.n_extrapolations_accepted >= 1
    assert len(res.extrapolation_events) == res.n_extrapolations_accepted
    for phi_before, phi_after in res.extrapolation_events:
        assert phi_after < phi_before


def test_zero_column_pinned_and_excluded():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((30, 5))
    X[:, 2] = 0.0
    y = rng.standard_normal(30)
    ds = Dataset.from_arrays(X, y)
    res = fit(ds, Quadratic(), L1(0.01), SolverConfig(tol=1e-10))
    assert res.beta[2] == 0.0
    for rec in res.trace:
        if rec.ws_indices is not None:
            assert 2 not in rec.ws_indices


# -- l0.5 escape ---------------------------------------------------------------------


def test_lhalf_escape_threshold():
    rng = np.random.default_rng(9)
    for trial in range(10):
        n, p = 20, 6
        X = rng.standard_normal((n, p))
        y = rng.standard_normal(n)
        ds = Dataset.from_arrays(X, y)
        bound = Quadratic().bind(ds)
        g0 = np.abs(bound.full_gradient(bound.init_cache(np.zeros(p))))
        L = bound.lipschitz
        crit = np.max(((2.0 / 3.0) * g0 / L ** (1.0 / 3.0)) ** 1.5)
        for factor, escapes in ((0.9, True), (1.1, False)):
            pen = LHalf(factor * crit)
            res = fit(ds, Quadratic(), pen, SolverConfig(tol=1e-12))
            assert (np.count_nonzero(res.beta) > 0) == escapes, (trial, factor)


# -- warm-started paths -----------------------------------------------------------------


def test_path_fit_warm_start_beats_cold():
    ds, beta_star = generate_correlated_gaussian(100, 200, 0.6, 20, 5.0, seed=10)
    lmax = lambda_max(ds)
    lambdas = (lmax * np.geomspace(1.0, 0.01, 12)).tolist()
    cfg = SolverConfig(tol=1e-8)
    warm = path_fit(ds, Quadratic(), lambda lam: L1(lam), lambdas, cfg, beta_star=beta_star)
    assert warm[0].nnz == 0  # first grid point is lambda_max
    warm_epochs = sum(pt.result.n_epochs for pt in warm)
    cold_epochs = sum(
        fit(ds, Quadratic(), L1(lam), cfg).n_epochs for lam in lambdas
    )
    assert warm_epochs < cold_epochs
    assert all(pt.est_error is not None for pt in warm)


def test_path_fit_deterministic():
    ds, _ = generate_correlated_gaussian(50, 80, 0.5, 8, 5.0, seed=11)
    lmax = lambda_max(ds)
    lambdas = (lmax * np.geomspace(1.0, 0.05, 6)).tolist()
    a = path_fit(ds, Quadratic(), lambda lam: L1(lam), lambdas, SolverConfig(tol=1e-9))
    b = path_fit(ds, Quadratic(), lambda lam: L1(lam), lambdas, SolverConfig(tol=1e-9))
    for pa, pb in zip(a, b):
        np.testing.assert_array_equal(pa.result.beta, pb.result.beta)


def test_path_fit_requires_decreasing():
    ds, _ = generate_correlated_gaussian(20, 10, 0.3, 2, 5.0, seed=12)
    with pytest.raises(ValueError, match="decreasing"):
        path_fit(ds, Quadratic(), lambda lam: L1(lam), [0.1, 0.2], SolverConfig())


# -- config validation ---------------------------------------------------------------------


def test_config_invariants():
    with pytest.raises(ValueError):
        SolverConfig(tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(anderson_memory=1)
    with pytest.raises(ValueError):
        SolverConfig(initial_ws_size=0)
    with pytest.raises(ValueError):
        SolverConfig(score_kind="bogus")


def test_sparse_dense_agreement():
    ds, _ = generate_correlated_gaussian(50, 60, 0.4, 6, 5.0, seed=13)
    Xd = ds.X.toarray()
    Xd[np.abs(Xd) < 0.8] = 0.0
    dense = Dataset.from_arrays(Xd, ds.y.values)
    sp = Dataset.from_arrays(sparse.csc_matrix(Xd), ds.y.values)
    lmax = lambda_max(dense)
    r1 = fit(dense, Quadratic(), L1(lmax / 10), SolverConfig(tol=1e-11))
    r2 = fit(sp, Quadratic(), L1(lmax / 10), SolverConfig(tol=1e-11))
    np.testing.assert_allclose(r1.beta, r2.beta, atol=1e-10)


# -- multitask block solves ---------------------------------------------------------------


def make_multitask(seed=0, n=60, p=40, T=3, nnz=5, noise=0.05):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    B = np.zeros((p, T))
    rows = rng.choice(p, size=nnz, replace=False)
    B[rows] = rng.standard_normal((nnz, T))
    Y = X @ B + noise * rng.standard_normal((n, T))
    from sparsecd import DesignMatrix, Target

    return Dataset(DesignMatrix(X), Target(Y)), B


def test_multitask_block_l1_fit():
    from sparsecd import Block, QuadraticMultiTask

    ds, B = make_multitask()
    lmax = lambda_max(ds)
    res = fit(ds, QuadraticMultiTask(), Block(L1(lmax / 10)), SolverConfig(tol=1e-9))
    assert res.stop_reason == "tolerance_met"
    assert res.beta.shape == B.shape
    row_norms = np.linalg.norm(res.beta, axis=1)
    assert 0 < np.count_nonzero(row_norms) < ds.X.n_features
    # above the multitask lambda_max the solution is the zero matrix
    zero = fit(ds, QuadraticMultiTask(), Block(L1(1.001 * lmax)), SolverConfig(tol=1e-10))
    assert not np.any(zero.beta)


def test_multitask_single_column_matches_single_task():
    from sparsecd import Block, DesignMatrix, QuadraticMultiTask, Target

    ds, _ = generate_correlated_gaussian(50, 30, 0.4, 5, 5.0, seed=21)
    lmax = lambda_max(ds)
    single = fit(ds, Quadratic(), L1(lmax / 10), SolverConfig(tol=1e-12))
    mt_ds = Dataset(DesignMatrix(ds.X.toarray()), Target(ds.y.values[:, None]))
    multi = fit(mt_ds, QuadraticMultiTask(), Block(L1(lmax / 10)), SolverConfig(tol=1e-12))
    np.testing.assert_allclose(multi.beta[:, 0], single.beta, atol=1e-10)


def test_multitask_block_mcp_and_sparse_design():
    from sparsecd import Block, DesignMatrix, QuadraticMultiTask, Target

    ds, _ = make_multitask(seed=5, noise=0.02)
    Xd = ds.X.toarray()
    Xd[np.abs(Xd) < 0.6] = 0.0
    dense = Dataset(DesignMatrix(Xd), ds.y)
    sp = Dataset(DesignMatrix(sparse.csc_matrix(Xd)), ds.y)
    lmax = lambda_max(dense)
    pen = Block(MCP(lmax / 8, 3.0))
    from sparsecd import QuadraticMultiTask as QMT

    r1 = fit(dense, QMT(), pen, SolverConfig(tol=1e-10))
    r2 = fit(sp, QMT(), pen, SolverConfig(tol=1e-10))
    np.testing.assert_allclose(r1.beta, r2.beta, atol=1e-9)
    assert r1.stop_reason == "tolerance_met"
