"""Working-set coordinate descent with Anderson extrapolation.

The outer loop scores every feature by its optimality violation, grows the
working set, and calls the inner solver; the inner solver alternates CD
epochs with guarded Anderson extrapolation. Out-of-working-set coordinates
contribute a frozen term to the fitted-values cache so warm starts along a
path stay exact.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .data import Dataset

__all__ = [
    "SolverConfig",
    "FitResult",
    "ConvergenceTrace",
    "TraceRecord",
    "PathPoint",
    "anderson_extrapolate",
    "build_working_set",
    "fit",
    "path_fit",
]


@dataclass
class SolverConfig:
    tol: float = 1e-8
    max_outer: int = 50
    max_inner: int = 1000
    anderson_memory: int = 5
    initial_ws_size: int = 10
    use_acceleration: bool = True
    use_working_sets: bool = True
    score_kind: str = "auto"  # auto -> the penalty's preferred score
    symmetric_sweep: bool = False
    record_gsupp_history: bool = False
    compute_gap: bool = False
    max_total_epochs: int | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.anderson_memory < 2:
            raise ValueError("anderson_memory must be >= 2")
        if self.initial_ws_size < 1:
            raise ValueError("initial_ws_size must be >= 1")
        if self.score_kind not in ("auto", "subdiff", "fixed_point"):
            raise ValueError(f"unknown score_kind {self.score_kind!r}")


@dataclass
class TraceRecord:
    time_s: float
    epoch: int
    kind: str  # "outer" or "inner"
    objective: float
    kkt_violation: float
    duality_gap: float | None
    ws_size: int
    gsupp_size: int
    anderson_accepted: bool
    coord_updates: int
    ws_indices: np.ndarray | None = None  # outer records only; not serialized

    FIELDS = (
        "time_s",
        "epoch",
        "objective",
        "kkt_violation",
        "duality_gap",
        "ws_size",
        "gsupp_size",
        "anderson_accepted",
    )

    def row(self) -> dict:
        return {name: getattr(self, name) for name in self.FIELDS}


@dataclass
class ConvergenceTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


@dataclass
class FitResult:
    beta: np.ndarray
    stop_reason: str  # "tolerance_met" or "budget_exhausted"
    kkt_violation: float
    trace: ConvergenceTrace
    n_epochs: int
    total_coord_updates: int
    n_extrapolations_accepted: int
    n_extrapolations_rejected: int
    gsupp_history: list[np.ndarray] | None = None
    extrapolation_events: list[tuple[float, float]] = field(default_factory=list)
    """(objective before, objective after) of every accepted extrapolation."""


@dataclass
class PathPoint:
    lmbda: float
    result: FitResult
    nnz: int
    est_error: float | None
    pred_error: float | None


def anderson_extrapolate(iterates, cond_threshold: float = 1e14):
    """Affine extrapolation from M+1 fixed-point iterates.

    Solves min ||U^T c|| over the affine set sum(c) = 1 with U the matrix
    of consecutive differences, and returns sum_i c_i x^(i) over the last
    M iterates. Returns None (fallback: keep the last iterate) when the
    differences vanish or the solve produces nothing usable. A singular
    U^T U is handled through a null-space least-squares solve: that is
    exactly the case where the affine fixed point is recovered exactly.
    """
    arr = np.asarray(iterates, dtype=np.float64)
    if arr.ndim != 2:
        arr = arr.reshape(arr.shape[0], -1)
    if arr.shape[0] < 3:
        raise ValueError("need at least 3 iterates (M >= 2)")
    U = np.diff(arr, axis=0)  # (M, d), rows are differences
    if not np.isfinite(U).all():
        return None
    if not U.any():
        return None
    M = U.shape[0]
    ones = np.ones(M)
    G = U @ U.T
    c = None
    try:
        if np.linalg.cond(G) < cond_threshold:
            raw = np.linalg.solve(G, ones)
            s = raw.sum()
            if np.isfinite(s) and abs(s) > 1e-12 * np.abs(raw).max():
                c = raw / s
    except np.linalg.LinAlgError:
        c = None
    if c is None:
        # rank-deficient differences: minimize over c = e_M + N gamma with
        # N spanning the sum-zero subspace
        c0 = np.zeros(M)
        c0[-1] = 1.0
        N = np.vstack([np.eye(M - 1), -np.ones(M - 1)])
        gamma, *_ = np.linalg.lstsq(U.T @ N, -U.T @ c0, rcond=None)
        c = c0 + N @ gamma
    extr = c @ arr[1:]
    if not np.isfinite(extr).all():
        return None
    return extr


def build_working_set(scores, current_ws, gsupp_size, prev_ws_size, p):
    """Grow the working set: keep current members, add the top-scored features.

    The target size is min(p, max(prev_ws_size, 2 * gsupp_size)); ties in
    the scores are broken toward the smaller index. Nestedness
    current_ws <= new_ws always holds.
    """
    k = int(min(p, max(prev_ws_size, 2 * gsupp_size)))
    top = np.argsort(-np.asarray(scores), kind="stable")[:k]
    ws = np.union1d(np.asarray(current_ws, dtype=np.int64), top.astype(np.int64))
    return ws.astype(np.int64), k


class _Run:
    """One fit: owns beta, the fitted-values cache and the trace."""

    def __init__(self, dataset, datafit, penalty, config, beta0, on_record):
        self.bound = datafit.bind(dataset)
        self.penalty = penalty
        self.config = config
        self.on_record = on_record
        design = self.bound.design
        self.design = design
        self.p = design.n_features
        self.lips = np.asarray(self.bound.lipschitz, dtype=np.float64)
        self.multitask = self.bound.multitask
        if self.multitask:
            T = self.bound.n_tasks
            self.beta = np.zeros((self.p, T)) if beta0 is None else np.ascontiguousarray(beta0, dtype=np.float64).copy()
            if self.beta.shape != (self.p, T):
                raise ValueError("beta0 has the wrong shape")
        else:
            self.beta = np.zeros(self.p) if beta0 is None else np.asarray(beta0, dtype=np.float64).copy()
            if self.beta.shape != (self.p,):
                raise ValueError("beta0 has the wrong shape")
        self.cache = self.bound.init_cache(self.beta)
        if self.multitask:
            self.cache = np.asfortranarray(self.cache)
        self.score_kind = (
            penalty.preferred_score if config.score_kind == "auto" else config.score_kind
        )
        # zero-Lipschitz coordinates never enter the working set; pin them at
        # the penalty's own minimizer (prox with a huge step)
        dead = self.lips <= 0
        if np.any(dead):
            self.beta[dead] = penalty.prox(self.beta[dead], 1e12)
            self.cache = self.bound.init_cache(self.beta)
        self.records: list[TraceRecord] = []
        self.gsupp_history: list[np.ndarray] | None = [] if config.record_gsupp_history else None
        self.epoch_count = 0
        self.coord_updates = 0
        self.n_accept = 0
        self.n_reject = 0
        self.accept_events: list[tuple[float, float]] = []
        self.t0 = time.monotonic()
        self._gap_fn = self._make_gap_fn() if config.compute_gap else None

    def _make_gap_fn(self):
        from . import diagnostics
        from .datafits import _BoundQuadratic
        from .penalties import L1, L1L2

        if isinstance(self.bound, _BoundQuadratic) and isinstance(self.penalty, (L1, L1L2)):
            dataset = Dataset.from_arrays(self.design, self.bound.y)
            return lambda beta: diagnostics.duality_gap(dataset, self.penalty, beta).gap
        return None

    # -- kernels -----------------------------------------------------------

    def _epoch(self, ws):
        passes = (False, True) if self.config.symmetric_sweep else (False,)
        code = self.bound.kernel_code
        pen = self.penalty
        pa, pb = pen.kernel_params
        for backward in passes:
            if self.multitask:
                if self.design.is_sparse:
                    data, indices, indptr = self.design.kernel_arrays()
                    upd = _kernels.epoch_sparse_mt(
                        data, indices, indptr, self.design.n_samples, self.bound.Y,
                        self.cache, self.beta, self.lips, ws, pen.kernel_code, pa, pb, backward,
                    )
                else:
                    upd = _kernels.epoch_dense_mt(
                        self.design.raw, self.bound.Y, self.cache, self.beta,
                        self.lips, ws, pen.kernel_code, pa, pb, backward,
                    )
            elif self.design.is_sparse:
                data, indices, indptr = self.design.kernel_arrays()
                upd = _kernels.epoch_sparse(
                    data, indices, indptr, self.design.n_samples, self.bound.kernel_aux,
                    self.cache, self.beta, self.lips, ws, code, pen.kernel_code, pa, pb, backward,
                )
            else:
                upd = _kernels.epoch_dense(
                    self.design.raw, self.bound.kernel_aux, self.cache, self.beta,
                    self.lips, ws, code, pen.kernel_code, pa, pb, backward,
                )
            self.coord_updates += int(upd)
        self.epoch_count += 1

    def _grads_ws(self, ws):
        if self.multitask:
            if self.design.is_sparse:
                data, indices, indptr = self.design.kernel_arrays()
                return _kernels.grads_ws_sparse_mt(
                    data, indices, indptr, self.design.n_samples, self.bound.Y, self.cache, ws
                )
            return _kernels.grads_ws_dense_mt(self.design.raw, self.bound.Y, self.cache, ws)
        if self.design.is_sparse:
            data, indices, indptr = self.design.kernel_arrays()
            return _kernels.grads_ws_sparse(
                data, indices, indptr, self.design.n_samples, self.bound.kernel_aux,
                self.cache, ws, self.bound.kernel_code,
            )
        return _kernels.grads_ws_dense(
            self.design.raw, self.bound.kernel_aux, self.cache, ws, self.bound.kernel_code
        )

    # -- scores and objective ----------------------------------------------

    def scores(self, beta_sub, grads, lips_sub):
        if self.score_kind == "subdiff":
            return np.asarray(self.penalty.subdiff_distance(beta_sub, -grads))
        fp = np.asarray(self.penalty.fixed_point_score(beta_sub, grads, lips_sub))
        return fp * lips_sub  # gradient units, comparable across features

    def objective(self) -> float:
        return float(self.bound.value(self.beta, self.cache)) + float(
            np.sum(self.penalty.value(self.beta))
        )

    def gsupp_mask(self) -> np.ndarray:
        return np.asarray(self.penalty.in_gsupp(self.beta), dtype=bool)

    def record(self, kind, violation, ws_size, accepted=False, gap=None, ws=None):
        mask = self.gsupp_mask()
        if self.gsupp_history is not None and kind == "inner":
            self.gsupp_history.append(mask.copy())
        rec = TraceRecord(
            time_s=time.monotonic() - self.t0,
            epoch=self.epoch_count,
            kind=kind,
            objective=self.objective(),
            kkt_violation=float(violation),
            duality_gap=gap,
            ws_size=int(ws_size),
            gsupp_size=int(mask.sum()),
            anderson_accepted=bool(accepted),
            coord_updates=self.coord_updates,
            ws_indices=None if ws is None else np.array(ws, copy=True),
        )
        self.records.append(rec)
        if self.on_record is not None:
            self.on_record(rec)

    # -- inner loop ----------------------------------------------------------

    def inner_solve(self, ws, eps_in):
        cfg = self.config
        M = cfg.anderson_memory
        buffer: list[np.ndarray] = [self.beta[ws].copy()]
        X_ws = None
        r_frozen = None
        for k in range(1, cfg.max_inner + 1):
            self._epoch(ws)
            accepted = False
            if cfg.use_acceleration:
                buffer.append(self.beta[ws].copy())
                if len(buffer) > M + 1:
                    buffer.pop(0)
                if k % M == 0 and len(buffer) == M + 1:
                    flat = [b.ravel() for b in buffer]
                    extr = anderson_extrapolate(flat)
                    if extr is not None:
                        extr = extr.reshape(buffer[-1].shape)
                        if X_ws is None:
                            X_ws = self.design.raw[:, ws]
                            r_frozen = self.cache - X_ws @ self.beta[ws]
                        cand_cache = X_ws @ extr + r_frozen
                        beta_cand = self.beta.copy()
                        beta_cand[ws] = extr
                        phi_cand = float(self.bound.value(beta_cand, cand_cache)) + float(
                            np.sum(self.penalty.value(beta_cand))
                        )
                        phi_curr = self.objective()
                        if phi_cand < phi_curr:
                            self.beta[ws] = extr
                            self.cache[...] = np.asarray(cand_cache)
                            buffer[-1] = extr.copy()
                            accepted = True
                            self.n_accept += 1
                            self.accept_events.append((phi_curr, phi_cand))
                        else:
                            self.n_reject += 1
            grads = self._grads_ws(ws)
            viol = float(np.max(self.scores(self.beta[ws], grads, self.lips[ws]))) if len(ws) else 0.0
            self.record("inner", viol, len(ws), accepted=accepted)
            if viol <= eps_in:
                break
            if cfg.max_total_epochs is not None and self.epoch_count >= cfg.max_total_epochs:
                break

    # -- outer loop ----------------------------------------------------------

    def run(self):
        cfg = self.config
        tol = cfg.tol
        nonzero = self.beta != 0
        if self.multitask:
            nonzero = nonzero.any(axis=1)
        ws = np.flatnonzero(nonzero & (self.lips > 0)).astype(np.int64)
        ws_size = cfg.initial_ws_size
        for _ in range(cfg.max_outer):
            grads = self.bound.full_gradient(self.cache)
            all_scores = self.scores(self.beta, grads, self.lips)
            violation = float(np.max(all_scores)) if all_scores.size else 0.0
            gap = self._gap_fn(self.beta) if self._gap_fn is not None else None
            gsupp_size = int(self.gsupp_mask().sum())
            if violation <= tol:
                self.record("outer", violation, len(ws), gap=gap, ws=ws)
                break
            if cfg.use_working_sets:
                scores_eligible = np.where(self.lips > 0, all_scores, -np.inf)
                ws, ws_size = build_working_set(scores_eligible, ws, gsupp_size, ws_size, self.p)
                ws = ws[self.lips[ws] > 0]
                eps_in = max(tol, 0.3 * violation)
            else:
                ws = np.flatnonzero(self.lips > 0).astype(np.int64)
                ws_size = len(ws)
                eps_in = tol
            self.record("outer", violation, len(ws), gap=gap, ws=ws)
            self.inner_solve(ws, eps_in)
            if cfg.max_total_epochs is not None and self.epoch_count >= cfg.max_total_epochs:
                break

    def finish(self) -> FitResult:
        # termination contract: the reported violation is recomputed from
        # scratch, never trusted from the loop
        cache = self.bound.init_cache(self.beta)
        grads = self.bound.full_gradient(cache)
        violation = float(np.max(self.scores(self.beta, grads, self.lips))) if self.p else 0.0
        stop = "tolerance_met" if violation <= self.config.tol else "budget_exhausted"
        return FitResult(
            beta=self.beta.copy(),
            stop_reason=stop,
            kkt_violation=violation,
            trace=ConvergenceTrace(self.records),
            n_epochs=self.epoch_count,
            total_coord_updates=self.coord_updates,
            n_extrapolations_accepted=self.n_accept,
            n_extrapolations_rejected=self.n_reject,
            gsupp_history=self.gsupp_history,
            extrapolation_events=self.accept_events,
        )


def fit(dataset, datafit, penalty, config=None, beta0=None, on_record=None) -> FitResult:
    """Solve F(X beta) + sum_j g_j(beta_j) to the configured tolerance.

    ``datafit`` is one of the descriptors from :mod:`sparsecd.datafits`,
    ``penalty`` one of :mod:`sparsecd.penalties`. ``beta0`` warm-starts the
    solve. Budget exhaustion returns the best iterate with
    stop_reason="budget_exhausted"; it is not an error.
    """
    config = config or SolverConfig()
    run = _Run(dataset, datafit, penalty, config, beta0, on_record)
    run.run()
    return run.finish()


def path_fit(
    dataset,
    datafit,
    penalty_factory,
    lambdas,
    config=None,
    beta_star=None,
    test_design=None,
) -> list[PathPoint]:
    """Warm-started sequence of fits along a decreasing regularization grid.

    ``penalty_factory(lmbda)`` builds the penalty for each grid point.
    When ``beta_star`` is known, each point carries the estimation error
    ||beta - beta*|| and, given ``test_design``, the noiseless prediction
    error ||X_test (beta - beta*)||.
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.ndim != 1 or len(lambdas) == 0:
        raise ValueError("lambdas must be a non-empty 1-d sequence")
    if np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambdas must be strictly decreasing")
    config = config or SolverConfig()
    points: list[PathPoint] = []
    beta0 = None
    for lam in lambdas:
        result = fit(dataset, datafit, penalty_factory(float(lam)), config, beta0=beta0)
        beta0 = result.beta
        est = pred = None
        if beta_star is not None:
            delta = result.beta - beta_star
            est = float(np.linalg.norm(delta))
            if test_design is not None:
                raw = test_design.raw if hasattr(test_design, "raw") else test_design
                pred = float(np.linalg.norm(raw @ delta))
        nnz = int(np.count_nonzero(np.linalg.norm(result.beta, axis=1) if result.beta.ndim == 2 else result.beta))
        points.append(PathPoint(float(lam), result, nnz, est, pred))
    return points
