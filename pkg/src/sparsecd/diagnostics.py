"""Certificates and local-theory checkers for fitted models.

Duality gaps certify suboptimality for the convex quadratic problems;
the CD fixed-point Jacobian gives the local linear rate and feeds the
Anderson acceleration bound; identification_epoch locates the epoch after
which the generalized support froze.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import Dataset, column_squared_norms
from .penalties import L1, L1L2, PenaltyKinkError

__all__ = [
    "GapCertificate",
    "UnsupportedPenaltyError",
    "DiagnosticError",
    "duality_gap",
    "identification_epoch",
    "cd_jacobian_spectral_radius",
    "SpectralRadiusReport",
    "anderson_rate_bound",
    "measured_cd_contraction",
]


class UnsupportedPenaltyError(ValueError):
    """No certificate exists for this penalty (non-convex problems)."""


class DiagnosticError(RuntimeError):
    """A diagnostic's precondition is not met at the supplied point."""


@dataclass(frozen=True)
class GapCertificate:
    primal: float
    dual: float
    gap: float
    normalized_gap: float


def _primal_dual(dataset: Dataset, penalty, beta):
    X, y = dataset.X, dataset.y.values
    n = X.n_samples
    r = y - np.asarray(X.matvec(beta))
    primal = 0.5 * float(r @ r) / n + float(np.sum(penalty.value(beta)))
    theta = r / n
    if isinstance(penalty, L1L2) and penalty.rho < 1.0:
        # smooth conjugate of the elastic-net penalty; no hard feasibility set
        u = np.abs(np.asarray(X.rmatvec(theta)))
        lam, rho = penalty.lmbda, penalty.rho
        excess = np.maximum(u - lam * rho, 0.0)
        conj = float(np.sum(excess**2)) / (2.0 * lam * (1.0 - rho)) if lam > 0 else 0.0
        dual = float(y @ theta) - 0.5 * n * float(theta @ theta) - conj
    else:
        lam = penalty.lmbda * (penalty.rho if isinstance(penalty, L1L2) else 1.0)
        # rescale the residual point into the dual feasible set
        scale = max(1.0, float(np.max(np.abs(X.rmatvec(theta)))) / lam) if lam > 0 else 1.0
        theta = theta / scale
        dual = float(y @ theta) - 0.5 * n * float(theta @ theta)
    return primal, dual


def duality_gap(dataset: Dataset, penalty, beta) -> GapCertificate:
    """Duality-gap certificate for the quadratic datafit with L1 / L1L2.

    The dual point is the rescaled residual, so weak duality holds by
    construction: gap >= objective suboptimality at ``beta``. The
    normalized gap divides by the gap at beta = 0 so traces start at 1.
    """
    if not isinstance(penalty, (L1, L1L2)):
        raise UnsupportedPenaltyError(
            f"no duality certificate for {type(penalty).__name__}; "
            "use the fixed-point violation for non-convex penalties"
        )
    if dataset.y.is_multitask:
        raise UnsupportedPenaltyError("duality_gap supports single-task targets only")
    beta = np.asarray(beta, dtype=np.float64)
    primal, dual = _primal_dual(dataset, penalty, beta)
    gap = primal - dual
    p0, d0 = _primal_dual(dataset, penalty, np.zeros_like(beta))
    gap0 = p0 - d0
    normalized = gap / gap0 if gap0 > 0 else (0.0 if gap <= 0 else np.inf)
    return GapCertificate(primal=primal, dual=dual, gap=gap, normalized_gap=normalized)


def identification_epoch(gsupp_history, trace=None):
    """First epoch from which the generalized support equals its final value.

    Returns None when the support was still changing at the last recorded
    epoch (stability never demonstrated inside the trace) or when the
    history is empty.
    """
    history = list(gsupp_history)
    if not history:
        return None
    final = np.asarray(history[-1])
    k = len(history) - 1
    while k > 0 and np.array_equal(np.asarray(history[k - 1]), final):
        k -= 1
    if k == len(history) - 1 and len(history) >= 2:
        return None
    return k


@dataclass(frozen=True)
class SpectralRadiusReport:
    rho: float
    T: np.ndarray
    support: np.ndarray
    M: np.ndarray


def cd_jacobian_spectral_radius(
    dataset: Dataset, datafit, penalty, beta_hat, sweep: str = "forward"
) -> SpectralRadiusReport:
    """Spectral radius of the CD fixed-point Jacobian at a critical point.

    Builds M = Hessian of f + diag(g'') restricted to the generalized
    support, the rank-one per-coordinate factors, and composes them in
    sweep order. Requires ``beta_hat`` to be nearly critical (violation
    below 1e-8), the penalty twice differentiable on the support, and M
    positive definite; raises DiagnosticError otherwise. The returned rho
    is asserted to be < 1.
    """
    if sweep not in ("forward", "symmetric"):
        raise ValueError("sweep must be 'forward' or 'symmetric'")
    bound = datafit.bind(dataset)
    if bound.multitask:
        raise DiagnosticError("Jacobian diagnostic supports single-task problems only")
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    cache = bound.init_cache(beta_hat)
    grads = bound.full_gradient(cache)
    viol = float(np.max(penalty.subdiff_distance(beta_hat, -grads)))
    if viol > 1e-8:
        raise DiagnosticError(f"point is not critical enough (violation {viol:.2e} > 1e-8)")
    support = np.flatnonzero(np.asarray(penalty.in_gsupp(beta_hat)))
    if support.size == 0:
        raise DiagnosticError("empty generalized support")
    try:
        curv = np.asarray(penalty.smooth_curvature(beta_hat[support]), dtype=np.float64)
    except PenaltyKinkError as exc:
        raise DiagnosticError(str(exc)) from exc
    Xs = dataset.X.toarray()[:, support]
    n = dataset.X.n_samples
    M = Xs.T @ Xs / n + np.diag(curv)
    eigvals, eigvecs = np.linalg.eigh(M)
    if eigvals.min() <= 0:
        raise DiagnosticError("restricted Hessian M is not positive definite")
    M_half = eigvecs @ np.diag(np.sqrt(eigvals)) @ eigvecs.T
    M_inv_half = eigvecs @ np.diag(1.0 / np.sqrt(eigvals)) @ eigvecs.T
    gamma = 1.0 / np.asarray(bound.lipschitz)[support]
    s_dim = support.size
    factors = []
    for s in range(s_dim):
        coeff = gamma[s] / (1.0 + gamma[s] * curv[s])
        col = M_half[:, s]
        factors.append(np.eye(s_dim) - coeff * np.outer(col, col))
    A = np.eye(s_dim)
    for s in range(s_dim):  # rightmost factor acts first: ascending coordinate order
        A = factors[s] @ A
    if sweep == "symmetric":
        back = np.eye(s_dim)
        for s in reversed(range(s_dim)):
            back = factors[s] @ back
        A = back @ A
    T = M_inv_half @ A @ M_half
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    if rho >= 1.0:
        raise DiagnosticError(f"spectral radius {rho:.6f} >= 1")
    return SpectralRadiusReport(rho=rho, T=T, support=support, M=M)


def anderson_rate_bound(H: np.ndarray, rho_T: float, M: int) -> float:
    """Per-iteration factor of the local accelerated linear rate.

    With zeta = (1 - sqrt(1 - rho)) / (1 + sqrt(1 - rho)), the factor is
    (sqrt(kappa(H)) * 2 zeta^(M-1) / (1 + zeta^(2(M-1))))^(1/M).
    """
    if not 0.0 <= rho_T < 1.0:
        raise ValueError("rho_T must lie in [0, 1)")
    if M < 1:
        raise ValueError("M must be >= 1")
    H = np.asarray(H, dtype=np.float64)
    eigvals = np.linalg.eigvalsh(H)
    if eigvals.min() <= 0:
        raise ValueError("H must be positive definite")
    kappa = eigvals.max() / eigvals.min()
    root = np.sqrt(1.0 - rho_T)
    zeta = (1.0 - root) / (1.0 + root)
    inner = np.sqrt(kappa) * 2.0 * zeta ** (M - 1) / (1.0 + zeta ** (2 * (M - 1)))
    return float(inner ** (1.0 / M))


def measured_cd_contraction(
    dataset: Dataset,
    datafit,
    penalty,
    beta_hat,
    sweep: str = "forward",
    n_sweeps: int = 300,
    perturbation: float = 1e-6,
    seed: int = 0,
) -> float:
    """Empirical per-sweep error contraction of CD restricted to the support.

    Power iteration on the local error dynamics: perturb beta_hat on its
    generalized support, run one support-restricted epoch, record the error
    ratio, renormalize the error back to the perturbation size, repeat.
    The geometric mean of the last half of the ratios estimates the
    dominant contraction factor. Instant convergence reports 0.
    """
    bound = datafit.bind(dataset)
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    support = np.flatnonzero(np.asarray(penalty.in_gsupp(beta_hat))).astype(np.int64)
    if support.size == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    eps = perturbation * max(1.0, float(np.linalg.norm(beta_hat)))
    direction = rng.standard_normal(support.size)
    direction /= np.linalg.norm(direction)
    beta = beta_hat.copy()
    beta[support] += eps * direction
    lips = np.asarray(bound.lipschitz)
    pa, pb = penalty.kernel_params
    design = bound.design
    log_ratios = []
    for _ in range(n_sweeps):
        cache = bound.init_cache(beta)
        for backward in (False, True) if sweep == "symmetric" else (False,):
            if design.is_sparse:
                data, indices, indptr = design.kernel_arrays()
                _kernels.epoch_sparse(
                    data, indices, indptr, design.n_samples, bound.kernel_aux, cache,
                    beta, lips, support, bound.kernel_code, penalty.kernel_code, pa, pb, backward,
                )
            else:
                _kernels.epoch_dense(
                    design.raw, bound.kernel_aux, cache, beta, lips, support,
                    bound.kernel_code, penalty.kernel_code, pa, pb, backward,
                )
        err_vec = beta[support] - beta_hat[support]
        err = float(np.linalg.norm(err_vec))
        if err == 0.0 or err <= 1e-3 * eps * 1e-9:
            return 0.0
        log_ratios.append(np.log(err / eps))
        beta[support] = beta_hat[support] + (eps / err) * err_vec
    tail = log_ratios[len(log_ratios) // 2 :]
    if not tail:
        return 0.0
    return float(np.exp(np.mean(tail)))
