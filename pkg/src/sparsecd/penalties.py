"""Separable penalty families: values, proximal operators and optimality scores.

Every method broadcasts over numpy arrays; scalars in give scalars out.
``prox(x, step)`` returns a global minimizer of u -> (u - x)^2 / 2 + step * g(u),
with ties broken toward smaller |u|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "L1",
    "L1L2",
    "MCP",
    "SCAD",
    "LHalf",
    "BoxIndicator",
    "Block",
    "SemiconvexityReport",
    "semiconvexity_check",
    "PenaltyKinkError",
]

# codes shared with the compiled kernels
PEN_L1, PEN_L1L2, PEN_MCP, PEN_SCAD, PEN_LHALF, PEN_BOX = range(6)


class PenaltyKinkError(ValueError):
    """A curvature query landed on a non-twice-differentiable point."""


def _check_step(step) -> np.ndarray:
    step = np.asarray(step, dtype=np.float64)
    if np.any(step <= 0):
        raise ValueError("prox step must be positive")
    return step


def _soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


class BasePenalty:
    preferred_score = "subdiff"
    is_even = True

    def fixed_point_score(self, beta, grad, lipschitz):
        """|beta - prox(beta - grad / L, 1 / L)|, 0 where L = 0."""
        beta = np.asarray(beta, dtype=np.float64)
        grad = np.asarray(grad, dtype=np.float64)
        lips = np.broadcast_to(np.asarray(lipschitz, dtype=np.float64), beta.shape)
        safe = np.where(lips > 0, lips, 1.0)
        step = 1.0 / safe
        res = np.abs(beta - self.prox(beta - grad * step, step))
        return np.where(lips > 0, res, 0.0)

    def prox_is_unique(self, step) -> bool:
        return True

    def alpha_semiconvex(self, lipschitz) -> float | None:
        """Analytic alpha with g/L + alpha |.|^2 / 2 convex, if known."""
        return None

    def grad_at(self, t):
        """g'(t) away from t = 0 (all families here are differentiable there)."""
        raise NotImplementedError


@dataclass(frozen=True)
class L1(BasePenalty):
    lmbda: float

    def __post_init__(self):
        if self.lmbda < 0:
            raise ValueError("lmbda must be >= 0")

    zero_ball_radius = property(lambda self: self.lmbda)
    kernel_code = PEN_L1
    kernel_params = property(lambda self: (float(self.lmbda), 0.0))

    def value(self, x):
        return self.lmbda * np.abs(x)

    def prox(self, x, step):
        step = _check_step(step)
        return _soft_threshold(x, self.lmbda * step)

    def subdiff_distance(self, beta, neg_grad):
        beta = np.asarray(beta, dtype=np.float64)
        neg_grad = np.asarray(neg_grad, dtype=np.float64)
        at_zero = np.maximum(np.abs(neg_grad) - self.lmbda, 0.0)
        away = np.abs(neg_grad - self.lmbda * np.sign(beta))
        return np.where(beta == 0, at_zero, away)

    def in_gsupp(self, beta):
        return np.asarray(beta) != 0

    def grad_at(self, t):
        return self.lmbda * np.sign(t)

    def smooth_curvature(self, beta):
        beta = np.asarray(beta, dtype=np.float64)
        if np.any(beta == 0):
            raise PenaltyKinkError("L1 is not differentiable at 0")
        return np.zeros_like(beta)

    def alpha_semiconvex(self, lipschitz):
        return 0.0


@dataclass(frozen=True)
class L1L2(BasePenalty):
    """Elastic net: g(x) = lmbda * (rho |x| + (1 - rho) x^2 / 2)."""

    lmbda: float
    rho: float

    def __post_init__(self):
        if self.lmbda < 0:
            raise ValueError("lmbda must be >= 0")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")

    zero_ball_radius = property(lambda self: self.lmbda * self.rho)
    kernel_code = PEN_L1L2
    kernel_params = property(lambda self: (float(self.lmbda), float(self.rho)))

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.lmbda * (self.rho * np.abs(x) + 0.5 * (1 - self.rho) * x**2)

    def prox(self, x, step):
        step = _check_step(step)
        return _soft_threshold(x, self.lmbda * self.rho * step) / (
            1.0 + step * self.lmbda * (1 - self.rho)
        )

    def _grad_smooth(self, beta):
        return self.lmbda * (1 - self.rho) * beta

    def subdiff_distance(self, beta, neg_grad):
        beta = np.asarray(beta, dtype=np.float64)
        neg_grad = np.asarray(neg_grad, dtype=np.float64)
        lr = self.lmbda * self.rho
        at_zero = np.maximum(np.abs(neg_grad) - lr, 0.0)
        away = np.abs(neg_grad - lr * np.sign(beta) - self._grad_smooth(beta))
        return np.where(beta == 0, at_zero, away)

    def in_gsupp(self, beta):
        return np.asarray(beta) != 0

    def grad_at(self, t):
        t = np.asarray(t, dtype=np.float64)
        return self.lmbda * self.rho * np.sign(t) + self._grad_smooth(t)

    def smooth_curvature(self, beta):
        beta = np.asarray(beta, dtype=np.float64)
        if np.any(beta == 0) and self.rho > 0:
            raise PenaltyKinkError("L1L2 is not differentiable at 0")
        return np.full_like(beta, self.lmbda * (1 - self.rho))

    def alpha_semiconvex(self, lipschitz):
        return 0.0


@dataclass(frozen=True)
class MCP(BasePenalty):
    """Minimax concave penalty: L1-like near 0, constant gamma*lmbda^2/2 beyond gamma*lmbda."""

    lmbda: float
    gamma: float

    def __post_init__(self):
        if self.lmbda < 0:
            raise ValueError("lmbda must be >= 0")
        if self.gamma <= 1:
            raise ValueError("gamma must be > 1")

    zero_ball_radius = property(lambda self: self.lmbda)
    kernel_code = PEN_MCP
    kernel_params = property(lambda self: (float(self.lmbda), float(self.gamma)))

    def value(self, x):
        x = np.abs(np.asarray(x, dtype=np.float64))
        inner = self.lmbda * x - x**2 / (2 * self.gamma)
        return np.where(x <= self.gamma * self.lmbda, inner, 0.5 * self.gamma * self.lmbda**2)

    def prox(self, x, step):
        step = _check_step(step)
        x = np.asarray(x, dtype=np.float64)
        a, sign = np.abs(x), np.sign(x)
        gl = self.gamma * self.lmbda
        t = step * self.lmbda
        shrunk = np.where(
            a <= t,
            0.0,
            np.where(a <= gl, (a - t) / np.where(step < self.gamma, 1.0 - step / self.gamma, 1.0), a),
        )
        # step >= gamma: the middle piece of the prox objective is concave, so the
        # minimizer is one of the endpoint candidates; ties go to the smaller one.
        h0 = 0.5 * a**2
        h_edge = 0.5 * (gl - a) ** 2 + step * 0.5 * self.gamma * self.lmbda**2
        h_flat = np.where(a > gl, step * 0.5 * self.gamma * self.lmbda**2, np.inf)
        cands = np.stack([np.zeros_like(a), np.full_like(a, gl), a])
        objs = np.stack([h0, h_edge, h_flat])
        picked = np.take_along_axis(cands, np.argmin(objs, axis=0)[None], axis=0)[0]
        out = np.where(step < self.gamma, shrunk, picked)
        return sign * out

    def subdiff_distance(self, beta, neg_grad):
        beta = np.asarray(beta, dtype=np.float64)
        neg_grad = np.asarray(neg_grad, dtype=np.float64)
        at_zero = np.maximum(np.abs(neg_grad) - self.lmbda, 0.0)
        grad_pen = np.where(
            np.abs(beta) <= self.gamma * self.lmbda,
            self.lmbda * np.sign(beta) - beta / self.gamma,
            0.0,
        )
        return np.where(beta == 0, at_zero, np.abs(neg_grad - grad_pen))

    def in_gsupp(self, beta):
        return np.asarray(beta) != 0

    def grad_at(self, t):
        t = np.asarray(t, dtype=np.float64)
        inside = np.abs(t) <= self.gamma * self.lmbda
        return np.where(inside, self.lmbda * np.sign(t) - t / self.gamma, 0.0)

    def smooth_curvature(self, beta):
        beta = np.asarray(beta, dtype=np.float64)
        a = np.abs(beta)
        gl = self.gamma * self.lmbda
        if np.any(a == 0):
            raise PenaltyKinkError("MCP is not differentiable at 0")
        if np.any(np.abs(a - gl) <= 1e-10 * max(gl, 1.0)):
            raise PenaltyKinkError("MCP is not twice differentiable at gamma * lmbda")
        return np.where(a < gl, -1.0 / self.gamma, 0.0)

    def prox_is_unique(self, step) -> bool:
        return bool(np.all(np.asarray(step) < self.gamma))

    def alpha_semiconvex(self, lipschitz):
        return 0.5 * (1.0 + 1.0 / (self.gamma * lipschitz))


@dataclass(frozen=True)
class SCAD(BasePenalty):
    lmbda: float
    gamma: float

    def __post_init__(self):
        if self.lmbda < 0:
            raise ValueError("lmbda must be >= 0")
        if self.gamma <= 2:
            raise ValueError("gamma must be > 2")

    zero_ball_radius = property(lambda self: self.lmbda)
    kernel_code = PEN_SCAD
    kernel_params = property(lambda self: (float(self.lmbda), float(self.gamma)))

    def value(self, x):
        a = np.abs(np.asarray(x, dtype=np.float64))
        lam, g = self.lmbda, self.gamma
        mid = (2 * g * lam * a - a**2 - lam**2) / (2 * (g - 1))
        return np.where(a <= lam, lam * a, np.where(a <= g * lam, mid, 0.5 * lam**2 * (g + 1)))

    def prox(self, x, step):
        # exact argmin by comparing the stationary point of each quadratic piece,
        # clipped to its piece, plus the piece endpoints; ties -> smaller |u|
        step = _check_step(step)
        x = np.asarray(x, dtype=np.float64)
        a, sign = np.abs(x), np.sign(x)
        lam, g = self.lmbda, self.gamma
        a_b, step_b = np.broadcast_arrays(a, step)
        c1 = np.clip(_soft_threshold(a_b, lam * step_b), 0.0, lam)
        denom = g - 1.0 - step_b
        with np.errstate(divide="ignore", invalid="ignore"):
            c2_raw = ((g - 1.0) * a_b - step_b * g * lam) / denom
        c2 = np.where(denom > 0, np.clip(c2_raw, lam, g * lam), lam)
        cands = np.stack(
            [
                np.zeros_like(a_b),
                c1,
                np.full_like(a_b, lam),
                c2,
                np.full_like(a_b, g * lam),
                np.maximum(a_b, g * lam),
            ]
        )
        objs = 0.5 * (cands - a_b) ** 2 + step_b * self.value(cands)
        picked = np.take_along_axis(cands, np.argmin(objs, axis=0)[None], axis=0)[0]
        return sign * picked

    def _grad_smooth_abs(self, a):
        lam, g = self.lmbda, self.gamma
        return np.where(a <= lam, lam, np.where(a <= g * lam, (g * lam - a) / (g - 1), 0.0))

    def subdiff_distance(self, beta, neg_grad):
        beta = np.asarray(beta, dtype=np.float64)
        neg_grad = np.asarray(neg_grad, dtype=np.float64)
        at_zero = np.maximum(np.abs(neg_grad) - self.lmbda, 0.0)
        grad_pen = np.sign(beta) * self._grad_smooth_abs(np.abs(beta))
        return np.where(beta == 0, at_zero, np.abs(neg_grad - grad_pen))

    def in_gsupp(self, beta):
        return np.asarray(beta) != 0

    def grad_at(self, t):
        t = np.asarray(t, dtype=np.float64)
        return np.sign(t) * self._grad_smooth_abs(np.abs(t))

    def smooth_curvature(self, beta):
        beta = np.asarray(beta, dtype=np.float64)
        a = np.abs(beta)
        lam, g = self.lmbda, self.gamma
        tol = 1e-10 * max(g * lam, 1.0)
        if np.any(a == 0):
            raise PenaltyKinkError("SCAD is not differentiable at 0")
        if np.any(np.abs(a - lam) <= tol) or np.any(np.abs(a - g * lam) <= tol):
            raise PenaltyKinkError("SCAD is not twice differentiable at its breakpoints")
        return np.where(a < lam, 0.0, np.where(a < g * lam, -1.0 / (g - 1), 0.0))

    def prox_is_unique(self, step) -> bool:
        return bool(np.all(np.asarray(step) < self.gamma - 1.0))


@dataclass(frozen=True)
class LHalf(BasePenalty):
    """l_0.5 penalty g(x) = lmbda * sqrt(|x|)."""

    lmbda: float
    preferred_score = "fixed_point"

    def __post_init__(self):
        if self.lmbda < 0:
            raise ValueError("lmbda must be >= 0")

    zero_ball_radius = property(lambda self: np.inf)
    kernel_code = PEN_LHALF
    kernel_params = property(lambda self: (float(self.lmbda), 0.0))

    def value(self, x):
        return self.lmbda * np.sqrt(np.abs(np.asarray(x, dtype=np.float64)))

    def zero_set_radius(self, step):
        """prox(x, step) = 0 exactly on [-r, r] with r = (3/2)(step*lmbda)^(2/3)."""
        return 1.5 * (np.asarray(step, dtype=np.float64) * self.lmbda) ** (2.0 / 3.0)

    def prox(self, x, step):
        step = _check_step(step)
        x = np.asarray(x, dtype=np.float64)
        a, sign = np.abs(x), np.sign(x)
        eff = step * self.lmbda
        radius = self.zero_set_radius(step)
        nz = a > radius
        safe = np.where(nz, a, 1.0)
        # largest root of t^3 - a t + eff/2 = 0 (t = sqrt(u)), trigonometric form
        arg = np.clip(-(3.0 * np.sqrt(3.0) / 4.0) * eff / safe**1.5, -1.0, 1.0)
        t = 2.0 * np.sqrt(safe / 3.0) * np.cos(np.arccos(arg) / 3.0)
        return np.where(nz, sign * t**2, 0.0)

    def subdiff_distance(self, beta, neg_grad):
        # Frechet subdifferential at 0 is all of R, so the distance there is 0
        # and carries no information; use fixed_point_score for ranking.
        beta = np.asarray(beta, dtype=np.float64)
        neg_grad = np.asarray(neg_grad, dtype=np.float64)
        out = np.zeros(np.broadcast_shapes(beta.shape, neg_grad.shape))
        nz = beta != 0
        grad_pen = np.where(nz, self.lmbda * np.sign(beta) / (2 * np.sqrt(np.abs(np.where(nz, beta, 1.0)))), 0.0)
        return np.where(nz, np.abs(neg_grad - grad_pen), out)

    def in_gsupp(self, beta):
        return np.asarray(beta) != 0

    def grad_at(self, t):
        t = np.asarray(t, dtype=np.float64)
        return self.lmbda * np.sign(t) / (2.0 * np.sqrt(np.abs(t)))

    def smooth_curvature(self, beta):
        beta = np.asarray(beta, dtype=np.float64)
        if np.any(beta == 0):
            raise PenaltyKinkError("l0.5 is not differentiable at 0")
        return -self.lmbda / (4.0 * np.abs(beta) ** 1.5)

    def prox_is_unique(self, step) -> bool:
        return False


@dataclass(frozen=True)
class BoxIndicator(BasePenalty):
    """Indicator of [0, C]; the generalized support is the open interior."""

    C: float
    is_even = False

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError("C must be > 0")

    kernel_code = PEN_BOX
    kernel_params = property(lambda self: (float(self.C), 0.0))

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        return np.where((x >= 0) & (x <= self.C), 0.0, np.inf)

    def prox(self, x, step):
        _check_step(step)
        return np.clip(x, 0.0, self.C)

    def subdiff_distance(self, beta, neg_grad):
        beta = np.asarray(beta, dtype=np.float64)
        neg_grad = np.asarray(neg_grad, dtype=np.float64)
        inside = np.abs(neg_grad)
        at_lo = np.maximum(neg_grad, 0.0)   # subdifferential (-inf, 0]
        at_hi = np.maximum(-neg_grad, 0.0)  # subdifferential [0, +inf)
        out = np.where(beta == 0, at_lo, np.where(beta == self.C, at_hi, inside))
        return np.where((beta < 0) | (beta > self.C), np.inf, out)

    def in_gsupp(self, beta):
        beta = np.asarray(beta)
        return (beta > 0) & (beta < self.C)

    def smooth_curvature(self, beta):
        beta = np.asarray(beta, dtype=np.float64)
        if np.any((beta <= 0) | (beta >= self.C)):
            raise PenaltyKinkError("box indicator is only smooth on the open interior")
        return np.zeros_like(beta)

    def alpha_semiconvex(self, lipschitz):
        return 0.0


@dataclass(frozen=True)
class Block(BasePenalty):
    """Row-wise penalty g(W) = sum_j inner(||W_j:||) for an even 1-d inner penalty.

    The prox reduces radially: prox(x) = prox_inner(||x||) * x / ||x||.
    """

    inner: BasePenalty

    def __post_init__(self):
        if not self.inner.is_even:
            raise ValueError("block penalties need an even 1-d inner penalty")

    @property
    def preferred_score(self):
        return self.inner.preferred_score

    kernel_code = property(lambda self: self.inner.kernel_code)
    kernel_params = property(lambda self: self.inner.kernel_params)

    @staticmethod
    def _as_rows(W):
        W = np.asarray(W, dtype=np.float64)
        if W.ndim == 1:
            return W[None, :], True
        return W, False

    def value(self, W):
        W, single = self._as_rows(W)
        vals = self.inner.value(np.linalg.norm(W, axis=1))
        return vals[0] if single else vals

    def prox(self, W, step):
        W, single = self._as_rows(W)
        norms = np.linalg.norm(W, axis=1)
        shrunk = np.asarray(self.inner.prox(norms, step))
        safe = np.where(norms > 0, norms, 1.0)
        out = W * np.where(norms > 0, shrunk / safe, 0.0)[:, None]
        return out[0] if single else out

    def subdiff_distance(self, W, neg_grad):
        W, single = self._as_rows(W)
        G, _ = self._as_rows(neg_grad)
        norms = np.linalg.norm(W, axis=1)
        gnorm = np.linalg.norm(G, axis=1)
        radius = self.inner.zero_ball_radius
        at_zero = np.maximum(gnorm - radius, 0.0) if np.isfinite(radius) else np.zeros_like(gnorm)
        safe = np.where(norms > 0, norms, 1.0)
        grad_pen = np.asarray(self.inner.grad_at(safe))[:, None] * (W / safe[:, None])
        away = np.linalg.norm(G - grad_pen, axis=1)
        out = np.where(norms == 0, at_zero, away)
        return out[0] if single else out

    def fixed_point_score(self, W, grad, lipschitz):
        W, single = self._as_rows(W)
        G, _ = self._as_rows(grad)
        lips = np.broadcast_to(np.asarray(lipschitz, dtype=np.float64), W.shape[:1])
        safe = np.where(lips > 0, lips, 1.0)
        step = 1.0 / safe
        res = np.linalg.norm(W - self.prox(W - G * step[:, None], step), axis=1)
        res = np.where(lips > 0, res, 0.0)
        return res[0] if single else res

    def in_gsupp(self, W):
        W, single = self._as_rows(W)
        out = np.linalg.norm(W, axis=1) != 0
        return out[0] if single else out


@dataclass(frozen=True)
class SemiconvexityReport:
    alpha_estimate: float
    holds: bool


def semiconvexity_check(penalty, lipschitz: float, grid: np.ndarray) -> SemiconvexityReport:
    """Check whether g/L + alpha |.|^2 / 2 is convex with alpha < 1.

    Uses the analytic alpha when the penalty provides one, otherwise
    estimates the needed alpha from second differences of g/L on ``grid``.
    Convexity is verified as raw second differences >= -1e-10.
    """
    if isinstance(penalty, LHalf) or (isinstance(penalty, Block) and isinstance(penalty.inner, LHalf)):
        return SemiconvexityReport(alpha_estimate=np.inf, holds=False)
    grid = np.sort(np.asarray(grid, dtype=np.float64))
    h = grid[1] - grid[0]
    scaled = np.asarray(penalty.value(grid), dtype=np.float64) / lipschitz
    alpha = penalty.alpha_semiconvex(lipschitz)
    if alpha is None:
        d2 = scaled[2:] - 2 * scaled[1:-1] + scaled[:-2]
        alpha = max(0.0, float(np.max(-d2)) / h**2)
    if not np.isfinite(alpha):
        return SemiconvexityReport(alpha_estimate=float(alpha), holds=False)
    hvals = scaled + 0.5 * alpha * grid**2
    d2h = hvals[2:] - 2 * hvals[1:-1] + hvals[:-2]
    holds = bool(alpha < 1.0 and np.all(d2h >= -1e-10))
    return SemiconvexityReport(alpha_estimate=float(alpha), holds=holds)
