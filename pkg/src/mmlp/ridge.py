"""Portfolio-side step: (nonnegative) ridge of forest predictions on returns."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jit import USE_NUMBA, njit

LAMBDA_MIN = 1e-8
LAMBDA_MAX = 1e12


class RidgeError(ValueError):
    pass


class ConvergenceError(RidgeError):
    def __init__(self, message, kkt_residual):
        super().__init__(f"{message} (KKT residual {kkt_residual:.3e})")
        self.kkt_residual = kkt_residual


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class RidgeConfig:
    nonneg: bool = True
    target_r2: float = 0.05
    intercept: bool = True
    max_iter: int = 100_000
    tol: float = 1e-12

    def __post_init__(self):
        if not 0 < self.target_r2 < 1:
            raise ValueError("target_r2 must lie in (0, 1)")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class WeightVector:
    w: np.ndarray
    scale_applied: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        if not np.isfinite(self.w).all():
            raise RidgeError("weights must be finite")


@dataclass(frozen=True)
class RidgeFit:
    weights: WeightVector
    intercept: float
    lam: float
    r2: float
    objective: float
    kkt_residual: float
    n_iter: int
    unattainable: bool = False

    @property
    def w(self) -> np.ndarray:
        return self.weights.w


@njit
def _cd_nonneg(G, b, lam, w, max_iter, tol):
    """Cyclic coordinate descent for min w'Gw - 2b'w + lam|w|^2, w >= 0."""
    n = b.shape[0]
    Gw = G @ w
    for it in range(max_iter):
        max_step = 0.0
        max_w = 0.0
        for j in range(n):
            denom = G[j, j] + lam
            if denom <= 0.0:
                continue
            old = w[j]
            new = (b[j] - (Gw[j] - G[j, j] * old)) / denom
            if new < 0.0:
                new = 0.0
            d = new - old
            if d != 0.0:
                w[j] = new
                for k in range(n):
                    Gw[k] += G[k, j] * d
                if abs(d) > max_step:
                    max_step = abs(d)
            if new > max_w:
                max_w = new
        if max_step <= tol * max(max_w, 1e-300):
            return w, it + 1
    return w, max_iter


def _cd_nonneg_numpy(G, b, lam, w, max_iter, tol):
    Gw = G @ w
    diag = np.diag(G) + lam
    for it in range(max_iter):
        max_step = 0.0
        for j in range(b.shape[0]):
            if diag[j] <= 0.0:
                continue
            old = w[j]
            new = max((b[j] - (Gw[j] - G[j, j] * old)) / diag[j], 0.0)
            d = new - old
            if d != 0.0:
                w[j] = new
                Gw += G[:, j] * d
                max_step = max(max_step, abs(d))
        if max_step <= tol * max(float(w.max(initial=0.0)), 1e-300):
            return w, it + 1
    return w, max_iter


if not USE_NUMBA:
    _cd_nonneg = _cd_nonneg_numpy  # noqa: F811


class _Gram:
    """Weighted, optionally centred sufficient statistics of a ridge problem."""

    def __init__(self, R, y, obs_weights, intercept):
        R = np.asarray(R, dtype=float)
        y = np.asarray(y, dtype=float)
        if R.ndim == 1:
            R = R[:, None]
        if R.shape[0] != y.shape[0]:
            raise RidgeError("R and target must have the same number of rows")
        k = np.ones(y.shape[0]) if obs_weights is None else np.asarray(obs_weights, dtype=float)
        if k.shape != y.shape or np.any(k <= 0) or not np.isfinite(k).all():
            raise RidgeError("observation weights must be positive and finite")
        sk = k.sum()
        self.R, self.y, self.k, self.intercept = R, y, k, intercept
        self.ymean_w = float(k @ y / sk)
        if intercept:
            self.rbar = k @ R / sk
            self.ybar = self.ymean_w
        else:
            self.rbar = np.zeros(R.shape[1])
            self.ybar = 0.0
        Rc = R - self.rbar
        yc = y - self.ybar
        Rk = Rc * k[:, None]
        self.G = np.ascontiguousarray(Rk.T @ Rc)
        self.b = Rk.T @ yc
        self.sst = float(k @ (y - self.ymean_w) ** 2)
        self._eig = None

    def eig(self):
        if self._eig is None:
            d, V = np.linalg.eigh(self.G)
            self._eig = (np.maximum(d, 0.0), V, V.T @ self.b)
        return self._eig

    def intercept_of(self, w):
        return self.ybar - float(self.rbar @ w) if self.intercept else 0.0

    def residual(self, w):
        return self.y - self.intercept_of(w) - self.R @ w

    def ssr(self, w):
        e = self.residual(w)
        return float(self.k @ (e * e))

    def r2(self, w):
        if self.sst <= 0:
            raise RidgeError("target has zero variance")
        return 1.0 - self.ssr(w) / self.sst

    def objective(self, w, lam):
        return self.ssr(w) + lam * float(w @ w)


def _solve_unconstrained(g: _Gram, lam):
    if lam > 0:
        d, V, Vb = g.eig()
        return V @ (Vb / (d + lam))
    A = g.G
    if np.linalg.matrix_rank(A) < A.shape[0]:
        raise RidgeError("singular system at lambda=0 (collinear returns); use lambda > 0")
    return np.linalg.solve(A, g.b)


def _kkt_residual(g: _Gram, w, lam, nonneg):
    grad = 2.0 * (g.G @ w + lam * w - g.b)
    scale = max(float(np.max(np.abs(2.0 * g.b))), 1e-300)
    if not nonneg:
        return float(np.max(np.abs(grad))) / scale
    pos = w > 0
    viol = np.concatenate([np.abs(grad[pos]), np.maximum(-grad[~pos], 0.0)])
    return float(viol.max()) / scale if viol.size else 0.0


def _polish(g: _Gram, w, lam):
    """Exact solve on the active set found by coordinate descent."""
    active = w > 0
    if not active.any():
        return w
    A = g.G[np.ix_(active, active)] + lam * np.eye(int(active.sum()))
    try:
        sub = np.linalg.solve(A, g.b[active])
    except np.linalg.LinAlgError:
        return w
    if np.any(sub <= 0):
        return w
    out = np.zeros_like(w)
    out[active] = sub
    return out


def _solve_nonneg(g: _Gram, lam, config: RidgeConfig, w0=None):
    n = g.b.shape[0]
    w = np.zeros(n) if w0 is None else np.maximum(np.asarray(w0, dtype=float), 0.0).copy()
    w, n_iter = _cd_nonneg(g.G, g.b, float(lam), w, int(config.max_iter), float(config.tol))
    cand = _polish(g, w, lam)
    if _kkt_residual(g, cand, lam, True) <= _kkt_residual(g, w, lam, True):
        w = cand
    return w, n_iter


def _fit(g: _Gram, lam, config: RidgeConfig, w0=None, kkt_tol=1e-6, unattainable=False):
    if lam < 0:
        raise RidgeError("lambda must be >= 0")
    if config.nonneg:
        if lam == 0 and np.linalg.matrix_rank(g.G) < g.G.shape[0]:
            raise RidgeError("singular system at lambda=0 (collinear returns); use lambda > 0")
        w, n_iter = _solve_nonneg(g, lam, config, w0)
    else:
        w, n_iter = _solve_unconstrained(g, lam), 0
    kkt = _kkt_residual(g, w, lam, config.nonneg)
    if config.nonneg and kkt > kkt_tol and n_iter >= config.max_iter:
        raise ConvergenceError("coordinate descent did not converge", kkt)
    return RidgeFit(WeightVector(w), g.intercept_of(w), float(lam),
                    g.r2(w) if g.sst > 0 else float("nan"),
                    g.objective(w, lam), kkt, n_iter, unattainable)


def solve_ridge(R, target, lam: float, config: RidgeConfig = RidgeConfig(),
                obs_weights=None, w0=None) -> RidgeFit:
    """Minimise ``sum_t k_t (y_t - a - w'r_t)^2 + lam |w|^2``, optionally with w >= 0.

    The intercept ``a`` is unpenalised and only present when
    ``config.intercept`` is set.
    """
    g = _Gram(R, target, obs_weights, config.intercept)
    return _fit(g, lam, config, w0)


def calibrate_lambda(R, target, config: RidgeConfig = RidgeConfig(), obs_weights=None,
                     r2_tol: float = 1e-4, max_steps: int = 200) -> RidgeFit:
    """Pick lambda so the in-sample R^2 of the ridge fit equals ``config.target_r2``.

    R^2 is non-increasing in lambda, so bisection on log10(lambda) over
    [1e-8, 1e12] converges. If even the smallest lambda cannot reach the
    target, the boundary fit is returned with ``unattainable=True``.
    """
    g = _Gram(R, target, obs_weights, config.intercept)
    if g.sst <= 0:
        raise RidgeError("target has zero variance")
    goal = config.target_r2

    lo_fit = _fit(g, LAMBDA_MIN, config)
    if lo_fit.r2 < goal:
        return _fit(g, LAMBDA_MIN, config, unattainable=True)
    hi_fit = _fit(g, LAMBDA_MAX, config)
    if hi_fit.r2 >= goal:
        return hi_fit

    lo, hi = np.log10(LAMBDA_MIN), np.log10(LAMBDA_MAX)
    best = lo_fit
    w_warm = lo_fit.w
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        fit = _fit(g, 10.0 ** mid, config, w0=w_warm)
        if abs(fit.r2 - goal) < abs(best.r2 - goal):
            best = fit
        if abs(fit.r2 - goal) <= r2_tol:
            return fit
        if fit.r2 > goal:
            lo = mid
            w_warm = fit.w
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return best


def r2_of(R, target, w, intercept=True, obs_weights=None) -> float:
    return _Gram(R, target, obs_weights, intercept).r2(np.asarray(w, dtype=float))


def portfolio_std(w, R) -> float:
    z = np.asarray(R, dtype=float) @ np.asarray(w, dtype=float)
    return float(np.std(z, ddof=1))


def normalize_variance(w, R) -> WeightVector:
    """Scale ``w`` so the in-sample portfolio series has sample variance 1."""
    w = w.w if isinstance(w, WeightVector) else np.asarray(w, dtype=float)
    sd = portfolio_std(w, R)
    if not np.isfinite(sd) or sd <= 0:
        raise RidgeError("portfolio has zero variance; cannot normalise")
    return WeightVector(w / sd, 1.0 / sd)


def rescale_budget(w, atol: float = 1e-10) -> WeightVector:
    """Divide by the sum of weights so the allocation invests one unit."""
    w = w.w if isinstance(w, WeightVector) else np.asarray(w, dtype=float)
    s = float(w.sum())
    if abs(s) <= atol:
        raise BudgetError("budget rescale undefined: weights sum to ~0")
    return WeightVector(w / s, 1.0 / s)
