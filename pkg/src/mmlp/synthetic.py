"""Synthetic return panels with known structure, for tests and demos."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ReturnsPanel


@dataclass(frozen=True)
class PlantedPanel:
    panel: ReturnsPanel
    w_star: np.ndarray      # weights with w_star @ r_t = hidden series
    hidden: np.ndarray      # the predictable combination, unit variance
    regime: np.ndarray      # 1 in the high-volatility state


def regime_ar1(T: int, rng, phi_high: float = -0.45, phi_low: float = 0.0,
               p_stay_high: float = 0.95, p_stay_low: float = 0.98,
               vol_high: float = 2.5, vol_low: float = 1.0):
    """Two-state Markov-switching AR(1), rescaled to unit sample variance.

    The high-volatility state mean-reverts with coefficient ``phi_high``;
    the calm state follows ``phi_low``.
    """
    state = np.empty(T, dtype=np.int64)
    x = np.empty(T)
    s = 0
    prev = 0.0
    eps = rng.standard_normal(T)
    u = rng.random(T)
    for t in range(T):
        stay = p_stay_high if s == 1 else p_stay_low
        if u[t] > stay:
            s = 1 - s
        phi, vol = (phi_high, vol_high) if s == 1 else (phi_low, vol_low)
        prev = phi * prev + vol * eps[t]
        x[t] = prev
        state[t] = s
    return x / x.std(ddof=1), state


def planted_direction(N: int, rng, orientation: str = "long-only") -> np.ndarray:
    """Unit vector along which the predictable series is planted.

    ``"long-only"`` draws Dirichlet(1, ..., 1) loadings, ``"random"`` a
    uniformly distributed direction on the sphere.
    """
    if orientation == "long-only":
        d = rng.dirichlet(np.ones(N))
    elif orientation == "random":
        d = rng.standard_normal(N)
    else:
        raise ValueError(f"unknown orientation {orientation!r}")
    return d / np.linalg.norm(d)


def planted_panel(N: int = 20, T: int = 3000, seed: int = 0, scale: float = 0.01,
                  orientation: str = "long-only", **regime_kw) -> PlantedPanel:
    """Returns ``r_t = scale * Q s_t`` with an orthogonal ``Q``.

    The first component of ``s_t`` is the regime AR(1); the rest are iid
    standard normal. The predictable portfolio is ``Q[:, 0] / scale``.
    """
    rng = np.random.default_rng(seed)
    q1 = planted_direction(N, rng, orientation)
    M = rng.standard_normal((N, N))
    M[:, 0] = q1
    Q, _ = np.linalg.qr(M)
    Q[:, 0] = q1  # qr may flip the sign
    hidden, regime = regime_ar1(T, rng, **regime_kw)
    S = rng.standard_normal((T, N))
    S[:, 0] = hidden
    R = scale * S @ Q.T
    w_star = Q[:, 0] / scale
    panel = ReturnsPanel(np.arange(T), [f"a{j:02d}" for j in range(N)], R)
    return PlantedPanel(panel, w_star, hidden, regime)


def null_panel(N: int = 10, T: int = 1000, seed: int = 0, mean: float = 0.0005,
               vol: float = 0.01) -> ReturnsPanel:
    """iid Gaussian returns with a common mean and no predictability."""
    rng = np.random.default_rng(seed)
    R = mean + vol * rng.standard_normal((T, N))
    return ReturnsPanel(np.arange(T), [f"a{j:02d}" for j in range(N)], R)


def bundled_panel(seed: int = 7) -> PlantedPanel:
    """The small dataset shipped with the package (N=10, T=1200)."""
    return planted_panel(N=10, T=1200, seed=seed)


@dataclass(frozen=True)
class ExogenousPanel:
    panel: ReturnsPanel
    features: np.ndarray    # (T, K); row t predicts returns at t + 1
    names: tuple
    w_star: np.ndarray


def exogenous_panel(N: int = 10, T: int = 480, K: int = 4, seed: int = 0,
                    scale: float = 0.04, signal: float = 0.4) -> ExogenousPanel:
    """Monthly-style panel whose long-only combination responds to predictors.

    Predictors are persistent AR(1) series. The hidden return at ``t + 1`` is
    ``signal * tanh(2 x_{t,0}) * (1 + 0.5 * 1[x_{t,1} > 0])`` plus noise,
    rescaled to unit variance; the remaining predictors are irrelevant.
    """
    rng = np.random.default_rng(seed)
    q1 = planted_direction(N, rng, "long-only")
    M = rng.standard_normal((N, N))
    M[:, 0] = q1
    Q, _ = np.linalg.qr(M)
    Q[:, 0] = q1
    X = np.empty((T, K))
    x = np.zeros(K)
    for t in range(T):
        x = 0.9 * x + np.sqrt(1 - 0.81) * rng.standard_normal(K)
        X[t] = x
    g = np.tanh(2 * X[:, 0]) * (1 + 0.5 * (X[:, 1] > 0))
    hidden = np.empty(T)
    hidden[0] = rng.standard_normal()
    hidden[1:] = signal * g[:-1] / g.std() + rng.standard_normal(T - 1)
    hidden /= hidden.std(ddof=1)
    S = rng.standard_normal((T, N))
    S[:, 0] = hidden
    R = 0.005 + scale * S @ Q.T
    names = tuple(f"x{k}" for k in range(K))
    return ExogenousPanel(ReturnsPanel(np.arange(T), [f"a{j:02d}" for j in range(N)], R),
                          X, names, Q[:, 0] / scale)
