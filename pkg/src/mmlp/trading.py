"""Mean-variance timing of a single synthetic asset, with turnover costs."""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

DAILY_COSTS = (0.0001, 0.00015, 0.0003)
MONTHLY_COSTS = (0.0005, 0.001, 0.01)


class WipeoutWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class TradingConfig:
    gamma: float = 5.0
    lower: float = -1.0
    upper: float = 2.0
    vol_lookback: int = 252
    pm_lookback: int = 2520
    cost: float = 0.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if not self.lower < self.upper:
            raise ValueError("position bounds must satisfy lower < upper")
        if self.vol_lookback < 2 or self.pm_lookback < 2:
            raise ValueError("lookbacks must be >= 2")
        if self.cost < 0:
            raise ValueError("cost multiple must be >= 0")

    @classmethod
    def daily(cls, **kw) -> "TradingConfig":
        return cls(**{"gamma": 5.0, "vol_lookback": 252, "pm_lookback": 2520, **kw})

    @classmethod
    def monthly(cls, **kw) -> "TradingConfig":
        return cls(**{"gamma": 3.0, "vol_lookback": 60, "pm_lookback": 240, **kw})


def raw_position(y_hat, sigma2_hat, gamma: float):
    return np.asarray(y_hat, dtype=float) / (gamma * np.asarray(sigma2_hat, dtype=float))


def mv_position(y_hat: float, sigma2_hat: float, config: TradingConfig = TradingConfig()) -> float:
    """Mean-variance position ``y_hat / (gamma * sigma2_hat)`` clipped to the bounds."""
    if not sigma2_hat > 0:
        raise ValueError("sigma2_hat must be positive")
    return float(np.clip(y_hat / (config.gamma * sigma2_hat), config.lower, config.upper))


def _trailing(series, lookback: int, min_obs: int, stat):
    x = np.asarray(series, dtype=float)
    out = np.full(x.shape[0], np.nan)
    for t in range(min_obs, x.shape[0]):
        out[t] = stat(x[max(0, t - lookback):t])
    return out


def rolling_variance(series, lookback: int) -> np.ndarray:
    """Variance forecast for each period from the observations before it.

    ``out[t]`` is the sample variance (divisor n - 1) of the last
    ``min(t, lookback)`` values strictly before ``t``; NaN for ``t < 2``.
    """
    if lookback < 2:
        raise ValueError("lookback must be >= 2")
    return _trailing(series, lookback, 2, lambda w: np.var(w, ddof=1))


def prevailing_mean(series, lookback: int) -> np.ndarray:
    """Trailing mean of the last ``min(t, lookback)`` values before ``t``; NaN at 0."""
    if lookback < 1:
        raise ValueError("lookback must be >= 1")
    return _trailing(series, lookback, 1, np.mean)


def turnover(effective_weights, asset_returns):
    """Per-period turnover after price drift.

    ``effective_weights[t]`` is the exposure held over period ``t``. Before
    trading into it, last period's exposure has drifted to
    ``w[t-1] * (1 + r[t-1]) / (1 + w[t-1] @ r[t-1])``. Exposures before the
    first period are zero.

    Returns ``(turnover, wiped)``; ``wiped[t]`` marks periods where the
    previous position lost all its value, in which case the turnover is
    ``sum |w[t]|``.
    """
    W = np.asarray(effective_weights, dtype=float)
    r = np.asarray(asset_returns, dtype=float)
    if W.shape != r.shape:
        raise ValueError("weights and returns must have the same shape")
    T = W.shape[0]
    out = np.empty(T)
    wiped = np.zeros(T, dtype=bool)
    out[0] = np.abs(W[0]).sum()
    for t in range(1, T):
        growth = 1.0 + W[t - 1] @ r[t - 1]
        if growth <= 0:
            wiped[t] = True
            out[t] = np.abs(W[t]).sum()
            continue
        drifted = W[t - 1] * (1.0 + r[t - 1]) / growth
        out[t] = np.abs(W[t] - drifted).sum()
    if wiped.any():
        warnings.warn(f"{int(wiped.sum())} period(s) followed a wiped-out position",
                      WipeoutWarning, stacklevel=2)
    return out, wiped


@dataclass
class BacktestResult:
    dates: np.ndarray
    positions: np.ndarray
    gross: np.ndarray
    net: np.ndarray
    turnover: np.ndarray
    effective_weights: np.ndarray
    forecasts: np.ndarray
    sigma2: np.ndarray
    raw_positions: np.ndarray
    active: np.ndarray
    wiped: np.ndarray
    cost: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_clamped(self) -> int:
        r = self.raw_positions[self.active]
        return int(np.sum(r != self.positions[self.active]))

    def with_cost(self, cost: float) -> "BacktestResult":
        """Same positions, different cost multiple."""
        if cost < 0:
            raise ValueError("cost multiple must be >= 0")
        return BacktestResult(self.dates, self.positions, self.gross,
                              self.gross - cost * self.turnover, self.turnover,
                              self.effective_weights, self.forecasts, self.sigma2,
                              self.raw_positions, self.active, self.wiped, cost,
                              dict(self.meta))

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write("date,position,gross,net,turnover\n")
            for row in zip(self.dates.tolist(), self.positions, self.gross, self.net,
                           self.turnover):
                fh.write(",".join([str(row[0])] + [repr(float(v)) for v in row[1:]]) + "\n")

    def summary(self) -> dict:
        return {"cost": self.cost, "periods": int(self.dates.shape[0]),
                "active_periods": int(self.active.sum()), "clamped": self.n_clamped,
                "wiped": int(self.wiped.sum()), "mean_turnover": float(self.turnover.mean()),
                **self.meta}

    def to_json(self, path, metrics: dict | None = None):
        out = {"summary": self.summary()}
        if metrics is not None:
            out["metrics"] = metrics
        Path(path).write_text(json.dumps(out, indent=2, sort_keys=True), encoding="utf-8")


def _weights_matrix(weights_per_period, T):
    W = np.asarray(weights_per_period, dtype=float)
    if W.ndim == 1:
        W = np.broadcast_to(W, (T, W.shape[0]))
    if W.shape[0] != T:
        raise ValueError("weights_per_period must have one row per period")
    return W


def run_backtest(portfolio_returns, forecasts, weights_per_period, asset_returns,
                 config: TradingConfig = TradingConfig(), sigma2=None, dates=None) -> BacktestResult:
    """Trade a synthetic asset on its own forecasts.

    Parameters
    ----------
    portfolio_returns : (T,) array
        Realised return of the traded portfolio in each period.
    forecasts : (T,) array
        ``forecasts[t]`` predicts ``portfolio_returns[t]`` using data up to
        ``t - 1``. NaN marks warm-up periods, which hold no position.
    weights_per_period : (T, N) or (N,) array
        Relative asset weights of the portfolio.
    asset_returns : (T, N) array
    config : TradingConfig
    sigma2 : (T,) array, optional
        Variance forecasts; by default the trailing variance of
        ``portfolio_returns`` over ``config.vol_lookback`` periods.
    dates : array, optional

    Returns
    -------
    BacktestResult
    """
    y = np.asarray(portfolio_returns, dtype=float)
    f = np.asarray(forecasts, dtype=float)
    T = y.shape[0]
    if f.shape != (T,):
        raise ValueError("forecasts and portfolio returns must be aligned")
    r = np.asarray(asset_returns, dtype=float)
    W = _weights_matrix(weights_per_period, T)
    if r.shape != W.shape:
        raise ValueError("asset returns must be T x N")
    s2 = rolling_variance(y, config.vol_lookback) if sigma2 is None else np.asarray(sigma2, dtype=float)
    active = np.isfinite(f) & np.isfinite(s2) & (s2 > 0)
    raw = np.zeros(T)
    raw[active] = raw_position(f[active], s2[active], config.gamma)
    pos = np.clip(raw, config.lower, config.upper)
    pos[~active] = 0.0
    eff = pos[:, None] * W
    tov, wiped = turnover(eff, r)
    gross = pos * y
    net = gross - config.cost * tov
    if dates is None:
        dates = np.arange(T)
    return BacktestResult(np.asarray(dates), pos, gross, net, tov, eff, f, s2, raw,
                          active, wiped, config.cost, {"config": asdict(config)})


def run_effective(effective_weights, asset_returns, cost: float = 0.0, dates=None) -> BacktestResult:
    """Account a strategy given directly as per-asset exposures (e.g. a bag)."""
    eff = np.asarray(effective_weights, dtype=float)
    r = np.asarray(asset_returns, dtype=float)
    T = eff.shape[0]
    gross = np.einsum("tn,tn->t", eff, r)
    tov, wiped = turnover(eff, r)
    nan = np.full(T, np.nan)
    return BacktestResult(np.asarray(np.arange(T) if dates is None else dates), np.ones(T), gross,
                          gross - cost * tov, tov, eff, nan, nan, np.ones(T),
                          np.ones(T, dtype=bool), wiped, cost)


def cost_sweep(result: BacktestResult, costs) -> list:
    return [result.with_cost(c) for c in costs]
