"""Forecast and strategy evaluation."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats as sps

from .stats import ols

PERIODS_PER_YEAR = {"daily": 252, "monthly": 12}


class MetricError(ValueError):
    pass


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def mse(y, yhat) -> float:
    e = _arr(y) - _arr(yhat)
    return float(np.mean(e * e))


def oos_r2(y, yhat_model, pm) -> float:
    """``1 - MSE(model) / MSE(prevailing mean)``; ``pm`` may be a scalar."""
    y = _arr(y)
    if y.size < 1:
        raise MetricError("need at least one observation")
    pm = np.broadcast_to(_arr(pm), y.shape)
    denom = mse(y, pm)
    if denom == 0:
        raise MetricError("prevailing-mean MSE is zero")
    return 1.0 - mse(y, yhat_model) / denom


def annualized_return(returns, periods_per_year: int) -> float:
    r = _arr(returns)
    if r.size < 2:
        raise MetricError("need at least two returns")
    return float(r.mean() * periods_per_year)


def sharpe(returns, periods_per_year: int, risk_free=None) -> float:
    r = _arr(returns)
    if risk_free is not None:
        r = r - _arr(risk_free)
    if r.size < 2:
        raise MetricError("need at least two returns")
    sd = float(r.std(ddof=1))
    if sd == 0 or np.ptp(r) == 0:
        raise MetricError("Sharpe ratio undefined: zero standard deviation")
    return float(r.mean() / sd * math.sqrt(periods_per_year))


def omega(returns, threshold: float) -> float:
    """Upside over downside partial moments about ``threshold``.

    Returns ``inf`` when nothing falls below the threshold.
    """
    r = _arr(returns)
    up = float(np.maximum(r - threshold, 0.0).sum())
    down = float(np.maximum(threshold - r, 0.0).sum())
    if down == 0:
        return math.inf
    return up / down


def max_drawdown(returns) -> float:
    """Largest fall of log wealth from a running peak, starting from log wealth 0."""
    r = _arr(returns)
    if np.any(r <= -1):
        raise MetricError("returns of -100% or worse make log wealth undefined")
    peak = 0.0
    level = 0.0
    worst = 0.0
    for x in np.log1p(r):
        level += x
        if level > peak:
            peak = level
        elif peak - level > worst:
            worst = peak - level
    return worst


@dataclass(frozen=True)
class SliceSpec:
    """Named set of test periods; ``ranges`` are inclusive (start, end) index or date pairs."""

    name: str
    ranges: tuple
    exclude: bool = False

    def mask(self, dates) -> np.ndarray:
        d = np.asarray(dates)
        m = np.zeros(d.shape[0], dtype=bool)
        for lo, hi in self.ranges:
            m |= (d >= lo) & (d <= hi)
        return ~m if self.exclude else m


def slice_r2(y, yhat, pm, slices, dates=None) -> dict:
    y = _arr(y)
    dates = np.arange(y.shape[0]) if dates is None else dates
    pm = np.broadcast_to(_arr(pm), y.shape)
    yhat = _arr(yhat)
    out = {}
    for sl in slices:
        m = sl.mask(dates)
        if not m.any():
            raise MetricError(f"slice {sl.name!r} is empty")
        out[sl.name] = oos_r2(y[m], yhat[m], pm[m])
    return out


@dataclass(frozen=True)
class AR1Result:
    coefficient: float
    hac_se: float
    intercept: float
    lags: int


def ar1_hac(series, lags="auto") -> AR1Result:
    """OLS of x_t on x_{t-1} with Newey-West standard errors."""
    x = _arr(series)
    if x.size < 10:
        raise MetricError("need at least 10 observations")
    if np.var(x[:-1]) == 0:
        raise MetricError("degenerate series: zero variance")
    res = ols(x[1:], x[:-1], intercept=True, hac_lags=lags)
    return AR1Result(float(res.coefficients[1]), float(res.hac_se[1]),
                     float(res.coefficients[0]), int(res.hac_lags))


def pred_corr(yhat, y_lag1) -> float:
    a, b = _arr(yhat), _arr(y_lag1)
    if a.std() == 0 or b.std() == 0:
        raise MetricError("correlation undefined for a constant series")
    return float(np.corrcoef(a, b)[0, 1])


@dataclass
class MetricsBundle:
    r2_oos: float
    r_annualized: float
    sharpe: float
    omega: float
    max_drawdown: float
    kurtosis: float
    skewness: float
    periods_per_year: int
    r2_by_slice: dict = field(default_factory=dict)
    omega_infinite: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["omega"]):
            d["omega"] = None
        return d

    def to_json(self, path=None) -> str:
        s = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(s, encoding="utf-8")
        return s


def _safe(fn, *a):
    try:
        return fn(*a)
    except MetricError:
        return math.nan


def evaluate(strategy_returns, y, yhat, pm, periods_per_year: int, omega_threshold: float,
             slices=(), dates=None, risk_free=None) -> MetricsBundle:
    """All summary statistics of one strategy over the test window.

    Undefined statistics (a flat strategy has no Sharpe ratio) come out as NaN.
    """
    r = _arr(strategy_returns)
    om = omega(r, omega_threshold)
    flat = np.ptp(r) == 0
    return MetricsBundle(
        r2_oos=_safe(oos_r2, y, yhat, pm),
        r_annualized=annualized_return(r, periods_per_year),
        sharpe=_safe(sharpe, r, periods_per_year, risk_free),
        omega=om,
        max_drawdown=max_drawdown(r),
        kurtosis=math.nan if flat else float(sps.kurtosis(r)),
        skewness=math.nan if flat else float(sps.skew(r)),
        periods_per_year=periods_per_year,
        r2_by_slice=slice_r2(y, yhat, pm, slices, dates) if slices else {},
        omega_infinite=math.isinf(om),
    )


@dataclass
class BaselineDraw:
    draw_id: int
    kind: str
    nonneg: bool
    r2_ins: float
    r2_oos: float


@dataclass
class BaselineDistribution:
    draws: list

    def r2(self, kind="random") -> np.ndarray:
        return np.array([d.r2_oos for d in self.draws if d.kind == kind])

    @property
    def median_random(self) -> float:
        return float(np.median(self.r2("random")))

    def top_in_sample(self, kind="random") -> BaselineDraw:
        cand = [d for d in self.draws if d.kind == kind]
        return max(cand, key=lambda d: d.r2_ins)

    def percentile_of(self, value: float, kind="random") -> float:
        """Share of draws with OOS R^2 at or below ``value``."""
        return float(np.mean(self.r2(kind) <= value))

    def to_csv(self, path):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["draw_id", "kind", "nonneg", "r2_ins", "r2_oos"])
            for d in self.draws:
                w.writerow([d.draw_id, d.kind, int(d.nonneg), repr(d.r2_ins), repr(d.r2_oos)])


def random_weights(N: int, nonneg: bool, rng) -> np.ndarray:
    """Dirichlet(1) weights when ``nonneg``, else iid standard normal."""
    return rng.dirichlet(np.ones(N)) if nonneg else rng.standard_normal(N)


def _predictability(z_train, z_test, features_fn, forest_config, n_jobs=None):
    from .forest import fit_forest

    z_all = np.concatenate([z_train, z_test])
    X, offset = features_fn(z_all)
    n_tr = z_train.shape[0] - offset
    y = z_all[offset:]
    f = fit_forest(X[:n_tr], y[:n_tr], forest_config, n_jobs=n_jobs)
    oob, cov = f.predict_oob()
    ok = cov > 0
    pm = float(y[:n_tr].mean())
    r2_ins = oos_r2(y[:n_tr][ok], oob[ok], pm)
    r2_out = oos_r2(y[n_tr:], f.predict(X[n_tr:]), pm)
    return r2_ins, r2_out


def lag_features_fn(n_lags: int = 21, marx: bool = True):
    from .mace import endogenous_features

    def fn(z):
        return endogenous_features(z, n_lags, marx).values, n_lags
    return fn


def exogenous_features_fn(X, horizon: int = 1):
    X = _arr(X)

    def fn(z):
        # row t of X predicts z[t + h]; the first h targets have no features
        out = np.full((z.shape[0], X.shape[1]), np.nan)
        out[horizon:] = X[:z.shape[0] - horizon]
        return out[horizon:], horizon
    return fn


def random_baseline(R_train, R_test, n_random: int, nonneg: bool, forest_config,
                    features_fn=None, seed: int = 0, single_stocks: bool = True,
                    n_jobs=None) -> BaselineDistribution:
    """OOS R^2 of the forest on random fixed portfolios and on single assets.

    Signed draws are scaled to unit in-sample variance; Dirichlet draws
    already sum to one.
    """
    if n_random < 1:
        raise ValueError("n_random must be >= 1")
    R_train, R_test = _arr(R_train), _arr(R_test)
    N = R_train.shape[1]
    features_fn = features_fn or lag_features_fn()
    seeds = np.random.SeedSequence(seed).spawn(n_random)
    draws = []
    for i, ss in enumerate(seeds):
        w = random_weights(N, nonneg, np.random.default_rng(ss))
        if not nonneg:
            w = w / np.std(R_train @ w, ddof=1)
        ins, out = _predictability(R_train @ w, R_test @ w, features_fn, forest_config, n_jobs)
        draws.append(BaselineDraw(i, "random", nonneg, ins, out))
    if single_stocks:
        for j in range(N):
            ins, out = _predictability(R_train[:, j], R_test[:, j], features_fn,
                                       forest_config, n_jobs)
            draws.append(BaselineDraw(j, "stock", True, ins, out))
    return BaselineDistribution(draws)
