"""OLS, Newey-West covariance and the spanning-regression report."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps


class RankError(ValueError):
    pass


@dataclass
class RegressionResult:
    coefficients: np.ndarray
    se: np.ndarray
    hac_se: np.ndarray | None
    r2: float
    residuals: np.ndarray
    T: int
    K: int
    intercept: bool
    names: list = field(default_factory=list)
    hac_lags: int | None = None

    @property
    def design_width(self) -> int:
        return self.K + int(self.intercept)

    def tstats(self, hac: bool = True) -> np.ndarray:
        se = self.hac_se if hac and self.hac_se is not None else self.se
        return self.coefficients / se

    def pvalues(self, hac: bool = True) -> np.ndarray:
        df = self.T - self.design_width
        return 2 * sps.t.sf(np.abs(self.tstats(hac)), df)


def design(X, intercept: bool) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if intercept:
        X = np.column_stack([np.ones(X.shape[0]), X])
    return X


def newey_west_lags(T: int) -> int:
    return int(math.floor(4 * (T / 100) ** (2 / 9)))


def ols(y, X, intercept: bool = True, names=None, hac_lags="auto") -> RegressionResult:
    """Least squares through a QR decomposition.

    ``hac_lags="auto"`` uses floor(4 (T/100)^(2/9)); ``None`` skips the HAC
    standard errors.
    """
    y = np.asarray(y, dtype=float)
    Z = design(X, intercept)
    T, p = Z.shape
    if T <= p:
        raise RankError(f"need more observations ({T}) than regressors ({p})")
    Q, Rm = np.linalg.qr(Z)
    diag = np.abs(np.diag(Rm))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0) * max(T, p):
        raise RankError("design matrix is rank deficient")
    beta = np.linalg.solve(Rm, Q.T @ y)
    resid = y - Z @ beta
    yc = y - y.mean() if intercept else y
    r2 = 1.0 - float(resid @ resid) / float(yc @ yc) if float(yc @ yc) > 0 else float("nan")
    s2 = float(resid @ resid) / (T - p)
    Rinv = np.linalg.solve(Rm, np.eye(p))
    cov = s2 * (Rinv @ Rinv.T)
    K = p - int(intercept)
    if names is None:
        names = [f"x{i}" for i in range(1, K + 1)]
    names = (["const"] if intercept else []) + list(names)
    res = RegressionResult(beta, np.sqrt(np.diag(cov)), None, r2, resid, T, K,
                           intercept, names)
    if hac_lags is not None:
        L = newey_west_lags(T) if hac_lags == "auto" else int(hac_lags)
        res.hac_se = np.sqrt(np.diag(newey_west(res, X, L)))
        res.hac_lags = L
    return res


def bartlett_weight(lag: int, L: int) -> float:
    return max(0.0, 1.0 - lag / (L + 1))


def newey_west(result: RegressionResult, X, lags: int) -> np.ndarray:
    """HAC sandwich covariance with Bartlett weights; ``lags=0`` gives White's."""
    if lags < 0:
        raise ValueError("lags must be >= 0")
    Z = design(X, result.intercept)
    u = result.residuals
    Zu = Z * u[:, None]
    S = Zu.T @ Zu
    for lag in range(1, lags + 1):
        G = Zu[lag:].T @ Zu[:-lag]
        S += bartlett_weight(lag, lags) * (G + G.T)
    bread = np.linalg.inv(Z.T @ Z)
    cov = bread @ S @ bread
    return 0.5 * (cov + cov.T)


def stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def regression_report(result: RegressionResult, hac: bool = True) -> dict:
    se = result.hac_se if hac and result.hac_se is not None else result.se
    pv = result.pvalues(hac)
    return {
        "T": result.T,
        "r2": result.r2,
        "hac_lags": result.hac_lags if hac else None,
        "terms": [
            {"name": n, "coef": float(b), "se": float(s), "p": float(p), "stars": stars(p)}
            for n, b, s, p in zip(result.names, result.coefficients, se, pv)
        ],
    }


def format_report(result: RegressionResult, hac: bool = True) -> str:
    rep = regression_report(result, hac)
    lines = [f"{'term':<12}{'coef':>12}{'se':>12}", "-" * 36]
    for t in rep["terms"]:
        lines.append(f"{t['name']:<12}{t['coef']:>12.4f}{t['stars']:<3}"
                     f"{'(' + format(t['se'], '.4f') + ')':>9}")
    lines.append("-" * 36)
    lines.append(f"T = {rep['T']}, R2 = {rep['r2']:.4f}")
    lines.append("***p<0.01; **p<0.05; *p<0.1")
    return "\n".join(lines)


def report_json(result: RegressionResult, hac: bool = True) -> str:
    return json.dumps(regression_report(result, hac), indent=2)


def spanning_regression(strategy_returns, factors, names=None, hac_lags="auto"):
    """Regress strategy returns on factor returns; the intercept is the alpha."""
    return ols(strategy_returns, factors, intercept=True, names=names, hac_lags=hac_lags)
