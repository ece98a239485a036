"""The alternating forest/ridge fit that learns a maximally predictable portfolio.

Each iteration fits a forest to the current portfolio series, smooths its
out-of-bag predictions with a learning rate, regresses them on the asset
returns to get new weights, and rescales the blended portfolio to unit
variance. The stored weights always reproduce the scaled series exactly.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import FeatureMatrix, ReturnsPanel, build_lags, marx_transform
from .forest import Forest, ForestConfig, fit_forest
from .ridge import RidgeConfig, RidgeFit, calibrate_lambda, portfolio_std

FORMAT_VERSION = 1
STOPPING_RULES = ("fixed", "early-oob", "weight-converged")
MODES = ("exogenous", "endogenous")
INITS = ("equal-weight", "min-variance")
BLENDS = ("unit", "raw")


class MaceError(RuntimeError):
    def __init__(self, message, iteration=None):
        super().__init__(message if iteration is None else f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True)
class MaceConfig:
    eta: float = 0.1
    s_max: int = 100
    stopping: str = "fixed"
    mode: str = "exogenous"
    init: str = "equal-weight"
    horizon: int = 1
    forest: ForestConfig = ForestConfig()
    ridge: RidgeConfig = RidgeConfig()
    xi: float = 1.0
    stochastic_weights: bool = False
    bag_size: int = 1
    seed: int = 0
    n_lags: int = 21
    marx: bool = True
    shrinkage: float = 0.1
    weight_tol: float = 1e-6
    cov_subsample: float = 1.0
    blend: str = "unit"

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if self.s_max < 1:
            raise ValueError("s_max must be >= 1")
        if self.xi < 0:
            raise ValueError("xi must be >= 0")
        if self.bag_size < 1:
            raise ValueError("bag_size must be >= 1")
        if self.stopping not in STOPPING_RULES:
            raise ValueError(f"stopping must be one of {STOPPING_RULES}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.n_lags < 1:
            raise ValueError("n_lags must be >= 1")
        if not 0 <= self.shrinkage <= 1:
            raise ValueError("shrinkage must lie in [0, 1]")
        if self.blend not in BLENDS:
            raise ValueError(f"blend must be one of {BLENDS}")
        if not 0 < self.cov_subsample <= 1:
            raise ValueError("cov_subsample must lie in (0, 1]")

    @property
    def ridge_config(self) -> RidgeConfig:
        # the tilted target only makes sense without an intercept to absorb it
        return replace(self.ridge, intercept=False) if self.xi > 0 else self.ridge

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MaceConfig":
        d = dict(d)
        d["forest"] = ForestConfig(**d.get("forest", {}))
        d["ridge"] = RidgeConfig(**d.get("ridge", {}))
        return cls(**d)


@dataclass
class IterationRecord:
    s: int
    loss: float
    oob_rmse: float
    dw_inf: float
    lam: float
    ridge_r2: float
    uncovered: int


@dataclass
class MaceModel:
    w: np.ndarray
    forest: Forest
    f_hat: np.ndarray
    z_hat: np.ndarray
    history: list
    best_s: int
    config: MaceConfig
    w_init: np.ndarray
    n_assets: int
    feature_names: tuple = ()
    unattainable: int = 0

    @property
    def iterations(self) -> int:
        return len(self.history)

    def portfolio(self, R) -> np.ndarray:
        """Return series of the learned portfolio on any return matrix."""
        return np.asarray(R, dtype=float) @ self.w

    def budget_weights(self) -> np.ndarray:
        from .ridge import rescale_budget
        return rescale_budget(self.w).w

    def lag_features(self, z) -> FeatureMatrix:
        return endogenous_features(z, self.config.n_lags, self.config.marx)

    def forecast(self, R=None, X=None) -> np.ndarray:
        """Forecasts of the portfolio return.

        Exogenous mode: ``X`` rows dated t give the forecast for t + h.
        Endogenous mode: ``R`` holds consecutive returns; entry t of the
        output forecasts ``R[t] @ w`` from rows before t and is NaN for the
        first ``n_lags`` rows.
        """
        if self.config.mode == "exogenous":
            if X is None:
                raise ValueError("exogenous model needs feature rows")
            X = X.values if isinstance(X, FeatureMatrix) else X
            return self.forest.predict(X)
        if R is None:
            raise ValueError("endogenous model needs the return history")
        R = R.values if isinstance(R, ReturnsPanel) else np.asarray(R, dtype=float)
        z = self.portfolio(R)
        out = np.full(z.shape[0], np.nan)
        out[self.config.n_lags:] = self.forest.predict(self.lag_features(z).values)
        return out

    def history_table(self):
        names = ["s", "loss", "oob_rmse", "dw_inf", "lam", "ridge_r2", "uncovered"]
        return names, [[getattr(r, n) for n in names] for r in self.history]

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "w": self.w.tolist(),
            "w_init": self.w_init.tolist(),
            "n_assets": self.n_assets,
            "feature_names": list(self.feature_names),
            "best_s": self.best_s,
            "unattainable": self.unattainable,
            "f_hat": self.f_hat.tolist(),
            "z_hat": self.z_hat.tolist(),
            "history": [asdict(r) for r in self.history],
            "forest": self.forest.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MaceModel":
        version = d.get("format_version")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version!r}")
        return cls(
            w=np.asarray(d["w"], dtype=float),
            forest=Forest.from_dict(d["forest"]),
            f_hat=np.asarray(d["f_hat"], dtype=float),
            z_hat=np.asarray(d["z_hat"], dtype=float),
            history=[IterationRecord(**r) for r in d["history"]],
            best_s=int(d["best_s"]),
            config=MaceConfig.from_dict(d["config"]),
            w_init=np.asarray(d["w_init"], dtype=float),
            n_assets=int(d["n_assets"]),
            feature_names=tuple(d.get("feature_names", ())),
            unattainable=int(d.get("unattainable", 0)),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "MaceModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def endogenous_features(z, n_lags: int, marx: bool = True) -> FeatureMatrix:
    """Lags 1..n_lags of a portfolio series, optionally MARX-rotated.

    Row i of the result is dated ``n_lags + i`` and only uses earlier values.
    """
    lags = build_lags(z, n_lags, name="z")
    return marx_transform(lags) if marx else lags


def _values(R) -> np.ndarray:
    if isinstance(R, ReturnsPanel):
        return R.values
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[1] < 2:
        raise ValueError("returns must be a T x N matrix with N >= 2")
    if not np.isfinite(R).all():
        raise ValueError("returns must be finite")
    return R


def min_variance_weights(R, shrinkage: float = 0.1, rows=None) -> np.ndarray:
    """Fully invested minimum-variance weights under diagonal shrinkage.

    The covariance is ``(1 - shrinkage) S + shrinkage diag(S)``. If that
    matrix is numerically singular the shrinkage is raised until it is not.
    """
    R = _values(R)
    if rows is not None:
        R = R[rows]
    S = np.cov(R, rowvar=False)
    N = S.shape[0]
    d = np.diag(S)
    if np.any(d <= 0):
        raise MaceError("an asset has zero variance; min-variance undefined")
    delta = shrinkage
    for _ in range(60):
        C = (1 - delta) * S + delta * np.diag(d)
        if np.linalg.cond(C) < 1e12:
            break
        delta = min(1.0, max(2 * delta, 1e-4))
    x = np.linalg.solve(C, np.ones(N))
    return x / x.sum()


def initialize(R, config: MaceConfig, rows=None):
    """Starting weights and the unit-variance portfolio series they produce."""
    Rv = _values(R)
    N = Rv.shape[1]
    if config.init == "equal-weight":
        w = np.full(N, 1.0 / N)
    else:
        w = min_variance_weights(Rv, config.shrinkage, rows)
    sd = portfolio_std(w, Rv)
    if not sd > 0:
        raise MaceError("initial portfolio has zero variance")
    w = w / sd
    return w, Rv @ w


def stochastic_obs_weights(s: int, T: int, s_max: int, rng) -> np.ndarray:
    """Random observation weights with mean 1 and variance 1/s.

    Drawn from Gamma(shape=s, scale=1/s), which is exponential at s = 1.
    Past the first third of the iteration budget every weight is 1.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    if s > s_max / 3:
        return np.ones(T)
    return rng.gamma(shape=s, scale=1.0 / s, size=T)


def _iteration_seed(seed: int, s: int) -> int:
    return int(np.random.SeedSequence([seed, s]).generate_state(1)[0])


def _align_exogenous(X, R, h):
    X = X.values if isinstance(X, FeatureMatrix) else np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != R.shape[0]:
        raise ValueError("features and returns must cover the same dates")
    # feature row t explains the return row t + h
    return X[:-h], slice(h, None)


def fit(R, X=None, config: MaceConfig = MaceConfig(), cov_rows=None,
        n_jobs: int | None = None) -> MaceModel:
    """Run the alternating fit on a training window.

    Parameters
    ----------
    R : ReturnsPanel or (T, N) array
        Training returns.
    X : FeatureMatrix or (T, K) array, optional
        Exogenous predictors on the same dates as ``R``; required in
        exogenous mode, ignored in endogenous mode.
    config : MaceConfig
    cov_rows : array of int, optional
        Rows used to estimate the min-variance starting covariance.
    n_jobs : int, optional
        Threads for forest growing.

    Returns
    -------
    MaceModel
        The final model, or the snapshot at the lowest normalised OOB RMSE
        under ``stopping="early-oob"``.
    """
    Rv = _values(R)
    T, N = Rv.shape
    cfg = config
    rcfg = cfg.ridge_config
    eta_s = lambda s: 1.0 if s == 1 else cfg.eta  # noqa: E731

    if cfg.mode == "exogenous":
        if X is None:
            raise ValueError("exogenous mode needs a feature matrix")
        X_fixed, target_rows = _align_exogenous(X, Rv, cfg.horizon)
        names = tuple(X.names) if isinstance(X, FeatureMatrix) else ()
    else:
        X_fixed = None
        target_rows = slice(cfg.n_lags, None)
        names = endogenous_features(np.zeros(cfg.n_lags + 1), cfg.n_lags, cfg.marx).names
    R_fit = Rv[target_rows]
    n_fit = R_fit.shape[0]
    if n_fit < 2 * cfg.forest.min_node_size:
        raise ValueError("training window too short for the forest settings")

    w, z_hat = initialize(Rv, cfg, cov_rows)
    w_init = w.copy()
    f_hat = np.zeros(n_fit)
    kappa_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))

    history: list = []
    best = None
    best_score = math.inf
    forest = None
    unattainable = 0
    for s in range(1, cfg.s_max + 1):
        eta = eta_s(s)
        if X_fixed is None:
            feats = endogenous_features(z_hat, cfg.n_lags, cfg.marx).values
        else:
            feats = X_fixed
        target = z_hat[target_rows]
        fcfg = replace(cfg.forest, seed=_iteration_seed(cfg.seed, s))
        forest = fit_forest(feats, target, fcfg, n_jobs=n_jobs)
        f_star, coverage = forest.predict_oob()
        uncovered = coverage == 0
        if uncovered.any():
            f_star[uncovered] = forest.predict(feats[uncovered])
        covered = ~uncovered
        err = f_star[covered] - target[covered]
        oob = float(np.sqrt(np.mean(err * err))) / float(np.std(target, ddof=1))

        f_hat = eta * f_star + (1 - eta) * f_hat
        kappa = stochastic_obs_weights(s, n_fit, cfg.s_max, kappa_rng) if cfg.stochastic_weights else None
        ridge_target = f_hat + cfg.xi if cfg.xi > 0 else f_hat
        rfit: RidgeFit = calibrate_lambda(R_fit, ridge_target, rcfg, obs_weights=kappa)
        unattainable += int(rfit.unattainable)

        w_star = rfit.w
        if cfg.blend == "unit":
            sd_star = portfolio_std(w_star, Rv)
            if not (np.isfinite(sd_star) and sd_star > 0):
                raise MaceError("ridge step returned a zero-variance portfolio", s)
            w_star = w_star / sd_star
        blend = eta * w_star + (1 - eta) * w
        sd = portfolio_std(blend, Rv)
        if not (np.isfinite(sd) and sd > 0):
            raise MaceError("blended portfolio has zero or non-finite variance", s)
        w_new = blend / sd
        z_new = Rv @ w_new
        if not (np.isfinite(w_new).all() and np.isfinite(f_hat).all()):
            raise MaceError("non-finite weights or predictions", s)
        dw = float(np.max(np.abs(w_new - w)))
        w, z_hat = w_new, z_new
        loss = float(np.mean((z_hat[target_rows] - f_hat) ** 2))
        history.append(IterationRecord(s, loss, oob, dw, rfit.lam, rfit.r2, int(uncovered.sum())))

        if cfg.stopping == "early-oob" and oob < best_score:
            best_score = oob
            best = (s, w.copy(), forest, f_hat.copy(), z_hat.copy())
        if cfg.stopping == "weight-converged" and dw < cfg.weight_tol:
            break

    if cfg.stopping == "early-oob":
        best_s, w, forest, f_hat, z_hat = best
    else:
        best_s = len(history)
    return MaceModel(w=w, forest=forest, f_hat=f_hat, z_hat=z_hat, history=history,
                     best_s=best_s, config=cfg, w_init=w_init, n_assets=N,
                     feature_names=names, unattainable=unattainable)


@dataclass
class BagOfStrategies:
    members: list
    member_seeds: list
    subsample: float = 0.7
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.members:
            raise ValueError("empty bag")
        ref = self.members[0]
        for m in self.members[1:]:
            if (m.n_assets, m.config.mode, m.config.horizon) != (
                    ref.n_assets, ref.config.mode, ref.config.horizon):
                raise ValueError("bag members disagree on assets, mode or horizon")

    @property
    def B(self) -> int:
        return len(self.members)

    @property
    def weights(self) -> np.ndarray:
        """(B, N) matrix of member weights."""
        return np.stack([m.w for m in self.members])

    def to_dict(self) -> dict:
        return {"format_version": FORMAT_VERSION, "kind": "bag",
                "member_seeds": list(self.member_seeds), "subsample": self.subsample,
                "meta": self.meta, "members": [m.to_dict() for m in self.members]}

    @classmethod
    def from_dict(cls, d: dict) -> "BagOfStrategies":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported bag format version {d.get('format_version')!r}")
        return cls([MaceModel.from_dict(m) for m in d["members"]], list(d["member_seeds"]),
                   d.get("subsample", 0.7), d.get("meta", {}))


def member_seeds(seed: int, B: int) -> list:
    return [int(ss.generate_state(1)[0]) for ss in np.random.SeedSequence(seed).spawn(B)]


def fit_bag(R, X=None, config: MaceConfig = MaceConfig(), subsample: float = 0.7,
            seeds=None, n_jobs: int | None = None, bag_jobs: int = 1) -> BagOfStrategies:
    """Fit ``config.bag_size`` randomised members.

    Every member starts from min-variance weights estimated on its own
    random ``subsample`` of training rows and uses stochastic observation
    weights. Member seeds come from ``config.seed`` unless given.
    """
    if config.bag_size < 2 and seeds is None:
        raise ValueError("bagging needs bag_size >= 2")
    Rv = _values(R)
    T = Rv.shape[0]
    seeds = member_seeds(config.seed, config.bag_size) if seeds is None else list(seeds)
    m = max(2, int(round(subsample * T)))

    def job(seed):
        rng = np.random.default_rng(seed)
        rows = np.sort(rng.choice(T, size=m, replace=False))
        cfg = replace(config, seed=int(seed), init="min-variance", stochastic_weights=True,
                      bag_size=1)
        return fit(Rv, X, cfg, cov_rows=rows, n_jobs=n_jobs)

    if bag_jobs > 1:
        with ThreadPoolExecutor(max_workers=bag_jobs) as pool:
            members = list(pool.map(job, seeds))
    else:
        members = [job(sd) for sd in seeds]
    return BagOfStrategies(members, seeds, subsample)


def collapse_bag(bag, positions) -> np.ndarray:
    """Effective per-asset weights of the averaged bag strategy.

    ``positions[t, b]`` is member b's position in period t; the result's row
    t is ``mean_b positions[t, b] * w_b``.
    """
    W = bag.weights if isinstance(bag, BagOfStrategies) else np.asarray(bag, dtype=float)
    P = np.asarray(positions, dtype=float)
    if P.ndim != 2 or P.shape[1] != W.shape[0]:
        raise ValueError(f"positions must be T x {W.shape[0]}")
    return (P @ W) / W.shape[0]
