"""Command-line entry point: ``mmlp fit | backtest | baseline | shapley | report``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import config as C
from .data import (DataError, FeatureMatrix, feature_groups, lagged_feature_block,
                   load_features_csv, load_returns_csv)
from .forest import default_threads, fit_forest
from .interpret import (ShapleyMatrix, top_contributor_timeline, tree_shapley, vi_adjusted,
                        vi_oos)
from .mace import (BagOfStrategies, MaceError, MaceModel, collapse_bag, endogenous_features,
                   fit, fit_bag, min_variance_weights)
from .metrics import (MetricError, SliceSpec, evaluate, exogenous_features_fn, lag_features_fn,
                      oos_r2, random_baseline)
from .ridge import BudgetError, RidgeError, rescale_budget
from .trading import prevailing_mean, rolling_variance, run_backtest, run_effective

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_FIT = 5
EXIT_AUDIT = 6
EXIT_MISMATCH = 7


class ArtifactMismatch(ValueError):
    pass


class AuditFailure(RuntimeError):
    pass


# ---------------------------------------------------------------- data prep

@dataclass
class Dataset:
    dates: np.ndarray
    assets: tuple
    R: np.ndarray                 # (T, N) returns used by the model
    X: FeatureMatrix | None       # exogenous predictors on the same dates
    benchmark: np.ndarray | None
    n_train: int


def load_dataset(cfg: dict) -> Dataset:
    d = cfg["data"]
    if not d["returns"]:
        raise C.ConfigError("data.returns is not set")
    panel = load_returns_csv(d["returns"], missing=d["missing"])
    cols = list(panel.assets)
    extra = {}
    for key in ("benchmark", "risk_free"):
        name = d[key]
        if name is not None:
            if name not in cols:
                raise C.ConfigError(f"data.{key} column {name!r} not in {d['returns']}")
            extra[key] = panel.values[:, cols.index(name)]
    assets = [c for c in cols if c not in {d["benchmark"], d["risk_free"]}]
    panel = panel.select(assets)
    R = panel.values
    bench = extra.get("benchmark")
    if d["subtract_risk_free"] and "risk_free" in extra:
        R = R - extra["risk_free"][:, None]
        if bench is not None:
            bench = bench - extra["risk_free"]
    dates = panel.dates
    X = None
    if cfg["mace"]["mode"] == "exogenous":
        if not d["features"]:
            raise C.ConfigError("exogenous mode needs data.features")
        feats = load_features_csv(d["features"], missing=d["missing"])
        feats = lagged_feature_block(feats, int(d["feature_lags"]), d["difference"])
        common = np.intersect1d(dates, feats.dates)
        if common.size < 2:
            raise DataError("returns and features share fewer than 2 dates")
        ri = np.searchsorted(dates, common)
        fi = np.searchsorted(feats.dates, common)
        R, dates = R[ri], common
        bench = bench[ri] if bench is not None else None
        X = FeatureMatrix(common, feats.names, feats.values[fi])
    n_train = split_point(cfg, dates)
    return Dataset(dates, tuple(assets), R, X, bench, n_train)


def split_point(cfg: dict, dates) -> int:
    sp = cfg["split"]
    T = len(dates)
    if sp["train_end"] is not None:
        n = int(np.searchsorted(np.asarray(dates), type(dates[0])(sp["train_end"]), side="right"))
    else:
        n = int(math.floor(float(sp["train_fraction"]) * T))
    if not 2 <= n < T:
        raise C.ConfigError(f"split leaves {n} training and {T - n} test periods")
    return n


# ---------------------------------------------------------------- run dir

def write_manifest(out: Path):
    entries = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            entries[str(p.relative_to(out))] = hashlib.sha256(p.read_bytes()).hexdigest()
    (out / "manifest.json").write_text(json.dumps({"files": entries}, indent=2, sort_keys=True),
                                       encoding="utf-8")


def write_rows(path: Path, header, rows):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


def _json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True), encoding="utf-8")


def load_artifact(path):
    p = Path(path)
    if p.is_dir():
        p = p / "model.json"
    if not p.exists():
        raise FileNotFoundError(f"no such model artifact: {p}")
    d = json.loads(p.read_text(encoding="utf-8"))
    return BagOfStrategies.from_dict(d) if d.get("kind") == "bag" else MaceModel.from_dict(d)


def _members(model):
    return model.members if isinstance(model, BagOfStrategies) else [model]


def check_compatible(model, ds: Dataset):
    for m in _members(model):
        if m.n_assets != ds.R.shape[1]:
            raise ArtifactMismatch(f"model has {m.n_assets} assets, data has {ds.R.shape[1]}")
        data_mode = "endogenous" if ds.X is None else "exogenous"
        if m.config.mode != data_mode:
            raise ArtifactMismatch(f"model is {m.config.mode} but the config is {data_mode}")
        if m.config.mode == "exogenous":
            if ds.X is None or m.forest.n_features != ds.X.K:
                raise ArtifactMismatch("model and data disagree on the feature set")


# ---------------------------------------------------------------- fitting

def fit_window(cfg: dict, ds: Dataset, end: int, n_jobs):
    mcfg = C.mace_config(cfg)
    R = ds.R[:end]
    X = None if ds.X is None else FeatureMatrix(ds.X.dates[:end], ds.X.names, ds.X.values[:end])
    if mcfg.bag_size > 1:
        return fit_bag(R, X, replace(mcfg, init="min-variance"),
                       subsample=float(cfg["bag"]["subsample"]), n_jobs=n_jobs)
    return fit(R, X, mcfg, n_jobs=n_jobs)


def cmd_fit(cfg: dict, out: Path, n_jobs) -> int:
    ds = load_dataset(cfg)
    model = fit_window(cfg, ds, ds.n_train, n_jobs)
    out.mkdir(parents=True, exist_ok=True)
    _json(out / "model.json", model.to_dict())
    rows = []
    for b, m in enumerate(_members(model)):
        names, table = m.history_table()
        rows.extend([b, *r] for r in table)
    write_rows(out / "history.csv", ["member", *names], rows)
    (out / "config.resolved.yaml").write_text(C.dump(cfg), encoding="utf-8")
    write_manifest(out)
    return EXIT_OK


# ---------------------------------------------------------------- backtest

def trade_scale(w) -> float:
    """Budget rescale when the weights have a usable sum, unit variance otherwise."""
    try:
        return rescale_budget(w).scale_applied
    except BudgetError:
        return 1.0


def _features_for(cfg, ds: Dataset):
    if cfg["mace"]["mode"] == "exogenous":
        return exogenous_features_fn(ds.X.values, int(cfg["mace"]["horizon"]))
    return lag_features_fn(int(cfg["mace"]["n_lags"]), bool(cfg["mace"]["marx"]))


def rf_forecast(z, ds: Dataset, cfg, end: int, n_jobs) -> np.ndarray:
    """Forest forecasts of ``z`` for rows >= end, fitted on rows before ``end``."""
    X, offset = _features_for(cfg, ds)(z)
    fcfg = C.mace_config(cfg).forest
    n_tr = end - offset
    f = fit_forest(X[:n_tr], z[offset:end], fcfg, n_jobs=n_jobs)
    out = np.full(z.shape[0], np.nan)
    out[end:] = f.predict(X[n_tr:])
    return out


def model_forecast(m: MaceModel, ds: Dataset) -> np.ndarray:
    if m.config.mode == "endogenous":
        return m.forecast(R=ds.R)
    h = m.config.horizon
    out = np.full(ds.R.shape[0], np.nan)
    out[h:] = m.forecast(X=ds.X.values[:-h])
    return out


def schedule(cfg, ds: Dataset):
    """``(fit_end, stop)`` pairs: each window is fitted on rows < fit_end and trades to stop."""
    T = ds.R.shape[0]
    if cfg["split"]["schedule"] == "fixed":
        return [(ds.n_train, T)]
    step = int(cfg["split"]["step"])
    return [(a, min(a + step, T)) for a in range(ds.n_train, T, step)]


def window_means(z, windows) -> np.ndarray:
    """Benchmark forecast for each test row: the mean of its estimation window."""
    out = np.full(z.shape[0], float(z[:windows[0][0]].mean()))
    for a, b in windows:
        out[a:b] = z[:a].mean()
    return out


@dataclass
class Strategy:
    name: str
    traded: np.ndarray        # (T,) portfolio return
    forecast: np.ndarray      # (T,) forecast of ``traded``
    weights: np.ndarray       # (T, N) relative weights
    pm: np.ndarray            # (T,) training-window mean of ``traded``


def _fixed_strategy(name, w, ds, cfg, kind, n_jobs, windows):
    T = ds.R.shape[0]
    w = np.asarray(w, dtype=float) * trade_scale(w)
    z = ds.R @ w
    if kind == "pm":
        fc = prevailing_mean(z, int(cfg["trading"]["pm_lookback"]))
    else:
        fc = np.full(T, np.nan)
        for a, b in windows:
            fc[a:b] = rf_forecast(z, ds, cfg, a, n_jobs)[a:b]
    return Strategy(name, z, fc, np.broadcast_to(w, ds.R.shape), window_means(z, windows))


def model_strategies(model, cfg, ds, n_jobs, windows):
    """The learned strategy (refitted per window when expanding) and its PM twin."""
    T, N = ds.R.shape
    models = [model]
    for a, _ in windows[1:]:
        models.append(fit_window(cfg, ds, a, n_jobs))
    if isinstance(model, BagOfStrategies):
        return [("mace-bag", models)]
    W = np.zeros((T, N))
    fc = np.full(T, np.nan)
    for m, (a, b) in zip(models, windows):
        sc = trade_scale(m.w)
        W[a:b] = m.w * sc
        fc[a:b] = model_forecast(m, ds)[a:b] * sc
    first = models[0]
    W[:windows[0][0]] = first.w * trade_scale(first.w)
    z = np.einsum("tn,tn->t", ds.R, W)
    pm_fc = prevailing_mean(z, int(cfg["trading"]["pm_lookback"]))
    pm = window_means(z, windows)
    return [Strategy("mace", z, fc, W, pm), Strategy("mace-pm", z, pm_fc, W, pm)]


def bag_backtest(models, cfg, ds, windows, cost):
    """Trade each member on its own forecasts and average the exposures."""
    T, N = ds.R.shape
    tcfg = C.trading_config(cfg, 0.0)
    eff = np.zeros((T, N))
    for bag, (a, b) in zip(models, windows):
        pos = np.zeros((T, bag.B))
        for j, m in enumerate(bag.members):
            sc = trade_scale(m.w)
            z = ds.R @ (m.w * sc)
            res = run_backtest(z, model_forecast(m, ds) * sc, m.w * sc, ds.R, tcfg)
            pos[:, j] = res.positions
        # the collapsed bag trades relative weights m.w * sc
        scaled = BagOfStrategies([replace(m, w=m.w * trade_scale(m.w)) for m in bag.members],
                                 bag.member_seeds)
        eff[a:b] = collapse_bag(scaled, pos)[a:b]
    return run_effective(eff, ds.R, cost, ds.dates)


def cmd_backtest(cfg: dict, model_path, out: Path, n_jobs) -> int:
    ds = load_dataset(cfg)
    model = load_artifact(model_path)
    check_compatible(model, ds)
    windows = schedule(cfg, ds)
    T, N = ds.R.shape
    n = ds.n_train
    ppy = C.PERIODS[cfg["frequency"]]
    costs = [0.0] + [float(c) for c in cfg["trading"]["costs"]]
    ew = np.full(N, 1.0 / N)
    bench_series = ds.benchmark if ds.benchmark is not None else ds.R @ ew
    threshold = float(bench_series[:n].mean())
    slices = [SliceSpec(s["name"], tuple(tuple(r) for r in s["ranges"]), bool(s.get("exclude", False)))
              for s in cfg["slices"]]

    strategies = []
    for item in model_strategies(model, cfg, ds, n_jobs, windows):
        strategies.append(item)
    mv = min_variance_weights(ds.R[:n], float(cfg["mace"]["shrinkage"]))
    for base, w in (("ew", ew), ("mv", mv)):
        for kind in ("pm", "rf"):
            strategies.append(_fixed_strategy(f"{base}-{kind}", w, ds, cfg, kind, n_jobs, windows))
    if ds.benchmark is not None:
        b = ds.benchmark
        fc_pm = prevailing_mean(b, int(cfg["trading"]["pm_lookback"]))
        fc_rf = np.full(T, np.nan)
        for a, e in windows:
            fc_rf[a:e] = rf_forecast(b, ds, cfg, a, n_jobs)[a:e]
        for kind, fc in (("pm", fc_pm), ("rf", fc_rf)):
            strategies.append(Strategy(f"bench-{kind}", b, fc, np.zeros((T, N)),
                                       window_means(b, windows)))

    out.mkdir(parents=True, exist_ok=True)
    (out / "strategies").mkdir(exist_ok=True)
    metrics, sweep = {}, []
    test = slice(n, T)
    for st in strategies:
        if isinstance(st, tuple):
            name, models = st
            results = [bag_backtest(models, cfg, ds, windows, c) for c in costs]
            y, yhat, pm = None, None, None
        else:
            name = st.name
            # prevailing-mean strategies estimate risk over the same lookback as the mean
            key = "pm_lookback" if name.endswith("-pm") else "vol_lookback"
            sigma2 = rolling_variance(st.traded, int(cfg["trading"][key]))
            base = run_backtest(st.traded, st.forecast, st.weights, ds.R,
                                C.trading_config(cfg, 0.0), sigma2=sigma2, dates=ds.dates)
            if name.startswith("bench"):
                # an index is traded directly; its turnover is the change in position
                base.turnover = np.abs(np.diff(base.positions, prepend=0.0))
            results = [base.with_cost(c) for c in costs]
            y, yhat, pm = st.traded[test], st.forecast[test], st.pm[test]
        metrics[name] = {}
        for c, res in zip(costs, results):
            net = res.net[test]
            bundle = evaluate(net, y if y is not None else net,
                              yhat if yhat is not None else np.zeros_like(net),
                              pm if pm is not None else 0.0, ppy, threshold, slices,
                              ds.dates[test])
            d = bundle.to_dict()
            if y is None:
                d["r2_oos"] = None
                d["r2_by_slice"] = {}
            metrics[name][repr(c)] = d
            sweep.append([name, c, d["r_annualized"], d["sharpe"], float(res.turnover[test].mean())])
        results[0].to_csv(out / "strategies" / f"{name}.csv")
    _json(out / "metrics.json", {"threshold": threshold, "periods_per_year": ppy,
                                 "refits": len(windows), "test_periods": T - n,
                                 "strategies": metrics})
    write_rows(out / "tc_sweep.csv", ["strategy", "cost", "r_annualized", "sharpe", "turnover"], sweep)
    (out / "config.resolved.yaml").write_text(C.dump(cfg), encoding="utf-8")
    write_manifest(out)
    return EXIT_OK


# ---------------------------------------------------------------- baseline

def cmd_baseline(cfg: dict, model_path, out: Path, n_jobs) -> int:
    ds = load_dataset(cfg)
    n = ds.n_train
    fcfg = C.mace_config(cfg).forest
    fn = _features_for(cfg, ds)
    dist = random_baseline(ds.R[:n], ds.R[n:], int(cfg["baseline"]["n_random"]),
                           bool(cfg["baseline"]["nonneg"]), fcfg, features_fn=fn,
                           seed=int(cfg["seed"]), n_jobs=n_jobs)
    out.mkdir(parents=True, exist_ok=True)
    dist.to_csv(out / "baseline.csv")
    top = dist.top_in_sample()
    summary = {"median_random_r2": dist.median_random, "top_in_sample_draw": top.draw_id,
               "top_in_sample_r2_oos": top.r2_oos, "n_random": len(dist.r2("random")),
               "n_stocks": len(dist.r2("stock"))}
    if model_path is not None:
        model = load_artifact(model_path)
        check_compatible(model, ds)
        m = _members(model)[0]
        z = ds.R @ m.w
        fc = model_forecast(m, ds)
        r2 = oos_r2(z[n:], fc[n:], float(z[:n].mean()))
        summary.update({"model_r2_oos": r2, "model_percentile": dist.percentile_of(r2)})
    _json(out / "baseline_summary.json", summary)
    write_manifest(out)
    return EXIT_OK


# ---------------------------------------------------------------- shapley

def _shap_inputs(m: MaceModel, ds: Dataset):
    """Feature rows and their dates, one row per forecast target period."""
    if m.config.mode == "endogenous":
        F = endogenous_features(ds.R @ m.w, m.config.n_lags, m.config.marx)
        return F.values, np.arange(m.config.n_lags, ds.R.shape[0]), F.names
    h = m.config.horizon
    return ds.X.values[:-h], np.arange(h, ds.R.shape[0]), ds.X.names


def cmd_shapley(cfg: dict, model_path, out: Path, n_jobs) -> int:
    ds = load_dataset(cfg)
    model = load_artifact(model_path)
    check_compatible(model, ds)
    windows = schedule(cfg, ds)
    pieces, win_idx, pos = [], [], 0
    models = [model] + [fit_window(cfg, ds, a, n_jobs) for a, _ in windows[1:]]
    for mdl, (a, b) in zip(models, windows):
        m = _members(mdl)[0]
        X, target_rows, names = _shap_inputs(m, ds)
        keep = (target_rows >= a) & (target_rows < b)
        sh = tree_shapley(m.forest, X[keep], dates=ds.dates[target_rows[keep]], names=names)
        pieces.append(sh)
        # window rule: rows after the training end up to the next training end
        win_idx.append((pos - 1, pos + int(keep.sum()) - 1))
        pos += int(keep.sum())
    shap = ShapleyMatrix(np.concatenate([p.dates for p in pieces]), pieces[0].names,
                         np.vstack([p.values for p in pieces]), pieces[0].baseline,
                         np.concatenate([p.prediction for p in pieces]))
    err = max(float(np.max(np.abs(p.baseline + p.values.sum(axis=1) - p.prediction)))
              for p in pieces)
    # baselines differ across windows, so the audit above runs window by window
    vi = vi_oos(shap, win_idx)
    groups = feature_groups(shap.names)
    gvi = {g: float(sum(vi[n] for n in mem)) for g, mem in groups.items()}
    m0 = _members(models[0])[0]
    X0, rows0, names0 = _shap_inputs(m0, ds)
    n_ins = int(np.sum(rows0 < ds.n_train))
    series = {nm: X0[:, j] for j, nm in enumerate(names0)}
    adj = vi_adjusted(vi, series, (0, n_ins), (n_ins, X0.shape[0]))
    gseries = {g: series[mem[0]] for g, mem in groups.items()}
    adj_g = vi_adjusted(gvi, gseries, (0, n_ins), (n_ins, X0.shape[0]), grouped=True)
    out.mkdir(parents=True, exist_ok=True)
    shap.to_csv(out / "shapley.csv")
    _json(out / "vi.json", {"vi": vi, "grouped": gvi, "adjusted": adj, "adjusted_grouped": adj_g,
                            "windows": len(windows), "local_accuracy_max_error": err})
    top_contributor_timeline(shap).to_csv(out / "timeline.csv")
    top_contributor_timeline(shap, groups).to_csv(out / "timeline_groups.csv")
    write_manifest(out)
    scale = 1.0 + float(np.max(np.abs(shap.prediction)))
    if not err <= 1e-8 * scale:
        raise AuditFailure(f"local accuracy violated: max error {err:.3e}")
    return EXIT_OK


# ---------------------------------------------------------------- report

COLUMNS = [("r2_oos", "R2oos"), ("r_annualized", "rA"), ("sharpe", "SR"), ("omega", "Omega"),
           ("max_drawdown", "DDmax")]


def render_report(metrics: dict, cost: str = "0.0"):
    header = ["strategy"] + [c for _, c in COLUMNS]
    rows = []
    for name, by_cost in metrics["strategies"].items():
        m = by_cost[cost]
        rows.append([name] + [m[k] for k, _ in COLUMNS])
    fmt = lambda v: "    -" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:8.3f}"  # noqa: E731
    lines = [f"{header[0]:<12}" + "".join(f"{h:>10}" for h in header[1:])]
    lines += [f"{r[0]:<12}" + "".join(f"{fmt(v):>10}" for v in r[1:]) for r in rows]
    return "\n".join(lines), header, rows


def cmd_report(run_dir: Path, cost: float) -> int:
    p = run_dir / "metrics.json"
    if not p.exists():
        raise FileNotFoundError(f"no metrics.json in {run_dir}")
    metrics = json.loads(p.read_text(encoding="utf-8"))
    key = repr(float(cost))
    available = sorted({c for by_cost in metrics["strategies"].values() for c in by_cost})
    if key not in available:
        raise C.ConfigError(f"no results at cost {key}; available: {available}")
    text, header, rows = render_report(metrics, key)
    print(text)
    (run_dir / "report.txt").write_text(text + "\n", encoding="utf-8")
    write_rows(run_dir / "report.csv", header, rows)
    write_manifest(run_dir)
    return EXIT_OK


# ---------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmlp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_model=False, model_optional=False):
        sp.add_argument("--config", help="YAML run configuration")
        sp.add_argument("--preset", choices=sorted(C.PRESETS))
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config value, e.g. mace.eta=0.05")
        sp.add_argument("--returns", help="returns CSV (overrides data.returns)")
        sp.add_argument("--features", help="features CSV (overrides data.features)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int, help="worker threads (default $MMLP_THREADS or 1)")
        sp.add_argument("--out", required=True, help="run directory")
        if needs_model or model_optional:
            sp.add_argument("--model", required=needs_model,
                            help="model artifact or the run directory holding model.json")

    common(sub.add_parser("fit", help="fit the model on the training window"))
    common(sub.add_parser("backtest", help="trade the test window"), needs_model=True)
    common(sub.add_parser("baseline", help="random-portfolio predictability baseline"),
           model_optional=True)
    common(sub.add_parser("shapley", help="attributions and variable importance"), needs_model=True)
    rp = sub.add_parser("report", help="render the metrics of a backtest run")
    rp.add_argument("run", help="backtest run directory")
    rp.add_argument("--cost", type=float, default=0.0)
    return p


def _resolve(args) -> dict:
    overrides = list(args.overrides)
    for flag, key in (("returns", "data.returns"), ("features", "data.features"), ("seed", "seed")):
        v = getattr(args, flag)
        if v is not None:
            overrides.append(f"{key}={Path(v).resolve() if flag != 'seed' else v}")
    return C.resolve(args.config, overrides, args.preset)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(Path(args.run), args.cost)
        cfg = _resolve(args)
        n_jobs = args.threads or default_threads()
        out = Path(args.out)
        if args.command == "fit":
            return cmd_fit(cfg, out, n_jobs)
        if args.command == "backtest":
            return cmd_backtest(cfg, args.model, out, n_jobs)
        if args.command == "baseline":
            return cmd_baseline(cfg, args.model, out, n_jobs)
        return cmd_shapley(cfg, args.model, out, n_jobs)
    except C.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ArtifactMismatch as exc:
        print(f"artifact mismatch: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except AuditFailure as exc:
        print(f"audit failed: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except (MaceError, RidgeError, BudgetError, MetricError, ValueError) as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
