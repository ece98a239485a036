"""Run configuration: presets, YAML files and command-line overrides."""
from __future__ import annotations

import copy
from dataclasses import fields
from pathlib import Path

import yaml

from .forest import ForestConfig
from .mace import MaceConfig
from .ridge import RidgeConfig
from .trading import DAILY_COSTS, MONTHLY_COSTS, TradingConfig


class ConfigError(ValueError):
    pass


_DAILY = {
    "frequency": "daily",
    "seed": 0,
    "data": {"returns": None, "features": None, "benchmark": None, "risk_free": None,
             "subtract_risk_free": False, "missing": "reject", "feature_lags": 1,
             "difference": []},
    "split": {"schedule": "fixed", "train_end": None, "train_fraction": 0.75, "step": 3},
    "mace": {"eta": 0.01, "s_max": 250, "stopping": "early-oob", "mode": "endogenous",
             "init": "equal-weight", "horizon": 1, "xi": 0.0, "stochastic_weights": False,
             "n_lags": 21, "marx": True, "shrinkage": 0.1, "blend": "unit",
             "forest": {"n_trees": 1500, "mtry_fraction": 0.1, "min_node_size": 200,
                        "block_size": 42, "subsampling_rate": 0.8},
             "ridge": {"nonneg": False, "target_r2": 0.01, "intercept": True}},
    "bag": {"size": 1, "subsample": 0.7},
    "trading": {"gamma": 5.0, "lower": -1.0, "upper": 2.0, "vol_lookback": 252,
                "pm_lookback": 2520, "costs": list(DAILY_COSTS)},
    "baseline": {"n_random": 150, "nonneg": False},
    "slices": [],
}

PRESETS = {"daily-20": _DAILY}
PRESETS["daily-100"] = copy.deepcopy(_DAILY)
PRESETS["daily-100"]["mace"].update({"eta": 0.05, "s_max": 500})
PRESETS["monthly"] = copy.deepcopy(_DAILY)
PRESETS["monthly"].update({"frequency": "monthly"})
PRESETS["monthly"]["data"].update({"subtract_risk_free": True})
PRESETS["monthly"]["split"].update({"schedule": "expanding"})
PRESETS["monthly"]["mace"].update({
    "eta": 0.1, "s_max": 100, "stopping": "fixed", "mode": "exogenous", "xi": 1.0,
    "forest": {"n_trees": 500, "mtry_fraction": 1 / 3, "min_node_size": 20,
               "block_size": 24, "subsampling_rate": 0.8},
    "ridge": {"nonneg": True, "target_r2": 0.05, "intercept": True}})
PRESETS["monthly"]["trading"].update({"gamma": 3.0, "vol_lookback": 60, "pm_lookback": 240,
                                      "costs": list(MONTHLY_COSTS)})
PRESETS["monthly"]["baseline"].update({"nonneg": True})

PERIODS = {"daily": 252, "monthly": 12}


def deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(item: str) -> tuple:
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key.path=value")
    key, raw = item.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value in {item!r}: {exc}") from None
    return key.strip().split("."), value


def apply_override(cfg: dict, path: list, value):
    node = cfg
    for k in path[:-1]:
        if not isinstance(node.get(k), dict):
            raise ConfigError(f"unknown config section {'.'.join(path[:-1])!r}")
        node = node[k]
    if path[-1] not in node:
        raise ConfigError(f"unknown config key {'.'.join(path)!r}")
    node[path[-1]] = value


def _check_keys(cfg: dict, ref: dict, prefix=""):
    for k, v in cfg.items():
        if k == "preset":
            continue
        if k not in ref:
            raise ConfigError(f"unknown config key {prefix + k!r}")
        if isinstance(v, dict) and isinstance(ref[k], dict):
            _check_keys(v, ref[k], prefix + k + ".")


def resolve(path=None, overrides=(), preset=None) -> dict:
    """Preset, then file, then ``key=value`` overrides, later ones winning."""
    user = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"no such config file: {p}")
        try:
            user = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{p}: invalid YAML: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{p}: top level must be a mapping")
        # relative data paths are relative to the config file
        data = user.get("data") or {}
        for k in ("returns", "features"):
            if data.get(k) and not Path(data[k]).is_absolute():
                data[k] = str((p.parent / data[k]).resolve())
    name = preset or user.get("preset") or "daily-20"
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    _check_keys(user, PRESETS[name])
    cfg = deep_merge(PRESETS[name], user)
    cfg["preset"] = name
    for item in overrides:
        apply_override(cfg, *parse_override(item))
    validate(cfg)
    return cfg


def _build(cls, d: dict, what: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {what} settings: {exc}") from None


def mace_config(cfg: dict) -> MaceConfig:
    m = dict(cfg["mace"])
    forest = _build(ForestConfig, {**m.pop("forest"), "seed": int(cfg["seed"])}, "forest")
    ridge = _build(RidgeConfig, m.pop("ridge"), "ridge")
    bag = int(cfg["bag"]["size"])
    return _build(MaceConfig, {**m, "forest": forest, "ridge": ridge, "bag_size": bag,
                               "seed": int(cfg["seed"])}, "mace")


def trading_config(cfg: dict, cost: float = 0.0) -> TradingConfig:
    t = {k: v for k, v in cfg["trading"].items() if k != "costs"}
    return _build(TradingConfig, {**t, "cost": cost}, "trading")


def validate(cfg: dict):
    if cfg["frequency"] not in PERIODS:
        raise ConfigError("frequency must be 'daily' or 'monthly'")
    sp = cfg["split"]
    if sp["schedule"] not in ("fixed", "expanding"):
        raise ConfigError("split.schedule must be 'fixed' or 'expanding'")
    if int(sp["step"]) < 1:
        raise ConfigError("split.step must be >= 1")
    if sp["train_end"] is None and not 0 < float(sp["train_fraction"]) < 1:
        raise ConfigError("split.train_fraction must lie in (0, 1)")
    if cfg["data"]["missing"] not in ("reject", "truncate"):
        raise ConfigError("data.missing must be 'reject' or 'truncate'")
    if any(c < 0 for c in cfg["trading"]["costs"]):
        raise ConfigError("trading.costs must be >= 0")
    if int(cfg["baseline"]["n_random"]) < 1:
        raise ConfigError("baseline.n_random must be >= 1")
    mace_config(cfg)
    trading_config(cfg)


def dump(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True)
