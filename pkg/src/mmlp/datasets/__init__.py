"""Synthetic datasets shipped with the package.

``daily.csv`` holds 1200 periods of 10 asset returns with a planted
mean-reverting portfolio. ``monthly_returns.csv`` and ``monthly_features.csv``
hold 480 months of 10 assets and 4 predictors. All are regenerated
bit-for-bit by :func:`write_bundled`.
"""
from __future__ import annotations

from pathlib import Path

from ..data import write_csv
from ..synthetic import bundled_panel, exogenous_panel

VERSION = 1
HERE = Path(__file__).resolve().parent
DAILY = HERE / "daily.csv"
MONTHLY_RETURNS = HERE / "monthly_returns.csv"
MONTHLY_FEATURES = HERE / "monthly_features.csv"


def write_bundled(directory) -> dict:
    """Write the three bundled CSVs into ``directory``; returns their paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    daily = bundled_panel().panel
    monthly = exogenous_panel(seed=11)
    out = {"daily": d / "daily.csv", "monthly_returns": d / "monthly_returns.csv",
           "monthly_features": d / "monthly_features.csv"}
    write_csv(out["daily"], daily.dates, daily.assets, daily.values)
    write_csv(out["monthly_returns"], monthly.panel.dates, monthly.panel.assets,
              monthly.panel.values)
    write_csv(out["monthly_features"], monthly.panel.dates, monthly.names, monthly.features)
    return out
