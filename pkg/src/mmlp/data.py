"""Return panels, feature matrices and the lag/MARX/difference builders."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Malformed input data; ``row``/``column`` locate the offending cell."""

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.row = row
        self.column = column


class MalformedDateError(DataError):
    pass


class NonNumericCellError(DataError):
    pass


class DuplicateDateError(DataError):
    pass


class UnsortedDatesError(DataError):
    pass


class MissingValueError(DataError):
    pass


class TooFewAssetsError(DataError):
    pass


@dataclass(frozen=True)
class ReturnsPanel:
    dates: np.ndarray
    assets: tuple
    values: np.ndarray
    dropped_rows: int = field(default=0, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", np.asarray(self.dates))
        object.__setattr__(self, "assets", tuple(self.assets))
        if values.ndim != 2:
            raise DataError("returns must be a T x N matrix")
        T, N = values.shape
        if N < 2:
            raise TooFewAssetsError(f"need at least 2 assets, got {N}")
        if T < 2:
            raise DataError(f"need at least 2 periods, got {T}")
        if len(self.assets) != N or len(self.dates) != T:
            raise DataError("dates/assets do not match the value matrix")
        _check_increasing(self.dates)
        if not np.isfinite(values).all():
            t, j = np.argwhere(~np.isfinite(values))[0]
            raise MissingValueError("non-finite return", row=int(t), column=self.assets[j])

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def rows(self, sl) -> "ReturnsPanel":
        return ReturnsPanel(self.dates[sl], self.assets, self.values[sl])

    def select(self, assets) -> "ReturnsPanel":
        idx = [self.assets.index(a) for a in assets]
        return ReturnsPanel(self.dates, [self.assets[i] for i in idx], self.values[:, idx])


@dataclass(frozen=True)
class FeatureMatrix:
    dates: np.ndarray
    names: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", np.asarray(self.dates))
        object.__setattr__(self, "names", tuple(self.names))
        if values.shape != (len(self.dates), len(self.names)):
            raise DataError("feature matrix shape does not match dates/names")
        if not np.isfinite(values).all():
            raise DataError("features must be finite")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Horizon:
    h: int = 1

    def __post_init__(self):
        if int(self.h) != self.h or self.h < 1:
            raise ValueError("horizon must be a positive integer")


def _check_increasing(dates):
    if len(dates) < 2:
        return
    d = np.asarray(dates)
    prev = d[:-1]
    nxt = d[1:]
    dup = np.flatnonzero(prev == nxt)
    if dup.size:
        raise DuplicateDateError(f"duplicate date {d[dup[0] + 1]!r}", row=int(dup[0]) + 1)
    bad = np.flatnonzero(~(prev < nxt))
    if bad.size:
        raise UnsortedDatesError("dates not increasing", row=int(bad[0]) + 1)


def _parse_date(token: str, row: int):
    token = token.strip()
    if not token:
        raise MalformedDateError("empty date", row=row, column="date")
    # dates are opaque ordered tokens; integers order numerically, ISO strings lexically
    if token.lstrip("-").isdigit():
        return int(token)
    if not any(ch.isdigit() for ch in token):
        raise MalformedDateError(f"malformed date {token!r}", row=row, column="date")
    return token


def _read_csv_table(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if not header or header[0].lower() != "date":
            raise DataError("first column must be named 'date'", row=0)
        columns = header[1:]
        dates, rows = [], []
        for i, rec in enumerate(reader, start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"expected {len(header)} fields, got {len(rec)}", row=i)
            dates.append(_parse_date(rec[0], i))
            vals = []
            for name, cell in zip(columns, rec[1:]):
                cell = cell.strip()
                if cell == "" or cell.lower() in {"na", "nan", "null"}:
                    vals.append(math.nan)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise NonNumericCellError(f"non-numeric cell {cell!r}",
                                              row=i, column=name) from None
            rows.append(vals)
    kinds = {type(d) for d in dates}
    if len(kinds) > 1:
        raise MalformedDateError("mixed date formats")
    return np.asarray(dates), columns, np.asarray(rows, dtype=float).reshape(len(rows), len(columns))


def _apply_missing_policy(dates, columns, values, policy):
    bad = ~np.isfinite(values)
    if not bad.any():
        return dates, values, 0
    if policy == "reject":
        t, j = np.argwhere(bad)[0]
        raise MissingValueError("missing or non-finite cell", row=int(t) + 1,
                                column=columns[j])
    if policy == "truncate":
        last_bad = int(np.flatnonzero(bad.any(axis=1))[-1])
        keep = slice(last_bad + 1, None)
        return dates[keep], values[keep], last_bad + 1
    raise ValueError(f"unknown missing-data policy {policy!r}")


def load_returns_csv(path, missing: str = "reject", columns=None) -> ReturnsPanel:
    """Read a ``date,asset1,asset2,...`` CSV of decimal returns.

    ``missing="truncate"`` keeps the longest suffix of complete rows; the
    number of dropped rows is reported in ``panel.dropped_rows``.
    """
    dates, names, values = _read_csv_table(path)
    if columns is not None:
        missing_cols = [c for c in columns if c not in names]
        if missing_cols:
            raise DataError(f"columns not in file: {missing_cols}")
        idx = [names.index(c) for c in columns]
        names, values = list(columns), values[:, idx]
    if len(names) < 2:
        raise TooFewAssetsError(f"need at least 2 assets, got {len(names)}")
    _check_increasing(dates)
    dates, values, dropped = _apply_missing_policy(dates, names, values, missing)
    return ReturnsPanel(dates, names, values, dropped_rows=dropped)


def load_features_csv(path, missing: str = "reject", columns=None) -> FeatureMatrix:
    dates, names, values = _read_csv_table(path)
    if columns is not None:
        idx = [names.index(c) for c in columns]
        names, values = list(columns), values[:, idx]
    _check_increasing(dates)
    dates, values, _ = _apply_missing_policy(dates, names, values, missing)
    return FeatureMatrix(dates, names, values)


def write_csv(path, dates, names, values):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", *names])
        for d, row in zip(dates, values):
            w.writerow([d, *(repr(float(v)) for v in row)])


def build_lags(series, max_lag: int, dates=None, first_lag: int = 1, name: str = "x") -> FeatureMatrix:
    """Lag matrix whose column ``p`` at row ``t`` is ``series[t - p]``.

    Rows start at ``t = max_lag`` so the output has ``T - max_lag`` rows.
    With ``first_lag=0`` the columns are lags ``0 .. max_lag - 1`` instead.
    """
    x = np.asarray(series, dtype=float)
    T = x.shape[0]
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if T <= max_lag:
        raise ValueError(f"series of length {T} is too short for {max_lag} lags")
    lags = range(first_lag, first_lag + max_lag)
    trim = max_lag + first_lag - 1
    cols = [x[trim - p:T - p] for p in lags]
    if dates is None:
        dates = np.arange(T)
    return FeatureMatrix(np.asarray(dates)[trim:], [f"{name}_lag{p}" for p in lags],
                         np.column_stack(cols))


def marx_transform(lags: FeatureMatrix) -> FeatureMatrix:
    """Moving averages of increasing length over the lag columns.

    Column ``p`` of the output is the mean of lag columns ``1..p``.
    """
    L = lags.values
    out = np.cumsum(L, axis=1) / np.arange(1, L.shape[1] + 1)
    names = [f"marx{p}" if "_lag" not in n else n.replace("_lag", "_marx")
             for p, n in enumerate(lags.names, start=1)]
    return FeatureMatrix(lags.dates, names, out)


def marx_inverse(marx: np.ndarray) -> np.ndarray:
    """Recover the lag columns from their MARX rotation."""
    M = np.asarray(marx, dtype=float)
    S = M * np.arange(1, M.shape[1] + 1)
    L = S.copy()
    L[:, 1:] = S[:, 1:] - S[:, :-1]
    return L


def marx_features(series, max_lag: int, dates=None, name: str = "z") -> FeatureMatrix:
    return marx_transform(build_lags(series, max_lag, dates=dates, name=name))


def first_difference(series) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if x.shape[0] < 2:
        raise ValueError("need at least 2 observations to difference")
    return x[1:] - x[:-1]


def lagged_feature_block(features: FeatureMatrix, n_lags: int, difference=()) -> FeatureMatrix:
    """Lags ``0..n_lags-1`` of every column, optionally first-differencing some.

    Differenced and undifferenced columns are trimmed to a common date axis.
    Each row only uses values dated at or before it.
    """
    cols, names = [], []
    diff = set(difference)
    unknown = diff - set(features.names)
    if unknown:
        raise DataError(f"unknown columns to difference: {sorted(unknown)}")
    start = 1 if diff else 0
    for j, nm in enumerate(features.names):
        x = features.values[:, j]
        x = np.concatenate([[np.nan], first_difference(x)]) if nm in diff else x
        block = build_lags(x[start:], n_lags, first_lag=0, name=nm)
        cols.append(block.values)
        names.extend(block.names)
    dates = features.dates[start + n_lags - 1:]
    return FeatureMatrix(dates, names, np.column_stack(cols))


def align(features: FeatureMatrix, panel: ReturnsPanel, horizon: Horizon | int = 1):
    """Pair feature rows dated ``t`` with return rows ``h`` periods later.

    Returns ``(X, R, target_dates)``; dates must be a common ordered axis.
    """
    h = horizon.h if isinstance(horizon, Horizon) else int(horizon)
    pos = {d: i for i, d in enumerate(panel.dates.tolist())}
    xi, ri = [], []
    for i, d in enumerate(features.dates.tolist()):
        j = pos.get(d)
        if j is not None and j + h < panel.T:
            xi.append(i)
            ri.append(j + h)
    if not xi:
        raise DataError("features and returns share no aligned dates")
    return features.values[xi], panel.values[ri], panel.dates[ri]


def feature_groups(names) -> dict:
    """Group lagged feature names by their source column (``col_lagP`` -> ``col``)."""
    groups: dict = {}
    for n in names:
        base = n.rsplit("_lag", 1)[0] if "_lag" in n else n.rsplit("_marx", 1)[0]
        groups.setdefault(base, []).append(n)
    return groups
