"""Shapley attributions for forest forecasts and the variable-importance sums built on them.

The value of a coalition S is the tree's prediction when features in S follow
the observation and all others are averaged out by training cover. For one
leaf that value factorises over the features on its path: a feature in S
contributes 1 if the observation satisfies all of that feature's splits
(else 0), a feature outside S contributes the product of its cover ratios.
Shapley values of such a product game have a closed form that only needs a
small polynomial per leaf, which is what the kernels below evaluate.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._jit import USE_NUMBA, njit
from .forest import Forest
from .forest._kernels import LEAF


@dataclass
class ShapleyMatrix:
    dates: np.ndarray
    names: tuple
    values: np.ndarray          # (T, K)
    baseline: float
    prediction: np.ndarray      # forest prediction, for the local-accuracy audit

    def local_accuracy_error(self) -> float:
        return float(np.max(np.abs(self.baseline + self.values.sum(axis=1) - self.prediction)))

    def rows(self, sl) -> "ShapleyMatrix":
        return ShapleyMatrix(self.dates[sl], self.names, self.values[sl], self.baseline,
                             self.prediction[sl])

    def to_csv(self, path):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["date", *self.names])
            for d, row in zip(self.dates.tolist(), self.values):
                w.writerow([d, *(repr(float(v)) for v in row)])


@dataclass(frozen=True)
class LeafPaths:
    """Per-leaf path summaries, flattened across all trees of a forest."""

    tree: np.ndarray      # (L,) tree index of each leaf
    value: np.ndarray     # (L,) leaf mean
    start: np.ndarray     # (L + 1,) offsets into the per-feature arrays
    feature: np.ndarray   # unique features on each path
    cover: np.ndarray     # product of cover ratios of that feature's splits
    lo: np.ndarray        # the observation must satisfy lo < x <= hi
    hi: np.ndarray


def leaf_paths(forest: Forest) -> LeafPaths:
    tree_ids, values, starts = [], [], [0]
    feats, covers, los, his = [], [], [], []
    F, thr, left, right, cnt = (forest.feature, forest.threshold, forest.left,
                                forest.right, forest.count)
    for j, root in enumerate(forest.roots.tolist()):
        stack = [(root, {})]
        while stack:
            node, path = stack.pop()
            if F[node] == LEAF:
                tree_ids.append(j)
                values.append(forest.value[node])
                for f in sorted(path):
                    c, lo, hi = path[f]
                    feats.append(f)
                    covers.append(c)
                    los.append(lo)
                    his.append(hi)
                starts.append(len(feats))
                continue
            f = int(F[node])
            c, lo, hi = path.get(f, (1.0, -math.inf, math.inf))
            n = cnt[node]
            for child, new_lo, new_hi in ((left[node], lo, min(hi, thr[node])),
                                          (right[node], max(lo, thr[node]), hi)):
                p = dict(path)
                p[f] = (c * cnt[child] / n, new_lo, new_hi)
                stack.append((child, p))
    return LeafPaths(np.asarray(tree_ids, dtype=np.int64), np.asarray(values, dtype=float),
                     np.asarray(starts, dtype=np.int64), np.asarray(feats, dtype=np.int64),
                     np.asarray(covers, dtype=float), np.asarray(los, dtype=float),
                     np.asarray(his, dtype=float))


def shapley_weights(max_d: int) -> np.ndarray:
    """``W[d, k] = k! (d - k - 1)! / d!`` for coalitions of size k out of d players."""
    W = np.zeros((max_d + 1, max_d + 1))
    for d in range(1, max_d + 1):
        for k in range(d):
            W[d, k] = math.exp(math.lgamma(k + 1) + math.lgamma(d - k) - math.lgamma(d + 1))
    return W


@njit
def _shap_loops(X, value, start, feature, cover, lo, hi, W, n_features):
    n = X.shape[0]
    L = value.shape[0]
    out = np.zeros((n, n_features))
    o = np.empty(64)
    poly = np.empty(65)
    for t in range(n):
        for leaf in range(L):
            a = start[leaf]
            d = start[leaf + 1] - a
            if d == 0:
                continue
            for j in range(d):
                x = X[t, feature[a + j]]
                o[j] = 1.0 if (x > lo[a + j] and x <= hi[a + j]) else 0.0
            v = value[leaf]
            for i in range(d):
                diff = o[i] - cover[a + i]
                if diff == 0.0:
                    continue
                poly[0] = 1.0
                m = 0
                for j in range(d):
                    if j == i:
                        continue
                    zj = cover[a + j]
                    oj = o[j]
                    poly[m + 1] = poly[m] * oj
                    for k in range(m, 0, -1):
                        poly[k] = poly[k] * zj + poly[k - 1] * oj
                    poly[0] = poly[0] * zj
                    m += 1
                acc = 0.0
                for k in range(d):
                    acc += poly[k] * W[d, k]
                out[t, feature[a + i]] += v * diff * acc
    return out


def _shap_numpy(X, value, start, feature, cover, lo, hi, W, n_features):
    n = X.shape[0]
    out = np.zeros((n, n_features))
    for leaf in range(value.shape[0]):
        a, b = start[leaf], start[leaf + 1]
        d = b - a
        if d == 0:
            continue
        f = feature[a:b]
        xs = X[:, f]
        o = ((xs > lo[a:b]) & (xs <= hi[a:b])).astype(float)  # (n, d)
        z = cover[a:b]
        for i in range(d):
            poly = np.zeros((n, d))
            poly[:, 0] = 1.0
            m = 0
            for j in range(d):
                if j == i:
                    continue
                nxt = poly * z[j]
                nxt[:, 1:m + 2] += poly[:, :m + 1] * o[:, j:j + 1]
                poly = nxt
                m += 1
            acc = poly @ W[d, :d]
            out[:, f[i]] += value[leaf] * (o[:, i] - z[i]) * acc
    return out


_shap_kernel = _shap_loops if USE_NUMBA else _shap_numpy


def tree_shapley(forest: Forest, X, dates=None, names=None) -> ShapleyMatrix:
    """Exact path-dependent Shapley values of the forest's predictions.

    The baseline is the cover-weighted mean of every tree's leaves, i.e. the
    average of the trees' in-bag training means; baseline plus the row sum
    of attributions equals the forest prediction.
    """
    Xv = np.ascontiguousarray(getattr(X, "values", X), dtype=float)
    if Xv.ndim == 1:
        Xv = Xv[:, None]
    if Xv.shape[1] != forest.n_features:
        raise ValueError(f"expected {forest.n_features} feature columns, got {Xv.shape[1]}")
    paths = leaf_paths(forest)
    max_d = int(np.max(np.diff(paths.start), initial=0))
    if max_d > 63:
        raise ValueError("paths with more than 63 distinct features are not supported")
    W = shapley_weights(max(max_d, 1))
    phi = _shap_kernel(Xv, paths.value, paths.start, paths.feature, paths.cover,
                       paths.lo, paths.hi, W, forest.n_features) / forest.n_trees
    baseline = float(forest.value[forest.roots].mean())
    if dates is None:
        dates = getattr(X, "dates", np.arange(Xv.shape[0]))
    if names is None:
        names = getattr(X, "names", tuple(f"x{j}" for j in range(Xv.shape[1])))
    return ShapleyMatrix(np.asarray(dates), tuple(names), phi, baseline, forest.predict(Xv))


def coalition_value(forest: Forest, x, S) -> float:
    """Cover-weighted expected prediction when only features in ``S`` are known.

    A direct recursive evaluation, used to audit the fast kernels.
    """
    S = set(S)
    total = 0.0
    for j in range(forest.n_trees):
        tree = forest.tree(j)

        def rec(node):
            f = tree.feature[node]
            if f == LEAF:
                return tree.value[node]
            lft, rgt = tree.left[node], tree.right[node]
            if f in S:
                return rec(lft if x[f] <= tree.threshold[node] else rgt)
            n = tree.count[node]
            return (tree.count[lft] * rec(lft) + tree.count[rgt] * rec(rgt)) / n

        total += rec(0)
    return total / forest.n_trees


def _check_windows(windows):
    ws = sorted((int(a), int(b)) for a, b in windows)
    for a, b in ws:
        if b <= a:
            raise ValueError(f"empty window ({a}, {b}]")
    for (a0, b0), (a1, b1) in zip(ws, ws[1:]):
        if a1 < b0:
            raise ValueError("windows overlap")
    return ws


def _window_mask(T, windows):
    m = np.zeros(T, dtype=bool)
    for a, b in _check_windows(windows):
        if b >= T:
            raise ValueError("window extends past the attribution rows")
        m[a + 1:b + 1] = True
    return m


def vi_oos(shap, windows) -> dict:
    """Sum of |attribution| over each window's out-of-sample rows.

    ``windows`` holds ``(end_of_training, end_of_next_training)`` row
    indices; rows ``end_of_training + 1 .. end_of_next_training`` count.
    """
    vals = np.abs(shap.values[_window_mask(shap.values.shape[0], windows)])
    totals = vals.sum(axis=0)
    return dict(zip(shap.names, totals.tolist()))


def vi_grouped(shap, groups: dict, windows) -> dict:
    vi = vi_oos(shap, windows)
    out = {}
    for g, members in groups.items():
        unknown = [m for m in members if m not in vi]
        if unknown:
            raise KeyError(f"group {g!r} names unknown features {unknown}")
        out[g] = float(sum(vi[m] for m in members))
    return out


def moving_average(x, window: int) -> np.ndarray:
    """Trailing mean over full windows; the first ``window - 1`` entries are NaN."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape[0], np.nan)
    if x.shape[0] >= window:
        c = np.convolve(x, np.ones(window) / window, mode="valid")
        out[window - 1:] = c
    return out


def vi_adjusted(vi: dict, feature_series: dict, ins_range, oos_range, grouped: bool = False,
                ma_window: int = 12) -> dict:
    """Divide importance by the ratio of out-of-sample to in-sample std.

    ``feature_series`` maps each importance key to its underlying series;
    ranges are half-open ``(start, stop)`` row indices. Grouped importances
    use the std of the series' trailing moving average.
    """
    out = {}
    for name, v in vi.items():
        x = np.asarray(feature_series[name], dtype=float)
        if grouped:
            x = moving_average(x, ma_window)
        ins = x[slice(*ins_range)]
        oos = x[slice(*oos_range)]
        ins, oos = ins[np.isfinite(ins)], oos[np.isfinite(oos)]
        if ins.size < 2 or oos.size < 2:
            raise ValueError(f"range too short for {name!r}")
        s_ins = float(np.std(ins, ddof=1))
        if s_ins == 0:
            raise ValueError(f"zero in-sample std for {name!r}")
        out[name] = v / (float(np.std(oos, ddof=1)) / s_ins)
    return out


@dataclass
class Timeline:
    dates: np.ndarray
    top: list
    all_zero: np.ndarray

    def to_csv(self, path):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["date", "top", "all_zero"])
            for d, name, z in zip(self.dates.tolist(), self.top, self.all_zero):
                w.writerow([d, name, int(z)])


def top_contributor_timeline(shap, groups: dict | None = None) -> Timeline:
    """Per row, the feature (or group) with the largest absolute attribution.

    Ties go to the earliest feature or group; rows where everything is zero
    are flagged.
    """
    A = np.abs(shap.values)
    if groups:
        idx = {n: i for i, n in enumerate(shap.names)}
        labels = list(groups)
        A = np.column_stack([A[:, [idx[m] for m in groups[g]]].sum(axis=1) for g in labels])
    else:
        labels = list(shap.names)
    pick = np.argmax(A, axis=1)
    return Timeline(shap.dates, [labels[i] for i in pick], ~(A > 0).any(axis=1))


def vi_report(vi: dict, grouped: dict | None = None, adjusted: dict | None = None) -> str:
    return json.dumps({"vi": vi, "grouped": grouped or {}, "adjusted": adjusted or {}},
                      indent=2, sort_keys=True)
