"""Hot loops for tree growth and traversal.

Every kernel exists twice: a loop version compiled with numba and a
vectorised numpy version. Both consume the same pre-drawn randomness and
accumulate sums in the same order, so on a given input they grow the same
tree. ``mmlp._jit.USE_NUMBA`` picks which pair is exported.
"""
import numpy as np

from .._jit import USE_NUMBA, njit

LEAF = -1


def _threshold(lo, hi):
    thr = 0.5 * (lo + hi)
    # adjacent floats: the midpoint can round up onto hi
    if thr >= hi:
        thr = lo
    return thr


_threshold_jit = njit(_threshold)


@njit
def _grow_tree_loops(X, y, sample_idx, cand, min_leaf):
    n_total = sample_idx.shape[0]
    cap = cand.shape[0]
    mtry = cand.shape[1]
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, dtype=np.int64)
    right = np.full(cap, LEAF, dtype=np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap, dtype=np.int64)
    start = np.zeros(cap, dtype=np.int64)
    stop = np.zeros(cap, dtype=np.int64)

    idx = sample_idx.copy()
    buf = np.empty(n_total, dtype=np.int64)
    xs = np.empty(n_total)
    ys = np.empty(n_total)

    stack = np.empty(cap, dtype=np.int64)
    top = 0
    stack[top] = 0
    top += 1
    start[0] = 0
    stop[0] = n_total
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack[top]
        a = start[node]
        b = stop[node]
        n = b - a
        s = 0.0
        ymin = np.inf
        ymax = -np.inf
        for i in range(a, b):
            v = y[idx[i]]
            s += v
            if v < ymin:
                ymin = v
            if v > ymax:
                ymax = v
        value[node] = s / n
        count[node] = n
        if n < 2 * min_leaf or ymax <= ymin or n_nodes + 2 > cap:
            continue

        best_gain = -np.inf
        best_f = -1
        best_thr = 0.0
        for c in range(mtry):
            f = cand[node, c]
            for i in range(n):
                xs[i] = X[idx[a + i], f]
            order = np.argsort(xs[:n], kind="mergesort")
            sl = 0.0
            for i in range(n):
                ys[i] = y[idx[a + order[i]]]
            total = 0.0
            for i in range(n):
                total += ys[i]
            for i in range(1, n - min_leaf + 1):
                sl += ys[i - 1]
                if i < min_leaf:
                    continue
                lo = xs[order[i - 1]]
                hi = xs[order[i]]
                if lo < hi:
                    sr = total - sl
                    gain = sl * sl / i + sr * sr / (n - i)
                    if gain > best_gain:
                        best_gain = gain
                        best_f = f
                        best_thr = _threshold_jit(lo, hi)
        if best_f < 0:
            continue

        # stable partition of idx[a:b]
        nl = 0
        for i in range(a, b):
            if X[idx[i], best_f] <= best_thr:
                buf[nl] = idx[i]
                nl += 1
        k = nl
        for i in range(a, b):
            if X[idx[i], best_f] > best_thr:
                buf[k] = idx[i]
                k += 1
        for i in range(n):
            idx[a + i] = buf[i]

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lc
        right[node] = rc
        start[lc] = a
        stop[lc] = a + nl
        start[rc] = a + nl
        stop[rc] = b
        stack[top] = rc
        top += 1
        stack[top] = lc
        top += 1

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes],
            right[:n_nodes], value[:n_nodes], count[:n_nodes])


def _grow_tree_numpy(X, y, sample_idx, cand, min_leaf):
    cap = cand.shape[0]
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, dtype=np.int64)
    right = np.full(cap, LEAF, dtype=np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap, dtype=np.int64)

    rows = {0: np.asarray(sample_idx, dtype=np.int64)}
    stack = [0]
    n_nodes = 1
    while stack:
        node = stack.pop()
        idx = rows.pop(node)
        n = idx.shape[0]
        yn = y[idx]
        cs = np.cumsum(yn)
        value[node] = cs[-1] / n
        count[node] = n
        if n < 2 * min_leaf or yn.max() <= yn.min() or n_nodes + 2 > cap:
            continue

        best_gain = -np.inf
        best_f = -1
        best_thr = 0.0
        pos = np.arange(min_leaf, n - min_leaf + 1)
        for f in cand[node]:
            xn = X[idx, f]
            order = np.argsort(xn, kind="mergesort")
            xo = xn[order]
            cso = np.cumsum(y[idx[order]])
            total = cso[-1]
            sl = cso[pos - 1]
            sr = total - sl
            gain = sl * sl / pos + sr * sr / (n - pos)
            valid = xo[pos - 1] < xo[pos]
            if not valid.any():
                continue
            gain = np.where(valid, gain, -np.inf)
            j = int(np.argmax(gain))
            if gain[j] > best_gain:
                best_gain = gain[j]
                best_f = int(f)
                best_thr = _threshold(xo[pos[j] - 1], xo[pos[j]])
        if best_f < 0:
            continue
        goes_left = X[idx, best_f] <= best_thr
        lc, rc = n_nodes, n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lc
        right[node] = rc
        rows[lc] = idx[goes_left]
        rows[rc] = idx[~goes_left]
        stack.append(rc)
        stack.append(lc)

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes],
            right[:n_nodes], value[:n_nodes], count[:n_nodes])


@njit
def _leaf_values_loops(feature, threshold, left, right, value, roots, X):
    n_trees = roots.shape[0]
    n = X.shape[0]
    out = np.empty((n_trees, n))
    for j in range(n_trees):
        for t in range(n):
            node = roots[j]
            while feature[node] != LEAF:
                if X[t, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[j, t] = value[node]
    return out


def _leaf_values_numpy(feature, threshold, left, right, value, roots, X):
    n = X.shape[0]
    rows = np.arange(n)
    out = np.empty((roots.shape[0], n))
    for j, root in enumerate(roots):
        node = np.full(n, root, dtype=np.int64)
        active = feature[node] != LEAF
        while active.any():
            f = feature[node]
            fa = np.where(active, f, 0)
            go_left = X[rows, fa] <= threshold[node]
            nxt = np.where(go_left, left[node], right[node])
            node = np.where(active, nxt, node)
            active = feature[node] != LEAF
        out[j] = value[node]
    return out


if USE_NUMBA:
    grow_tree = _grow_tree_loops
    leaf_values = _leaf_values_loops
else:
    grow_tree = _grow_tree_numpy
    leaf_values = _leaf_values_numpy
