"""Regression forest grown on contiguous time blocks.

Each tree sees a without-replacement sample of whole blocks, so the trees that
skipped an observation's block also skipped its serially correlated
neighbours. Those trees give the block out-of-bag prediction.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._kernels import LEAF, grow_tree, leaf_values


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 500
    mtry_fraction: float = 1 / 3
    min_node_size: int = 5
    block_size: int = 1
    subsampling_rate: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 0 < self.mtry_fraction <= 1:
            raise ValueError("mtry_fraction must lie in (0, 1]")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if not 0 < self.subsampling_rate < 1:
            raise ValueError("subsampling_rate must lie in (0, 1)")

    def mtry(self, n_features: int) -> int:
        return max(1, math.ceil(self.mtry_fraction * n_features - 1e-9))


@dataclass(frozen=True)
class Tree:
    """Read-only view of one fitted tree; leaves carry ``feature == -1``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    trained_blocks: frozenset

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature == LEAF

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf each row of ``X`` lands in."""
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[0], dtype=np.int64)
        for t in range(X.shape[0]):
            node = 0
            while self.feature[node] != LEAF:
                if X[t, self.feature[node]] <= self.threshold[node]:
                    node = self.left[node]
                else:
                    node = self.right[node]
            out[t] = node
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def block_assignment(n_obs: int, block_size: int) -> np.ndarray:
    """Contiguous, non-overlapping blocks; a shorter last block is kept as is."""
    return np.arange(n_obs) // block_size


@dataclass
class Forest:
    config: ForestConfig
    n_obs: int
    n_features: int
    # packed node arrays; child indices are global into these arrays
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    roots: np.ndarray
    inbag_blocks: np.ndarray  # (n_trees, n_blocks) bool
    _train_X: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def n_trees(self) -> int:
        return int(self.roots.shape[0])

    @property
    def blocks(self) -> np.ndarray:
        return block_assignment(self.n_obs, self.config.block_size)

    @property
    def n_blocks(self) -> int:
        return int(self.inbag_blocks.shape[1])

    def tree(self, j: int) -> Tree:
        lo = int(self.roots[j])
        hi = int(self.roots[j + 1]) if j + 1 < self.n_trees else self.feature.shape[0]
        sl = slice(lo, hi)

        def local(a):
            a = a[sl].copy()
            a[a != LEAF] -= lo
            return a

        return Tree(
            feature=self.feature[sl].copy(),
            threshold=self.threshold[sl].copy(),
            left=local(self.left),
            right=local(self.right),
            value=self.value[sl].copy(),
            count=self.count[sl].copy(),
            trained_blocks=frozenset(np.flatnonzero(self.inbag_blocks[j]).tolist()),
        )

    def leaf_values(self, X: np.ndarray) -> np.ndarray:
        """Per-tree predictions, shape ``(n_trees, n_rows)``."""
        X = _check_X(X, self.n_features)
        return leaf_values(self.feature, self.threshold, self.left, self.right,
                           self.value, self.roots, X)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.leaf_values(X).mean(axis=0)

    def predict_oob(self, X: np.ndarray | None = None):
        """Block out-of-bag predictions on the training rows.

        Returns ``(prediction, coverage)``. Rows no tree left out get NaN and
        coverage 0; the caller decides how to fill them.
        """
        if X is None:
            X = self._train_X
        if X is None:
            raise ValueError("training features are not attached to this forest")
        X = _check_X(X, self.n_features)
        if X.shape[0] != self.n_obs:
            raise ValueError("OOB prediction needs the training rows")
        per_tree = self.leaf_values(X)
        oob = ~self.inbag_blocks[:, self.blocks]  # (n_trees, n_obs)
        coverage = oob.sum(axis=0)
        total = np.where(oob, per_tree, 0.0).sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            pred = np.where(coverage > 0, total / np.maximum(coverage, 1), np.nan)
        return pred, coverage

    def oob_rmse(self, y: np.ndarray, X: np.ndarray | None = None) -> float:
        pred, coverage = self.predict_oob(X)
        return oob_rmse_from(pred, coverage, y)

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "n_obs": self.n_obs,
            "n_features": self.n_features,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "count": self.count.tolist(),
            "roots": self.roots.tolist(),
            "inbag_blocks": self.inbag_blocks.astype(np.uint8).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Forest":
        return cls(
            config=ForestConfig(**d["config"]),
            n_obs=int(d["n_obs"]),
            n_features=int(d["n_features"]),
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=float),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=float),
            count=np.asarray(d["count"], dtype=np.int64),
            roots=np.asarray(d["roots"], dtype=np.int64),
            inbag_blocks=np.asarray(d["inbag_blocks"], dtype=bool).reshape(
                len(d["roots"]), -1),
        )


def oob_rmse_from(pred: np.ndarray, coverage: np.ndarray, y: np.ndarray) -> float:
    covered = coverage > 0
    if not covered.any():
        raise ValueError("no row has out-of-bag coverage")
    err = pred[covered] - np.asarray(y, dtype=float)[covered]
    return float(np.sqrt(np.mean(err * err)))


def _check_X(X, n_features=None) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} feature columns, got {X.shape[1]}")
    return X


def _grow_one(X, y, n_blocks, blocks, config, mtry, seed_seq):
    rng = np.random.default_rng(seed_seq)
    m = min(n_blocks, max(1, math.ceil(config.subsampling_rate * n_blocks - 1e-9)))
    chosen = rng.choice(n_blocks, size=m, replace=False)
    inbag = np.zeros(n_blocks, dtype=bool)
    inbag[chosen] = True
    sample_idx = np.flatnonzero(inbag[blocks]).astype(np.int64)
    n = sample_idx.shape[0]
    cap = 2 * (n // config.min_node_size) + 1
    K = X.shape[1]
    if mtry < K:
        keys = rng.random((cap, K))
        cand = np.sort(np.argsort(keys, axis=1, kind="stable")[:, :mtry], axis=1)
    else:
        cand = np.broadcast_to(np.arange(K), (cap, K))
    cand = np.ascontiguousarray(cand, dtype=np.int64)
    nodes = grow_tree(X, y, sample_idx, cand, config.min_node_size)
    return nodes, inbag


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("MMLP_THREADS", "1")))
    except ValueError:
        return 1


def fit_forest(X, y, config: ForestConfig, n_jobs: int | None = None) -> Forest:
    """Grow ``config.n_trees`` CART trees on block subsamples.

    Trees draw their own RNG streams from ``SeedSequence(config.seed)``, so
    the result does not depend on ``n_jobs`` or on thread scheduling.
    """
    X = _check_X(X)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n_obs, K = X.shape
    if y.shape != (n_obs,):
        raise ValueError("X and y must have the same number of rows")
    if n_obs < 2 * config.min_node_size:
        raise ValueError(
            f"need at least {2 * config.min_node_size} rows, got {n_obs}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("X and y must be finite")

    blocks = block_assignment(n_obs, config.block_size)
    n_blocks = int(blocks[-1]) + 1
    mtry = config.mtry(K)
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_trees)

    def job(ss):
        return _grow_one(X, y, n_blocks, blocks, config, mtry, ss)

    n_jobs = n_jobs or default_threads()
    if n_jobs > 1 and config.n_trees > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(job, seeds))
    else:
        results = [job(ss) for ss in seeds]

    sizes = [r[0][0].shape[0] for r in results]
    roots = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    parts = list(zip(*(r[0] for r in results)))
    feature, threshold, left, right, value, count = (np.concatenate(p) for p in parts)
    for j, off in enumerate(roots):
        sl = slice(off, off + sizes[j])
        for arr in (left, right):
            seg = arr[sl]
            seg[seg != LEAF] += off
    inbag = np.stack([r[1] for r in results])
    return Forest(config=config, n_obs=n_obs, n_features=K, feature=feature,
                  threshold=threshold, left=left, right=right, value=value,
                  count=count, roots=roots, inbag_blocks=inbag, _train_X=X)


def predict(forest: Forest, X) -> np.ndarray:
    return forest.predict(X)


def predict_oob(forest: Forest, X=None):
    return forest.predict_oob(X)


def oob_rmse(forest: Forest, y, X=None) -> float:
    return forest.oob_rmse(y, X)
