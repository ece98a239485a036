"""Time the compiled kernels against the pure-numpy fallback.

Each backend runs in its own subprocess because the flag is read at import
time. The first call of every workload is reported separately as warm-up
(it includes JIT compilation under numba).

    python3 benchmarks/bench_kernels.py --repeat 3
"""
import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
from mmlp._jit import backend
from mmlp.forest import ForestConfig, fit_forest
from mmlp.interpret import tree_shapley
from mmlp.ridge import RidgeConfig, solve_ridge

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
X = rng.standard_normal((2000, 21))
y = np.sin(X[:, 0]) + 0.3 * X[:, 1] * X[:, 2] + rng.standard_normal(2000)
cfg = ForestConfig(n_trees=50, mtry_fraction=1 / 3, min_node_size=20, block_size=20, seed=0)
forest = fit_forest(X, y, cfg)
small = fit_forest(X, y, ForestConfig(n_trees=10, min_node_size=100, seed=0))
R = rng.standard_normal((3000, 40))
target = R @ np.abs(rng.standard_normal(40)) + rng.standard_normal(3000)

work = {
    "fit_forest": lambda: fit_forest(X, y, cfg),
    "predict": lambda: forest.predict(X),
    "predict_oob": lambda: forest.predict_oob(),
    "ridge_nonneg": lambda: solve_ridge(R, target, 10.0, RidgeConfig(nonneg=True)),
    "tree_shapley": lambda: tree_shapley(small, X[:200]),
}
out = {"backend": backend()}
for name, fn in work.items():
    t0 = time.perf_counter(); fn(); first = time.perf_counter() - t0
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter(); fn(); times.append(time.perf_counter() - t0)
    out[name] = {"first": first, "best": min(times)}
print(json.dumps(out))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ, MMLP_DISABLE_NUMBA="1" if disable else "0")
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    fast, slow = run(False, args.repeat), run(True, args.repeat)
    print(f"{'kernel':<14}{'numba s':>10}{'numpy s':>10}{'speed-up':>10}{'warm-up s':>11}")
    for name in fast:
        if name == "backend":
            continue
        a, b = fast[name]["best"], slow[name]["best"]
        print(f"{name:<14}{a:>10.4f}{b:>10.4f}{b / a:>9.1f}x{fast[name]['first']:>11.3f}")


if __name__ == "__main__":
    main()
