import json

import numpy as np
import pytest

from conftest import run_python

WORKLOAD = """
import json
import numpy as np
from mmlp._jit import backend
from mmlp.forest import ForestConfig, fit_forest
from mmlp.interpret import tree_shapley
from mmlp.ridge import RidgeConfig, solve_ridge

rng = np.random.default_rng(0)
X = rng.standard_normal((300, 5))
y = np.sin(X[:, 0]) + X[:, 1] * X[:, 2] + 0.2 * rng.standard_normal(300)
f = fit_forest(X, y, ForestConfig(n_trees=10, min_node_size=8, block_size=10, seed=1))
oob, cov = f.predict_oob()
shap = tree_shapley(f, X[:50])
R = rng.standard_normal((200, 6))
w = solve_ridge(R, R @ rng.standard_normal(6) + rng.standard_normal(200), 3.0,
                RidgeConfig(nonneg=True)).w
print(json.dumps({
    "backend": backend(),
    "feature": f.feature.tolist(),
    "threshold": f.threshold.tolist(),
    "predict": f.predict(X).tolist(),
    "oob": np.nan_to_num(oob).tolist(),
    "shap": shap.values.tolist(),
    "ridge": w.tolist(),
}))
"""


@pytest.fixture(scope="module")
def outputs():
    return {flag: json.loads(run_python(WORKLOAD, flag)) for flag in (False, True)}


def test_backend_flag_is_honoured(outputs):
    assert outputs[False]["backend"] == "numba"
    assert outputs[True]["backend"] == "numpy"


def test_trees_identical(outputs):
    a, b = outputs[False], outputs[True]
    assert a["feature"] == b["feature"]
    np.testing.assert_allclose(a["threshold"], b["threshold"], rtol=0, atol=1e-12)


@pytest.mark.parametrize("key", ["predict", "oob", "shap", "ridge"])
def test_outputs_agree(outputs, key):
    np.testing.assert_allclose(outputs[False][key], outputs[True][key], rtol=1e-9, atol=1e-10)
