import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmlp.forest import ForestConfig
from mmlp.metrics import (
    MetricError, SliceSpec, annualized_return, ar1_hac, evaluate, lag_features_fn,
    max_drawdown, omega, oos_r2, pred_corr, random_baseline, random_weights, sharpe, slice_r2,
)
from mmlp.synthetic import null_panel


def drawdown_oracle(r):
    Y = np.concatenate([[0.0], np.cumsum(np.log1p(r))])
    return max(Y[i] - Y[j] for i in range(len(Y)) for j in range(i, len(Y)))


def omega_oracle(r, theta):
    up = sum(x - theta for x in r if x > theta)
    down = sum(theta - x for x in r if x < theta)
    return up / down


def test_oos_r2_examples(rng):
    y = rng.standard_normal(30)
    pm = np.full(30, 0.1)
    assert oos_r2(y, pm, pm) == 0.0
    assert oos_r2(y, y, 0.1) == 1.0
    yhat = rng.standard_normal(30)
    ref = 1 - sum((a - b) ** 2 for a, b in zip(y, yhat)) / sum((a - 0.1) ** 2 for a in y)
    assert oos_r2(y, yhat, 0.1) == pytest.approx(ref, abs=1e-12)
    with pytest.raises(MetricError):
        oos_r2(np.ones(3), np.zeros(3), 1.0)


def test_sharpe_and_return():
    r = np.array([0.011, -0.009] * 50)  # mean 0.001
    sd = np.std(r, ddof=1)
    assert sharpe(r, 252) == pytest.approx(0.001 / sd * math.sqrt(252), abs=1e-12)
    assert annualized_return(r, 252) == pytest.approx(0.252, abs=1e-12)
    assert sharpe(-r, 252) == pytest.approx(-sharpe(r, 252))
    assert annualized_return(-r, 12) == pytest.approx(-annualized_return(r, 12))
    with pytest.raises(MetricError):
        sharpe(np.full(10, 0.01), 252)
    assert sharpe(r, 252, risk_free=np.full(100, 0.001)) == pytest.approx(0.0, abs=1e-9)


def test_sharpe_textbook_value():
    # mean 0.001 and std 0.01 daily gives 0.1 * sqrt(252)
    base = np.random.default_rng(0).standard_normal(1000)
    r = 0.001 + 0.01 * (base - base.mean()) / base.std(ddof=1)
    assert sharpe(r, 252) == pytest.approx(1.5874507866387544, abs=1e-12)


def test_omega_examples():
    assert omega([0.03, -0.01], 0.01) == pytest.approx(1.0)
    assert omega([0.01 + 2, 0.01 - 1], 0.01) == pytest.approx(2.0)
    assert omega([0.05, 0.06], 0.01) == math.inf
    r = np.random.default_rng(1).standard_normal(100)
    assert omega(r, 0.1) == pytest.approx(omega_oracle(r, 0.1), abs=1e-12)
    assert omega(r, 0.2) <= omega(r, 0.1)


def test_max_drawdown_examples():
    assert max_drawdown([0.01, 0.02, 0.0]) == 0.0
    assert max_drawdown([0.10, -0.50]) == pytest.approx(math.log(2), abs=1e-15)
    with pytest.raises(MetricError):
        max_drawdown([0.1, -1.0])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_max_drawdown_matches_quadratic_oracle(seed):
    r = 0.03 * np.random.default_rng(seed).standard_normal(200)
    dd = max_drawdown(r)
    assert dd == pytest.approx(drawdown_oracle(r), abs=1e-12)
    # a new high at the end changes nothing
    assert max_drawdown(np.append(r, 10.0)) == dd


def test_slices(rng):
    y, yhat = rng.standard_normal(40), rng.standard_normal(40)
    full = SliceSpec("all", ((0, 39),))
    covid = SliceSpec("covid", ((10, 19),))
    rest = SliceSpec("rest", ((10, 19),), exclude=True)
    out = slice_r2(y, yhat, 0.0, [full, covid, rest])
    assert out["all"] == pytest.approx(oos_r2(y, yhat, 0.0), abs=1e-15)
    m = covid.mask(np.arange(40))
    sse = lambda a, b: float(np.sum((a - b) ** 2))  # noqa: E731
    assert sse(y[m], yhat[m]) + sse(y[~m], yhat[~m]) == pytest.approx(sse(y, yhat), abs=1e-12)
    one = slice_r2(y, yhat, 0.0, [SliceSpec("one", ((5, 5),))])
    assert np.isfinite(one["one"])
    with pytest.raises(MetricError):
        slice_r2(y, yhat, 0.0, [SliceSpec("none", ((100, 200),))])


@pytest.mark.parametrize("phi", [-0.45, 0.0])
def test_ar1_diagnostic(phi):
    rng = np.random.default_rng(3)
    x = np.zeros(10000)
    e = rng.standard_normal(10000)
    for t in range(1, 10000):
        x[t] = phi * x[t - 1] + e[t]
    res = ar1_hac(x)
    assert abs(res.coefficient - phi) <= 3 * res.hac_se
    assert res.lags == 11
    with pytest.raises(MetricError):
        ar1_hac(np.ones(20))


def test_pred_corr():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    assert pred_corr(a, -a) == pytest.approx(-1.0)
    with pytest.raises(MetricError):
        pred_corr(a, np.ones(4))


def test_evaluate_bundle_is_pure(rng):
    r = 0.01 * rng.standard_normal(100)
    y = rng.standard_normal(100)
    a = evaluate(r, y, y * 0.1, 0.0, 252, 0.0)
    b = evaluate(r, y, y * 0.1, 0.0, 252, 0.0)
    assert a.to_json() == b.to_json()
    d = json.loads(a.to_json())
    assert set(d) >= {"r2_oos", "r_annualized", "sharpe", "omega", "max_drawdown",
                      "kurtosis", "skewness", "periods_per_year", "r2_by_slice"}
    flat = evaluate(np.full(10, 0.01), np.ones(10), np.ones(10), 0.0, 12, 0.0)
    assert flat.omega_infinite and flat.to_dict()["omega"] is None
    assert math.isnan(flat.sharpe)


def test_random_weights():
    rng = np.random.default_rng(0)
    w = random_weights(7, True, rng)
    assert np.all(w >= 0) and w.sum() == pytest.approx(1.0)
    assert np.any(random_weights(7, False, rng) < 0)


def test_random_baseline_is_seeded_and_null_centred():
    R = null_panel(N=5, T=600, seed=4).values
    fc = ForestConfig(n_trees=20, min_node_size=30, block_size=20)
    kw = dict(n_random=9, nonneg=True, forest_config=fc, features_fn=lag_features_fn(4))
    a = random_baseline(R[:450], R[450:], seed=1, **kw)
    b = random_baseline(R[:450], R[450:], seed=1, **kw)
    np.testing.assert_array_equal(a.r2(), b.r2())
    assert len(a.r2("stock")) == 5
    assert a.median_random <= 0
    top = a.top_in_sample()
    assert top.r2_ins == max(d.r2_ins for d in a.draws if d.kind == "random")
    assert 0 <= a.percentile_of(0.0) <= 1
