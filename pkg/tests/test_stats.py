import json

import numpy as np
import pytest

from mmlp.stats import (
    RankError, format_report, newey_west, newey_west_lags, ols, report_json,
    spanning_regression, stars,
)


def white_oracle(y, X):
    Z = np.column_stack([np.ones(len(y)), X])
    beta = np.linalg.lstsq(Z, y, rcond=None)[0]
    u = y - Z @ beta
    meat = sum(np.outer(Z[t], Z[t]) * u[t] ** 2 for t in range(len(y)))
    bread = np.linalg.inv(Z.T @ Z)
    return bread @ meat @ bread


def test_ols_matches_lstsq(rng):
    X = rng.standard_normal((200, 3))
    y = 0.5 + X @ [1.0, -2.0, 0.0] + rng.standard_normal(200)
    res = ols(y, X)
    Z = np.column_stack([np.ones(200), X])
    beta = np.linalg.lstsq(Z, y, rcond=None)[0]
    np.testing.assert_allclose(res.coefficients, beta, atol=1e-12)
    u = y - Z @ beta
    s2 = u @ u / (200 - 4)
    np.testing.assert_allclose(res.se, np.sqrt(np.diag(s2 * np.linalg.inv(Z.T @ Z))), rtol=1e-10)
    assert res.r2 == pytest.approx(1 - u @ u / np.sum((y - y.mean()) ** 2), abs=1e-12)
    assert res.names == ["const", "x1", "x2", "x3"]


def test_hac_with_zero_lags_is_white(rng):
    X = rng.standard_normal((150, 2))
    y = X[:, 0] + (1 + np.abs(X[:, 1])) * rng.standard_normal(150)
    res = ols(y, X, hac_lags=0)
    np.testing.assert_allclose(newey_west(res, X, 0), white_oracle(y, X), atol=1e-10)
    np.testing.assert_allclose(res.hac_se, np.sqrt(np.diag(white_oracle(y, X))), atol=1e-10)


def test_hac_is_symmetric_psd(rng):
    X = rng.standard_normal((300, 3))
    y = rng.standard_normal(300)
    res = ols(y, X)
    for L in (1, 5, 20):
        V = newey_west(res, X, L)
        np.testing.assert_array_equal(V, V.T)
        assert np.linalg.eigvalsh(V).min() >= -1e-10


def test_lag_rule():
    assert newey_west_lags(100) == 4
    assert newey_west_lags(10000) == 11


def test_rank_deficiency(rng):
    X = rng.standard_normal((50, 2))
    with pytest.raises(RankError):
        ols(rng.standard_normal(50), np.column_stack([X, X[:, 0]]))
    with pytest.raises(RankError):
        ols(rng.standard_normal(3), rng.standard_normal((3, 3)))


def test_stars():
    assert [stars(p) for p in (0.001, 0.03, 0.07, 0.5)] == ["***", "**", "*", ""]


def test_spanning_report(rng):
    F = rng.standard_normal((120, 2))
    r = 0.3 + F @ [0.5, 0.1] + rng.standard_normal(120)
    res = spanning_regression(r, F, names=["mkt", "smb"])
    rep = json.loads(report_json(res))
    assert [t["name"] for t in rep["terms"]] == ["const", "mkt", "smb"]
    assert rep["terms"][0]["stars"] == "***"
    assert "R2" in format_report(res)
