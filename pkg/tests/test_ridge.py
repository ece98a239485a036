import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmlp.ridge import (
    BudgetError, RidgeConfig, RidgeError, calibrate_lambda, normalize_variance, r2_of,
    rescale_budget, solve_ridge,
)

FREE = RidgeConfig(nonneg=False)
FREE0 = RidgeConfig(nonneg=False, intercept=False)
POS = RidgeConfig(nonneg=True)


def closed_form(R, y, lam, intercept=True, k=None):
    k = np.ones(len(y)) if k is None else k
    if intercept:
        R = R - k @ R / k.sum()
        y = y - k @ y / k.sum()
    A = R.T @ (R * k[:, None]) + lam * np.eye(R.shape[1])
    return np.linalg.solve(A, R.T @ (k * y))


def projected_gradient(R, y, lam, intercept=True, iters=200_000):
    if intercept:
        R = R - R.mean(axis=0)
        y = y - y.mean()
    G = R.T @ R + lam * np.eye(R.shape[1])
    b = R.T @ y
    step = 1.0 / np.linalg.eigvalsh(G).max()
    w = np.zeros(R.shape[1])
    for _ in range(iters):
        w_new = np.maximum(w - step * (G @ w - b), 0.0)
        if np.max(np.abs(w_new - w)) < 1e-15:
            break
        w = w_new
    return w


def objective(R, y, w, lam, intercept=True):
    if intercept:
        R = R - R.mean(axis=0)
        y = y - y.mean()
    e = y - R @ w
    return e @ e + lam * w @ w


def test_univariate_exact():
    r = np.array([0.1, -0.2, 0.3, 0.05])
    fit = solve_ridge(r[:, None], 2 * r, 0.0, FREE0)
    np.testing.assert_allclose(fit.w, [2.0], atol=1e-14)


def test_unconstrained_matches_closed_form(rng):
    R = rng.standard_normal((80, 5))
    y = R @ rng.standard_normal(5) + rng.standard_normal(80)
    for lam in (0.0, 0.3, 50.0):
        np.testing.assert_allclose(solve_ridge(R, y, lam, FREE).w, closed_form(R, y, lam),
                                   atol=1e-8)
        np.testing.assert_allclose(solve_ridge(R, y, lam, FREE0).w,
                                   closed_form(R, y, lam, intercept=False), atol=1e-8)


def test_observation_weights_equal_row_duplication(rng):
    R = rng.standard_normal((30, 3))
    y = rng.standard_normal(30)
    k = rng.integers(1, 4, 30).astype(float)
    dup = np.repeat(np.arange(30), k.astype(int))
    for cfg in (FREE, POS):
        a = solve_ridge(R, y, 2.0, cfg, obs_weights=k).w
        b = solve_ridge(R[dup], y[dup], 2.0, cfg).w
        np.testing.assert_allclose(a, b, atol=1e-9)


def test_huge_penalty_shrinks_to_zero(rng):
    R = rng.standard_normal((100, 4))
    y = rng.standard_normal(100)
    assert np.linalg.norm(solve_ridge(R, y, 1e12, FREE).w) < 1e-6
    assert np.linalg.norm(solve_ridge(R, y, 1e12, POS).w) < 1e-6


def test_nonneg_matches_projected_gradient_oracle():
    r = np.random.default_rng(7)
    R = r.standard_normal((50, 3))
    y = R @ np.array([1.0, -1.0, 0.5]) + 0.3 * r.standard_normal(50)
    fit = solve_ridge(R, y, 0.5, POS)
    w_ref = projected_gradient(R, y, 0.5)
    assert objective(R, y, fit.w, 0.5) == pytest.approx(objective(R, y, w_ref, 0.5), abs=1e-6)
    assert fit.w[1] == 0.0
    assert np.all(fit.w >= 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(1e-3, 1e3))
def test_nonneg_kkt_and_descent(seed, lam):
    r = np.random.default_rng(seed)
    R = r.standard_normal((60, 6))
    y = R @ r.standard_normal(6) + r.standard_normal(60)
    fit = solve_ridge(R, y, lam, POS)
    assert fit.kkt_residual <= 1e-6
    assert np.all(fit.w >= 0)
    assert fit.objective <= objective(R, y, np.zeros(6), lam) + 1e-9


def test_lambda_zero_collinear_rejected(rng):
    R = rng.standard_normal((40, 2))
    R = np.column_stack([R, R[:, 0]])
    with pytest.raises(RidgeError):
        solve_ridge(R, rng.standard_normal(40), 0.0, FREE)


def test_bad_inputs(rng):
    R = rng.standard_normal((10, 2))
    with pytest.raises(RidgeError):
        solve_ridge(R, np.zeros(9), 1.0, FREE)
    with pytest.raises(RidgeError):
        solve_ridge(R, np.zeros(10), -1.0, FREE)
    with pytest.raises(RidgeError):
        solve_ridge(R, np.zeros(10), 1.0, FREE, obs_weights=-np.ones(10))


@pytest.mark.parametrize("nonneg", [False, True])
def test_calibration_hits_target(rng, nonneg):
    R = rng.standard_normal((300, 8))
    y = R @ np.abs(rng.standard_normal(8))
    cfg = RidgeConfig(nonneg=nonneg, target_r2=0.05)
    fit = calibrate_lambda(R, y, cfg)
    assert not fit.unattainable
    assert fit.r2 == pytest.approx(0.05, abs=1e-3)
    # recomputed independently from the returned weights
    assert r2_of(R, y, fit.w) == pytest.approx(0.05, abs=1e-3)
    assert 1e-8 < fit.lam < 1e12


def test_calibration_flags_unattainable_target(rng):
    R = rng.standard_normal((500, 3))
    Q, _ = np.linalg.qr(np.column_stack([np.ones(500), R]))
    noise = rng.standard_normal(500)
    noise -= Q @ (Q.T @ noise)  # orthogonal to every column and the intercept
    fit = calibrate_lambda(R, noise, RidgeConfig(nonneg=False, target_r2=0.05))
    assert fit.unattainable
    assert fit.lam == 1e-8


def test_calibration_rejects_flat_target(rng):
    with pytest.raises(RidgeError):
        calibrate_lambda(rng.standard_normal((20, 2)), np.ones(20))


def test_normalize_variance(rng):
    R = rng.standard_normal((200, 4))
    w = np.array([1.0, 2.0, -1.0, 0.5])
    out = normalize_variance(w, R)
    assert np.var(R @ out.w, ddof=1) == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(normalize_variance(out.w, R).w, out.w, atol=1e-12)
    assert np.all(np.sign(out.w) == np.sign(w))
    with pytest.raises(RidgeError):
        normalize_variance(np.zeros(4), R)


def test_normalize_halves_weights_when_std_is_two():
    x = np.array([1.0, -1.0, 1.0, -1.0])
    R = np.column_stack([x / np.std(x, ddof=1), np.zeros(4)])
    out = normalize_variance([2.0, 0.0], R)
    np.testing.assert_allclose(out.w, [1.0, 0.0], atol=1e-15)
    assert out.scale_applied == pytest.approx(0.5)


def test_rescale_budget():
    np.testing.assert_allclose(rescale_budget([1.0, 1.0, 2.0]).w, [0.25, 0.25, 0.5])
    np.testing.assert_allclose(rescale_budget([0.2, 0.8]).w, [0.2, 0.8])
    with pytest.raises(BudgetError):
        rescale_budget([1.0, -1.0])
