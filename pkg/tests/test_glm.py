import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskhte.glm import (
    LogisticFit,
    RankDeficientError,
    expit,
    fit_logistic,
    log_likelihood,
    logit,
    predict_linear,
    score_vector,
)


def _design(n, rng, k=2):
    return np.column_stack([np.ones(n), rng.standard_normal((n, k - 1))])


def test_intercept_only_matches_closed_form():
    y = np.array([1] * 20 + [0] * 80)
    fit = fit_logistic(np.ones((100, 1)), y)
    assert fit.converged
    assert fit.coefficients[0] == pytest.approx(np.log(0.2 / 0.8), abs=1e-6)


def test_recovers_generating_coefficients():
    rng = np.random.default_rng(11)
    n = 100_000
    beta = np.array([-2.08] + [0.49] * 8)
    x = np.hstack([rng.standard_normal((n, 4)), (rng.random((n, 4)) < 0.2).astype(float)])
    X = np.column_stack([np.ones(n), x])
    y = (rng.random(n) < expit(X @ beta)).astype(float)
    fit = fit_logistic(X, y)
    assert fit.converged
    np.testing.assert_allclose(fit.coefficients, beta, atol=0.05)


def test_separated_data_flagged_not_raised():
    x = np.array([-3.0, -2.0, -1.0, 1.0, 2.0, 3.0])
    y = (x > 0).astype(float)
    fit = fit_logistic(np.column_stack([np.ones(6), x]), y)
    assert fit.separated
    assert not fit.converged


def test_collinear_design_raises():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(50)
    X = np.column_stack([np.ones(50), x, 2 * x])
    y = (rng.random(50) < 0.5).astype(float)
    y[:2] = [0, 1]
    with pytest.raises(RankDeficientError):
        fit_logistic(X, y)


@pytest.mark.parametrize(
    "y, msg",
    [(np.zeros(10), "single class"), (np.array([0, 1, 2, 0, 1, 0, 1, 0, 1, 1]), "binary")],
)
def test_bad_outcomes(y, msg):
    with pytest.raises(ValueError, match=msg):
        fit_logistic(np.ones((10, 1)), y)


def test_row_mismatch():
    with pytest.raises(ValueError, match="rows"):
        fit_logistic(np.ones((5, 1)), np.array([0, 1, 0, 1]))


def test_predict_linear_examples():
    zero = LogisticFit(np.zeros(3), 0.0, True, 1)
    assert np.all(predict_linear(zero, np.ones((4, 3))) == 0)
    fit = LogisticFit(np.array([0.7, -1.0, 3.0]), 0.0, True, 1)
    assert predict_linear(fit, np.array([1.0, 0.0, 0.0]))[0] == 0.7
    base = LogisticFit(np.array([-2.08] + [0.49] * 8), 0.0, True, 1)
    assert predict_linear(base, np.r_[1.0, np.zeros(8)])[0] == pytest.approx(-2.08)
    with pytest.raises(ValueError, match="columns"):
        predict_linear(fit, np.ones((2, 4)))


def test_logit_expit_roundtrip_and_domain():
    p = np.linspace(0.01, 0.99, 50)
    np.testing.assert_allclose(expit(logit(p)), p, rtol=1e-12)
    with pytest.raises(ValueError):
        logit(1.0)


def test_aic_identity():
    rng = np.random.default_rng(5)
    X = _design(300, rng, 3)
    y = (rng.random(300) < 0.3).astype(float)
    fit = fit_logistic(X, y)
    assert fit.aic == 2 * 3 - 2 * fit.log_likelihood
    assert fit.log_likelihood == pytest.approx(log_likelihood(X @ fit.coefficients, y), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(30, 400),
    k=st.integers(1, 5),
    slope=st.floats(-2, 2),
)
def test_score_vanishes_and_deviance_monotone(seed, n, k, slope):
    rng = np.random.default_rng(seed)
    X = _design(n, rng, k)
    y = (rng.random(n) < expit(-0.5 + slope * X[:, -1])).astype(float)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    try:
        fit = fit_logistic(X, y)
    except RankDeficientError:
        return
    trace = np.array(fit.deviance_trace)
    assert np.all(np.diff(trace) <= 1e-9 * trace[:-1])
    if fit.converged:
        assert np.max(np.abs(score_vector(fit, X, y))) <= 1e-4


def _grid_best(X, y, step=0.01, lo=-6.0, hi=6.0):
    grid = np.arange(lo, hi + step / 2, step)
    best = -np.inf
    if X.shape[1] == 1:
        eta = grid[:, None] * X[:, 0][None, :]
        return float(np.max((y * -np.logaddexp(0, -eta) + (1 - y) * -np.logaddexp(0, eta)).sum(1)))
    for b0 in grid:
        eta = b0 * X[:, 0][None, :] + grid[:, None] * X[:, 1][None, :]
        ll = (y * -np.logaddexp(0, -eta) + (1 - y) * -np.logaddexp(0, eta)).sum(1)
        best = max(best, float(ll.max()))
    return best


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.sampled_from([1, 2]))
def test_fit_beats_brute_force_grid(seed, k):
    rng = np.random.default_rng(seed)
    n = 40
    X = _design(n, rng, k)
    y = (rng.random(n) < expit(0.3 - 0.8 * X[:, -1])).astype(float)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    fit = fit_logistic(X, y)
    if fit.separated:
        return
    assert fit.log_likelihood >= _grid_best(X, y) - 1e-6
