import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskhte import metrics
from riskhte.metrics import (
    MatchedPairSet,
    UndefinedMetricError,
    c_for_benefit,
    c_statistic,
    ici_for_benefit,
    loess_smooth,
    match_arms,
    rmse,
)


# ---------------------------------------------------------------- oracles

def brute_c_statistic(scores, labels):
    num = den = 0.0
    for s_i, y_i in zip(scores, labels):
        for s_j, y_j in zip(scores, labels):
            if y_i == 1 and y_j == 0:
                den += 1
                num += 1.0 if s_i > s_j else 0.5 if s_i == s_j else 0.0
    return num / den


def brute_c_for_benefit(observed, predicted):
    num = den = 0.0
    for (o1, p1), (o2, p2) in itertools.combinations(zip(observed, predicted), 2):
        if o1 == o2:
            continue
        den += 1
        if p1 == p2:
            num += 0.5
        elif (p1 > p2) == (o1 > o2):
            num += 1
    return num / den


def brute_loess(x, y, x0, span=0.75):
    # weighted least squares over all points with tricube weights scaled by
    # the q-th smallest distance
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    q = max(int(math.floor(span * x.size)), 2)
    d = np.abs(x - x0)
    h = np.sort(d)[q - 1]
    if h == 0:
        return y[x == x0].mean()
    u = d / h
    w = np.where(u < 1, (1 - u**3) ** 3, 0.0)
    if np.unique(x[w > 0]).size < 2:
        # no slope is identifiable: weighted mean
        return float(w @ y / w.sum())
    A = np.column_stack([np.ones_like(x), x - x0]) * np.sqrt(w)[:, None]
    coef, *_ = np.linalg.lstsq(A, y * np.sqrt(w), rcond=None)
    return coef[0]


# ------------------------------------------------------------------- rmse

def test_rmse_examples():
    assert rmse([0.3, 0.1], [0.3, 0.1]) == 0.0
    assert rmse([0.1, 0.3], [0.2, 0.2]) == pytest.approx(0.1, abs=1e-15)
    with pytest.raises(ValueError):
        rmse([1.0, 2.0], [1.0])


@given(st.lists(st.tuples(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6)), min_size=1, max_size=50))
def test_rmse_nonnegative_zero_iff_equal(pairs):
    a, b = (np.array(v) / 1e6 for v in zip(*pairs))
    r = rmse(a, b)
    assert r >= 0
    assert (r == 0) == bool(np.all(a == b))


# ------------------------------------------------------------ c-statistic

def test_c_statistic_examples():
    assert c_statistic([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert c_statistic(np.full(6, 0.4), [0, 1, 0, 1, 1, 0]) == 0.5
    with pytest.raises(UndefinedMetricError):
        c_statistic([0.1, 0.2], [1, 1])


def test_c_statistic_matches_all_pairs_on_50_points():
    rng = np.random.default_rng(50)
    s = np.round(rng.standard_normal(50), 1)  # rounding forces ties
    y = (rng.random(50) < 0.4).astype(int)
    assert c_statistic(s, y) == pytest.approx(brute_c_statistic(s, y), abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(
    data=st.lists(st.tuples(st.integers(-5, 5), st.booleans()), min_size=2, max_size=60).filter(
        lambda d: len({y for _, y in d}) == 2
    )
)
def test_c_statistic_property_oracle_and_monotone_invariance(data):
    s, y = map(np.array, zip(*data))
    s = s.astype(float)
    y = y.astype(int)
    c = c_statistic(s, y)
    assert c == pytest.approx(brute_c_statistic(s, y), abs=1e-12)
    assert c_statistic(s**3 + s, y) == c


# -------------------------------------------------------------- matching

def test_single_pair():
    pairs = match_arms([0, 1], [1, 0], [0.3, 0.1])
    assert pairs.n_pairs == 1
    assert pairs.observed.tolist() == [1.0]
    assert pairs.predicted.tolist() == [pytest.approx(0.2)]


def test_unequal_arms_drop_top_of_larger_arm():
    z = np.array([0, 0, 0, 0, 0, 1, 1, 1])
    pred = np.array([0.5, 0.1, 0.4, 0.2, 0.3, 0.05, 0.25, 0.15])
    y = np.array([1, 0, 1, 0, 0, 0, 1, 0])
    pairs = match_arms(z, y, pred)
    assert pairs.n_pairs == 3
    # control ranks 0.1, 0.2, 0.3 (0.4, 0.5 dropped); treated 0.05, 0.15, 0.25
    np.testing.assert_allclose(pairs.predicted, [0.075, 0.175, 0.275])
    np.testing.assert_array_equal(pairs.observed, [0 - 0, 0 - 0, 0 - 1])


def test_four_versus_four_by_hand():
    z = [1, 0, 1, 0, 0, 1, 0, 1]
    pred = [0.4, 0.3, 0.1, 0.1, 0.2, 0.3, 0.4, 0.2]
    y = [0, 1, 1, 0, 1, 1, 1, 0]
    pairs = match_arms(z, y, pred)
    # control sorted: idx3(0.1,y0) idx4(0.2,y1) idx1(0.3,y1) idx6(0.4,y1)
    # treated sorted: idx2(0.1,y1) idx7(0.2,y0) idx5(0.3,y1) idx0(0.4,y0)
    np.testing.assert_array_equal(pairs.observed, [-1, 1, 0, 1])
    np.testing.assert_allclose(pairs.predicted, [0.1, 0.2, 0.3, 0.4])


def test_matching_ties_broken_by_patient_index():
    z = [0, 0, 1, 1]
    y = [1, 0, 0, 0]
    pairs = match_arms(z, y, [0.2, 0.2, 0.2, 0.2])
    np.testing.assert_array_equal(pairs.observed, [1, 0])


def test_matching_requires_both_arms():
    with pytest.raises(ValueError):
        match_arms([0, 0], [0, 1], [0.1, 0.2])


# -------------------------------------------------------- c-for-benefit

def test_c_for_benefit_constant_predictions():
    pairs = MatchedPairSet(np.array([1.0, 0.0, -1.0, 1.0]), np.full(4, 0.03))
    assert c_for_benefit(pairs) == 0.5


def test_c_for_benefit_undefined():
    with pytest.raises(UndefinedMetricError):
        c_for_benefit(MatchedPairSet(np.zeros(5), np.arange(5.0)))


def test_c_for_benefit_matches_double_loop_on_30_pairs():
    rng = np.random.default_rng(30)
    obs = rng.choice([-1.0, 0.0, 1.0], 30, p=[0.15, 0.7, 0.15])
    pred = np.round(rng.normal(0.03, 0.02, 30), 2)
    got = c_for_benefit(MatchedPairSet(obs, pred))
    assert got == pytest.approx(brute_c_for_benefit(obs, pred), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    data=st.lists(
        st.tuples(st.sampled_from([-1.0, 0.0, 1.0]), st.integers(-20, 20)), min_size=2, max_size=200
    ).filter(lambda d: len({o for o, _ in d}) > 1)
)
def test_c_for_benefit_grouped_equals_brute_force(data):
    obs, p = map(np.array, zip(*data))
    pred = p / 100.0
    got = c_for_benefit(MatchedPairSet(obs, pred))
    assert got == pytest.approx(brute_c_for_benefit(obs, pred), abs=1e-12)
    assert c_for_benefit(MatchedPairSet(obs, pred**3 + pred)) == got


# ----------------------------------------------------------------- loess

def test_loess_reproduces_lines():
    x = np.linspace(-2, 3, 57)
    y = 0.4 - 1.3 * x
    np.testing.assert_allclose(loess_smooth(x, y, x[5:-5]), y[5:-5], atol=1e-6)


def test_loess_quadratic_interior_error():
    x = np.linspace(0, 1, 200)
    interior = (x > 0.1) & (x < 0.9)
    fit = loess_smooth(x, x**2, x)
    oracle = np.array([brute_loess(x, x**2, x0) for x0 in x])
    np.testing.assert_allclose(fit, oracle, atol=1e-10)
    # span 0.75 carries a smoothing bias of about 0.02-0.026 on a unit-curvature quadratic
    assert np.max(np.abs(fit[interior] - x[interior] ** 2)) < 0.03
    narrow = loess_smooth(x, x**2, x, span=0.3)
    assert np.max(np.abs(narrow[interior] - x[interior] ** 2)) < 0.01


def test_loess_constant_input():
    x = np.random.default_rng(0).random(40)
    np.testing.assert_allclose(loess_smooth(x, np.full(40, 2.5), x), 2.5, atol=1e-12)


def test_loess_tied_abscissae_fall_back_to_local_mean():
    x = np.r_[np.zeros(30), np.ones(3)]
    y = np.r_[np.arange(30.0), np.zeros(3)]
    assert loess_smooth(x, y, [0.0])[0] == pytest.approx(np.arange(30.0).mean())


def test_loess_rejects_small_or_bad_input():
    with pytest.raises(ValueError):
        loess_smooth(np.arange(5.0), np.arange(5.0), [1.0])
    with pytest.raises(ValueError):
        loess_smooth(np.r_[np.arange(11.0), np.nan], np.arange(12.0), [1.0])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(10, 120), span=st.floats(0.2, 1.0))
def test_loess_matches_weighted_least_squares(seed, n, span):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    y = np.sin(x) + 0.3 * rng.standard_normal(n)
    x_eval = np.r_[x[:7], rng.uniform(x.min(), x.max(), 5)]
    got = loess_smooth(x, y, x_eval, span=span)
    want = [brute_loess(x, y, x0, span) for x0 in x_eval]
    np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-9)


def test_loess_vertex_interpolation_close_to_exact():
    rng = np.random.default_rng(9)
    x = rng.standard_normal(5000)
    y = (rng.random(5000) < 1 / (1 + np.exp(-x))).astype(float)
    approx = loess_smooth(x, y, x)
    sample = rng.choice(5000, 25, replace=False)
    exact = [brute_loess(x, y, x[i]) for i in sample]
    np.testing.assert_allclose(approx[sample], exact, atol=2e-3)


# ------------------------------------------------------------------- ICI

def test_ici_zero_when_observed_equals_predicted_linear():
    pred = np.linspace(-0.5, 0.5, 101)
    assert ici_for_benefit(MatchedPairSet(pred.copy(), pred)) == pytest.approx(0.0, abs=1e-6)


def test_ici_small_for_calibrated_pairs():
    rng = np.random.default_rng(12)
    m = 100_000
    p_ctrl = rng.uniform(0.05, 0.6, m)
    p_trt = p_ctrl * 0.8
    obs = (rng.random(m) < p_ctrl).astype(float) - (rng.random(m) < p_trt).astype(float)
    ici = ici_for_benefit(MatchedPairSet(obs, p_ctrl - p_trt))
    assert 0 <= ici < 0.01


def test_ici_nonnegative_on_noise():
    rng = np.random.default_rng(1)
    pairs = MatchedPairSet(rng.choice([-1.0, 0.0, 1.0], 300), rng.normal(0, 0.05, 300))
    assert ici_for_benefit(pairs) >= 0


def test_match_pairs_uses_population_fields():
    class Pop:
        z = np.array([0, 1, 0, 1])
        y = np.array([1, 0, 0, 0])

    pairs = metrics.match_pairs(Pop, np.array([0.1, 0.2, 0.3, 0.4]))
    np.testing.assert_array_equal(pairs.observed, [1, 0])
