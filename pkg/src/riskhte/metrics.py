"""Performance measures for benefit predictions.

RMSE against known true benefit, the rank-based c-statistic, c-for-benefit
on 1:1 matched patient pairs, and the loess-based integrated calibration
index for benefit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

LOESS_SPAN = 0.75
# above this many distinct evaluation points the smoother is fitted on a
# quantile grid of vertices and linearly interpolated
LOESS_DIRECT_MAX = 400
LOESS_VERTICES = 100


class UndefinedMetricError(ValueError):
    """The metric has no defined value for this input (e.g. a single class)."""


@dataclass(frozen=True)
class MatchedPairSet:
    observed: np.ndarray  # y_control - y_treated, in {-1, 0, 1}
    predicted: np.ndarray  # mean predicted benefit within the pair

    @property
    def n_pairs(self) -> int:
        return int(self.observed.shape[0])


def rmse(true_benefit, predicted_benefit) -> float:
    a = np.asarray(true_benefit, dtype=float)
    b = np.asarray(predicted_benefit, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("rmse of empty vectors")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def _concordant_weight(lower: np.ndarray, higher: np.ndarray) -> float:
    """Sum over (i in higher, j in lower) of 1[h_i > l_j] + 0.5 * 1[h_i == l_j]."""
    if lower.size == 0 or higher.size == 0:
        return 0.0
    less, eq = kernels.count_less_equal(np.sort(lower), higher)
    return float(less.sum()) + 0.5 * float(eq.sum())


def c_statistic(scores, labels) -> float:
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    pos, neg = s[y == 1], s[y == 0]
    if pos.size == 0 or neg.size == 0:
        raise UndefinedMetricError("c-statistic needs both outcome classes")
    return _concordant_weight(neg, pos) / (pos.size * neg.size)


def match_arms(z, y, predicted_benefit) -> MatchedPairSet:
    """Rank each arm by predicted benefit and match rank-for-rank.

    Ties in predicted benefit are broken by patient index (stable sort). With
    unequal arms the highest-ranked surplus patients of the larger arm stay
    unmatched.
    """
    z = np.asarray(z)
    y = np.asarray(y, dtype=float)
    pred = np.asarray(predicted_benefit, dtype=float)
    ctrl = np.flatnonzero(z == 0)
    trt = np.flatnonzero(z == 1)
    if ctrl.size == 0 or trt.size == 0:
        raise ValueError("matching needs patients in both arms")
    ctrl = ctrl[np.argsort(pred[ctrl], kind="stable")]
    trt = trt[np.argsort(pred[trt], kind="stable")]
    m = min(ctrl.size, trt.size)
    ctrl, trt = ctrl[:m], trt[:m]
    return MatchedPairSet(
        observed=y[ctrl] - y[trt],
        predicted=0.5 * (pred[ctrl] + pred[trt]),
    )


def match_pairs(population, predicted_benefit) -> MatchedPairSet:
    """:func:`match_arms` on a population's treatment and outcome vectors."""
    return match_arms(population.z, population.y, predicted_benefit)


def c_for_benefit(pairs: MatchedPairSet) -> float:
    """Concordance between observed and predicted benefit over pairs of pairs.

    Pairs of pairs with equal observed benefit are excluded; ties in
    predicted benefit count one half.
    """
    obs, pred = pairs.observed, pairs.predicted
    groups = [pred[obs == level] for level in (-1.0, 0.0, 1.0)]
    sizes = [g.size for g in groups]
    total = sizes[0] * sizes[1] + sizes[0] * sizes[2] + sizes[1] * sizes[2]
    if total == 0:
        raise UndefinedMetricError("all matched pairs have the same observed benefit")
    conc = 0.0
    for lo in range(3):
        for hi in range(lo + 1, 3):
            conc += _concordant_weight(groups[lo], groups[hi])
    return conc / total


def loess_smooth(x, y, x_eval, span: float = LOESS_SPAN) -> np.ndarray:
    """Local linear regression with tricube weights (no robustness passes).

    Each fit uses the ``floor(span * n)`` nearest neighbours. Evaluation is
    exact at up to ``LOESS_DIRECT_MAX`` distinct points; beyond that the
    smoother is computed at ``LOESS_VERTICES`` quantile vertices of ``x`` and
    interpolated linearly in between.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x_eval = np.asarray(x_eval, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y differ in length")
    if x.size < 10:
        raise ValueError("loess needs at least 10 points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("loess inputs must be finite")
    if not 0.0 < span <= 1.0:
        raise ValueError("span must lie in (0, 1]")
    if np.all(x[1:] >= x[:-1]):
        xs, ys = x, y
    else:
        order = np.argsort(x, kind="stable")
        xs, ys = x[order], y[order]
    q = max(int(np.floor(span * x.size)), 2)

    if x_eval.ndim == 1 and np.all(x_eval[1:] >= x_eval[:-1]):
        n_distinct = 1 + int(np.count_nonzero(np.diff(x_eval)))
    else:
        n_distinct = np.unique(x_eval).size
    if n_distinct <= LOESS_DIRECT_MAX:
        uniq, inverse = np.unique(x_eval, return_inverse=True)
        return kernels.loess_local_linear(xs, ys, uniq, q)[inverse].reshape(x_eval.shape)
    vertices = np.unique(np.quantile(xs, np.linspace(0.0, 1.0, LOESS_VERTICES)))
    fitted = kernels.loess_local_linear(xs, ys, vertices, q)
    return np.interp(x_eval, vertices, fitted)


def ici_for_benefit(pairs: MatchedPairSet, span: float = LOESS_SPAN) -> float:
    smoothed = loess_smooth(pairs.predicted, pairs.observed, pairs.predicted, span=span)
    return float(np.mean(np.abs(pairs.predicted - smoothed)))
