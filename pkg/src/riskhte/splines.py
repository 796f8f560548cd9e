"""Restricted cubic spline basis (truncated-power form, unnormalized).

Knots default to Harrell's quantile positions. Quantiles use linear
interpolation between order statistics (numpy's ``"linear"`` method, also
known as Hyndman-Fan type 7), so knot values are reproducible exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KNOT_QUANTILES = {
    3: (0.10, 0.50, 0.90),
    4: (0.05, 0.35, 0.65, 0.95),
    5: (0.05, 0.275, 0.50, 0.725, 0.95),
}


class DegenerateKnotsError(ValueError):
    pass


@dataclass(frozen=True)
class KnotSet:
    knots: tuple[float, ...]

    def __post_init__(self):
        t = np.asarray(self.knots, dtype=float)
        if not 3 <= t.size <= 5:
            raise DegenerateKnotsError(f"need 3 to 5 knots, got {t.size}")
        if not np.all(np.isfinite(t)):
            raise DegenerateKnotsError("knots must be finite")
        if np.any(np.diff(t) <= 0):
            raise DegenerateKnotsError(f"knots must be strictly increasing: {self.knots}")

    @property
    def k(self) -> int:
        return len(self.knots)


def place_knots(values, k: int) -> KnotSet:
    if k not in KNOT_QUANTILES:
        raise ValueError(f"k must be 3, 4 or 5, got {k}")
    v = np.asarray(values, dtype=float)
    if np.unique(v).size < k:
        raise DegenerateKnotsError(f"need at least {k} distinct values to place {k} knots")
    t = np.quantile(v, KNOT_QUANTILES[k], method="linear")
    return KnotSet(tuple(float(x) for x in t))


def rcs_basis(x, knots: KnotSet) -> np.ndarray:
    """Basis matrix of shape (len(x), k - 1); the first column is ``x`` itself.

    Column ``j + 1`` (j = 1..k-2) is
    ``(x-t_j)^3_+ - (x-t_{k-1})^3_+ (t_k-t_j)/(t_k-t_{k-1})
    + (x-t_k)^3_+ (t_{k-1}-t_j)/(t_k-t_{k-1})``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.asarray(knots.knots)
    k = t.size
    out = np.empty((x.size, k - 1))
    out[:, 0] = x
    tk, tk1 = t[-1], t[-2]
    den = tk - tk1

    def cube(u):
        u = np.maximum(u, 0.0)
        return u * u * u

    tail_a = cube(x - tk1)
    tail_b = cube(x - tk)
    for j in range(k - 2):
        tj = t[j]
        out[:, j + 1] = cube(x - tj) - tail_a * (tk - tj) / den + tail_b * (tk1 - tj) / den
    return out
