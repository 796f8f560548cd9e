"""Pure-numpy versions of the compiled kernels in ``_kernels.pyx``.

Both modules expose the same functions with the same semantics; ``riskhte.kernels``
picks the compiled one when it is importable.
"""
import numpy as np


def _window_start(xs, x0, q):
    n = xs.shape[0]
    i = int(np.searchsorted(xs, x0))
    lo = max(0, i - q)
    hi = min(i, n - q)
    # smallest start whose left gap does not exceed the gap just past the window
    while lo < hi:
        mid = (lo + hi) // 2
        if x0 - xs[mid] <= xs[mid + q] - x0:
            hi = mid
        else:
            lo = mid + 1
    return lo


def loess_local_linear(xs, ys, x_eval, q):
    """Tricube-weighted local linear fit at each ``x_eval`` using the ``q``
    nearest neighbours among the sorted abscissae ``xs``."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    x_eval = np.ascontiguousarray(x_eval, dtype=np.float64)
    n = xs.shape[0]
    q = int(min(max(q, 1), n))
    out = np.empty(x_eval.shape[0])
    for e in range(x_eval.shape[0]):
        x0 = x_eval[e]
        lo = _window_start(xs, x0, q)
        h = max(x0 - xs[lo], xs[lo + q - 1] - x0)
        if h <= 0.0:
            a = np.searchsorted(xs, x0, side="left")
            b = np.searchsorted(xs, x0, side="right")
            out[e] = ys[a:b].mean()
            continue
        dx = xs[lo:lo + q] - x0
        u = np.abs(dx) / h
        w = np.where(u < 1.0, (1.0 - u ** 3) ** 3, 0.0)
        yw = ys[lo:lo + q]
        s0 = w.sum()
        s1 = w @ dx
        s2 = w @ (dx * dx)
        t0 = w @ yw
        t1 = w @ (dx * yw)
        det = s0 * s2 - s1 * s1
        if s2 <= 0.0 or det <= 1e-12 * s0 * s2:
            out[e] = t0 / s0
        else:
            out[e] = (s2 * t0 - s1 * t1) / det
    return out


def count_less_equal(ref_sorted, values):
    """For each value: (# ref entries strictly below, # ref entries equal)."""
    ref_sorted = np.asarray(ref_sorted, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    left = np.searchsorted(ref_sorted, values, side="left")
    right = np.searchsorted(ref_sorted, values, side="right")
    return left.astype(np.int64), (right - left).astype(np.int64)
