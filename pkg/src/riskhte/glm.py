"""Maximum-likelihood logistic regression by iteratively reweighted least squares."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit as _expit
from scipy.special import log_expit

MAX_ITER = 50
REL_LL_TOL = 1e-8
SCORE_TOL = 1e-6
RCOND_MIN = 1e-12
WEIGHT_FLOOR = 1e-10
SEPARATION_COEF = 30.0


class RankDeficientError(np.linalg.LinAlgError):
    """Weighted normal equations are singular (or numerically so)."""


@dataclass(frozen=True)
class LogisticFit:
    coefficients: np.ndarray
    log_likelihood: float
    converged: bool
    iterations: int
    separated: bool = False
    deviance_trace: tuple[float, ...] = field(default=(), repr=False)

    @property
    def n_params(self) -> int:
        return int(self.coefficients.shape[0])

    @property
    def aic(self) -> float:
        return 2.0 * self.n_params - 2.0 * self.log_likelihood


def expit(x):
    """Logistic function; stable for large |x|."""
    return _expit(x)


def logit(p):
    p = np.asarray(p, dtype=float)
    if np.any(~((p > 0.0) & (p < 1.0))):
        raise ValueError("logit is defined only on the open interval (0, 1)")
    out = np.log(p) - np.log1p(-p)
    return float(out) if out.ndim == 0 else out


def log_likelihood(eta: np.ndarray, y: np.ndarray) -> float:
    # y*log(p) + (1-y)*log(1-p) with log(1-p) = log_expit(-eta)
    return float(np.sum(y * log_expit(eta) + (1.0 - y) * log_expit(-eta)))


def _check_design(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError("design matrix must be two-dimensional")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"design has {X.shape[0]} rows but outcome has {y.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("design matrix contains non-finite entries")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("outcome must be binary (0/1)")
    if y.min() == y.max():
        raise ValueError("outcome has a single class; logistic MLE undefined")
    return X, y


def _rcond(H: np.ndarray) -> float:
    d = np.sqrt(np.diag(H))
    if np.any(d <= 0.0) or not np.all(np.isfinite(d)):
        return 0.0
    ev = np.linalg.eigvalsh(H / np.outer(d, d))
    return float(ev[0] / ev[-1]) if ev[-1] > 0 else 0.0


def fit_logistic(X, y, max_iter: int = MAX_ITER) -> LogisticFit:
    """Fit a logistic regression of ``y`` on the columns of ``X``.

    Newton-Raphson with step halving so the deviance never increases. Stops
    when the relative change in log-likelihood drops below 1e-8 or the score
    max-norm below 1e-6. Separated data do not raise; the returned fit carries
    ``separated=True`` and ``converged=False``.
    """
    X, y = _check_design(X, y)
    beta = np.zeros(X.shape[1])
    eta = np.zeros(X.shape[0])
    ll = log_likelihood(eta, y)
    trace = [-2.0 * ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = _expit(eta)
        w = np.maximum(p * (1.0 - p), WEIGHT_FLOOR)
        score = X.T @ (y - p)
        H = (X * w[:, None]).T @ X
        if _rcond(H) < RCOND_MIN:
            raise RankDeficientError("weighted normal equations are singular")
        try:
            step = np.linalg.solve(H, score)
        except np.linalg.LinAlgError as exc:
            raise RankDeficientError(str(exc)) from exc

        t = 1.0
        for _ in range(30):
            cand = beta + t * step
            eta_c = X @ cand
            ll_c = log_likelihood(eta_c, y)
            if ll_c >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        else:
            # no ascent direction left at machine precision
            cand, eta_c, ll_c = beta, eta, ll

        rel = abs(ll_c - ll) / (abs(ll) + 1e-300)
        beta, eta = cand, eta_c
        ll = max(ll, ll_c)
        trace.append(-2.0 * ll)
        if rel < REL_LL_TOL:
            converged = True
            break
        if np.max(np.abs(X.T @ (y - _expit(eta)))) < SCORE_TOL:
            converged = True
            break

    p = _expit(eta)
    separated = bool(
        np.any(np.abs(beta) > SEPARATION_COEF) or np.any(p * (1.0 - p) <= WEIGHT_FLOOR)
    )
    if separated:
        converged = False
    return LogisticFit(
        coefficients=beta,
        log_likelihood=ll,
        converged=converged,
        iterations=it,
        separated=separated,
        deviance_trace=tuple(trace),
    )


def predict_linear(fit: LogisticFit, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != fit.coefficients.shape[0]:
        raise ValueError(
            f"design has {X.shape[1]} columns, fit has {fit.coefficients.shape[0]} coefficients"
        )
    return X @ fit.coefficients


def score_vector(fit: LogisticFit, X, y) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X.T @ (np.asarray(y, dtype=float) - _expit(X @ fit.coefficients))
