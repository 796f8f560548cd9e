"""Risk-based benefit models.

Every method is two-stage: a logistic risk model with main effects for all
covariates and treatment gives a baseline-risk linear predictor ``lp0_hat``
(treatment set to 0), and the benefit model is then built on ``lp0_hat``
alone.

Design columns of the second stage:

* constant      ``1, lp, z``
* linear        ``1, lp, z, z*lp``
* rcs-k         ``1, lp, z, z*h_1(lp), ..., z*h_{k-1}(lp)`` with ``h_1(lp) = lp``
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .glm import LogisticFit, RankDeficientError, expit, fit_logistic
from .splines import KnotSet, place_knots, rcs_basis

CANDIDATE_KINDS = ("constant", "linear", "rcs-3", "rcs-4", "rcs-5")
ALL_KINDS = ("stratified",) + CANDIDATE_KINDS + ("adaptive",)


class ModelFitError(RuntimeError):
    """A benefit model could not be fitted on this sample."""


class DegenerateStratumError(ModelFitError):
    pass


@dataclass(frozen=True)
class RiskModel:
    fit: LogisticFit
    treatment_coefficient_index: int

    @property
    def treatment_effect(self) -> float:
        return float(self.fit.coefficients[self.treatment_coefficient_index])

    def baseline_lp(self, covariates) -> np.ndarray:
        """Linear predictor with treatment set to 0."""
        x = np.asarray(covariates, dtype=float)
        coef = np.delete(self.fit.coefficients, self.treatment_coefficient_index)
        return coef[0] + x @ coef[1:]


@dataclass(frozen=True)
class BenefitModel:
    kind: str
    coefficients: np.ndarray | None = None
    knots: KnotSet | None = None
    cutpoints: np.ndarray | None = None
    stratum_benefit: np.ndarray | None = None
    fit: LogisticFit | None = field(default=None, repr=False)
    selected: "BenefitModel | None" = None
    candidate_aic: dict = field(default_factory=dict)

    @property
    def aic(self) -> float | None:
        if self.kind == "adaptive":
            return self.selected.aic
        return None if self.fit is None else self.fit.aic

    @property
    def log_likelihood(self) -> float | None:
        if self.kind == "adaptive":
            return self.selected.log_likelihood
        return None if self.fit is None else self.fit.log_likelihood

    @property
    def df(self) -> int | None:
        return None if self.fit is None else self.fit.n_params

    @property
    def selected_kind(self) -> str | None:
        return self.selected.kind if self.selected is not None else None


def _population_design(population) -> np.ndarray:
    return np.column_stack([np.ones(population.n), population.covariates, population.z])


def _check_fit(fit: LogisticFit, what: str) -> LogisticFit:
    if fit.separated:
        raise ModelFitError(f"{what}: separation detected")
    return fit


def fit_risk_model(population) -> RiskModel:
    z = np.asarray(population.z)
    if z.min() == z.max():
        raise RankDeficientError("treatment column is constant")
    X = _population_design(population)
    fit = fit_logistic(X, population.y)
    return RiskModel(fit=fit, treatment_coefficient_index=X.shape[1] - 1)


def _second_stage_design(lp, z, kind: str, knots: KnotSet | None = None) -> np.ndarray:
    lp = np.asarray(lp, dtype=float)
    z = np.asarray(z, dtype=float)
    cols = [np.ones_like(lp), lp, z]
    if kind == "linear":
        cols.append(z * lp)
    elif kind.startswith("rcs"):
        cols.extend((z[:, None] * rcs_basis(lp, knots)).T)
    return np.column_stack(cols)


def fit_stratified(population, risk: RiskModel, n_strata: int = 4) -> BenefitModel:
    lp = risk.baseline_lp(population.covariates)
    cuts = np.quantile(lp, np.arange(1, n_strata) / n_strata, method="linear")
    stratum = np.searchsorted(cuts, lp, side="left")
    y = np.asarray(population.y, dtype=float)
    z = np.asarray(population.z)
    benefit = np.empty(n_strata)
    for s in range(n_strata):
        ctrl = (stratum == s) & (z == 0)
        trt = (stratum == s) & (z == 1)
        if not ctrl.any() or not trt.any():
            raise DegenerateStratumError(f"risk stratum {s + 1} has an empty treatment arm")
        benefit[s] = y[ctrl].mean() - y[trt].mean()
    return BenefitModel(kind="stratified", cutpoints=cuts, stratum_benefit=benefit)


def fit_constant(risk: RiskModel) -> BenefitModel:
    """Constant odds ratio taken from the risk model's treatment coefficient.

    As a second-stage model on ``(1, lp, z)`` its maximum likelihood is
    reached at ``(0, 1, delta_hat)`` and equals the risk model's, so the fit
    is recorded with three parameters. This keeps its AIC comparable with
    the interaction models.
    """
    coef = np.array([0.0, 1.0, risk.treatment_effect])
    fit = LogisticFit(
        coefficients=coef,
        log_likelihood=risk.fit.log_likelihood,
        converged=risk.fit.converged,
        iterations=0,
        separated=risk.fit.separated,
    )
    return BenefitModel(kind="constant", coefficients=coef, fit=_check_fit(fit, "constant"))


def fit_linear_interaction(population, risk: RiskModel) -> BenefitModel:
    lp = risk.baseline_lp(population.covariates)
    fit = _check_fit(
        fit_logistic(_second_stage_design(lp, population.z, "linear"), population.y), "linear"
    )
    return BenefitModel(kind="linear", coefficients=fit.coefficients, fit=fit)


def fit_rcs(population, risk: RiskModel, k: int) -> BenefitModel:
    lp = risk.baseline_lp(population.covariates)
    knots = place_knots(lp, k)
    kind = f"rcs-{k}"
    fit = _check_fit(
        fit_logistic(_second_stage_design(lp, population.z, kind, knots), population.y), kind
    )
    return BenefitModel(kind=kind, coefficients=fit.coefficients, knots=knots, fit=fit)


def fit_candidate(kind: str, population, risk: RiskModel) -> BenefitModel:
    if kind == "constant":
        return fit_constant(risk)
    if kind == "linear":
        return fit_linear_interaction(population, risk)
    if kind.startswith("rcs-"):
        return fit_rcs(population, risk, int(kind[4:]))
    if kind == "stratified":
        return fit_stratified(population, risk)
    raise ValueError(f"unknown benefit model {kind!r}")


def select_adaptive(candidates) -> BenefitModel:
    """Minimum-AIC candidate; ties go to the one with fewer parameters."""
    usable = [m for m in candidates if m is not None and m.aic is not None]
    if not usable:
        raise ModelFitError("adaptive: every candidate model failed")
    best = min(usable, key=lambda m: (m.aic, m.df))
    return BenefitModel(
        kind="adaptive",
        selected=best,
        candidate_aic={m.kind: m.aic for m in usable},
    )


def fit_adaptive(population, risk: RiskModel, candidates=None) -> BenefitModel:
    """AIC-based choice among constant, linear and RCS-3/4/5.

    ``candidates`` may pass already fitted models (``None`` marks a failed
    fit); otherwise all five are fitted here and failures are skipped.
    """
    if candidates is None:
        candidates = []
        for kind in CANDIDATE_KINDS:
            try:
                candidates.append(fit_candidate(kind, population, risk))
            except (ModelFitError, np.linalg.LinAlgError, ValueError):
                candidates.append(None)
    return select_adaptive(candidates)


def predict_benefit(model: BenefitModel, lp0_hat) -> np.ndarray:
    lp = np.asarray(lp0_hat, dtype=float)
    kind = model.kind
    if kind == "adaptive":
        return predict_benefit(model.selected, lp)
    if kind == "stratified":
        return model.stratum_benefit[np.searchsorted(model.cutpoints, lp, side="left")]
    c = model.coefficients
    if kind == "constant":
        return expit(lp) - expit(lp + c[2])
    if kind == "linear":
        return expit(c[0] + c[1] * lp) - expit(c[0] + c[2] + (c[1] + c[3]) * lp)
    if kind.startswith("rcs"):
        untreated = c[0] + c[1] * lp
        return expit(untreated) - expit(untreated + c[2] + rcs_basis(lp, model.knots) @ c[3:])
    raise ValueError(f"unknown benefit model {kind!r}")
