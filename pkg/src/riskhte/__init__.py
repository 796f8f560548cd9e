"""Risk-based prediction of individualized treatment benefit in simulated RCTs."""
from .glm import LogisticFit, RankDeficientError, expit, fit_logistic, logit, predict_linear
from .kernels import BACKEND as KERNEL_BACKEND
from .metrics import (
    MatchedPairSet,
    UndefinedMetricError,
    c_for_benefit,
    c_statistic,
    ici_for_benefit,
    loess_smooth,
    match_pairs,
    rmse,
)
from .models import (
    BenefitModel,
    RiskModel,
    fit_adaptive,
    fit_constant,
    fit_linear_interaction,
    fit_rcs,
    fit_risk_model,
    fit_stratified,
    predict_benefit,
)
from .scenarios import Population, Scenario, load_scenarios, sample_superpopulation, sample_trial
from .splines import KnotSet, place_knots, rcs_basis

__version__ = "0.1.0"
