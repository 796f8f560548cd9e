"""Construction of the shipped scenario grids.

648 risk-based scenarios: 3 effect sizes x 6 deviation shapes x 3 trial
sizes x 3 risk-model AUCs x 4 harm levels, numbered in that nesting order.
28 interaction scenarios follow (ids 649-676).

Deviation coefficients with known reference values are used verbatim
(``REFERENCE_GAMMA``). The rest are built from a deviation profile on the
standardized control linear predictor ``u = (lp0 - m) / s``::

    lp1 - lp0 = d0 + slope * u + curvature * u**2

with ``d0`` solved so that the mean absolute benefit equals that of the
constant-odds-ratio scenario with the same effect size and AUC.
"""
from __future__ import annotations

import itertools
import math
from decimal import ROUND_HALF_EVEN, Decimal
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit
from scipy.stats import binom

from .scenarios import HARM_LABELS, NULL_EFFECT_HARM, Scenario, treatment_lp

BETAS = {0.75: (-2.08, 0.49), 0.65: (-1.63, 0.26), 0.85: (-2.70, 0.82)}
AUC_ORDER = (0.75, 0.65, 0.85)
N_ORDER = (4250, 1063, 17000)
EFFECT_ORDER = ("absent", "moderate", "high")
EFFECT_LOG_OR = {"absent": 0.0, "moderate": round(math.log(0.8), 3), "high": round(math.log(0.5), 3)}
SHAPE_ORDER = (
    ("constant", ""),
    ("linear", "moderate"),
    ("linear", "strong"),
    ("quadratic", "moderate"),
    ("quadratic", "strong"),
    ("non-monotonic", ""),
)

# (effect, shape, type, auc) -> (g0, g1, g2)
REFERENCE_GAMMA = {
    ("absent", "linear", "moderate", 0.75): (-0.060, 0.947, 0.0),
    ("absent", "linear", "moderate", 0.65): (-0.080, 0.934, 0.0),
    ("moderate", "non-monotonic", "", 0.75): (0.173, 1.560, 0.105),
    ("moderate", "non-monotonic", "", 0.65): (0.481, 1.783, 0.137),
    ("moderate", "non-monotonic", "", 0.85): (-0.085, 1.354, 0.074),
    ("high", "non-monotonic", "", 0.75): (-0.084, 2.035, 0.210),
    ("high", "non-monotonic", "", 0.65): (0.786, 2.762, 0.321),
    ("high", "non-monotonic", "", 0.85): (-0.621, 1.566, 0.138),
}

# deviation profiles on the standardized linear predictor: (slope, curvature)
LINEAR_SLOPE = {"moderate": -0.1075, "strong": -0.215}
QUADRATIC_CURVATURE = {"moderate": 0.0375, "strong": 0.075}
# vertex of the quadratic log odds ratio, in standard deviations above the mean
QUADRATIC_VERTEX = 3.5

INTERACTION_COVARIATES = (0, 1, 4, 5)  # x1, x2, x5, x6
INTERACTION_TYPES = (
    ("weak", (-0.19, -0.19, -0.19, -0.19)),
    ("mixed", (-0.19, -0.49, -0.19, -0.49)),
    ("strong", (-0.49, -0.49, -0.49, -0.49)),
    ("negative-weak", (0.16, 0.16, 0.16, 0.16)),
    ("negative-mixed", (0.16, 0.33, 0.16, 0.33)),
    ("negative-strong", (0.33, 0.33, 0.33, 0.33)),
    ("combined", (-0.49, 0.33, -0.49, 0.33)),
)
INTERACTION_GAMMA0 = -0.69


def full_beta(auc: float) -> tuple[float, ...]:
    b0, b = BETAS[auc]
    return (b0,) + (b,) * 8


@lru_cache(maxsize=None)
def lp0_quadrature(auc: float, n_nodes: int = 96) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights representing the control linear predictor's law.

    lp0 = b0 + b * (N(0, 4) + Binomial(4, 0.2)) when all slopes equal b.
    """
    b0, b = BETAS[auc]
    gh_x, gh_w = np.polynomial.hermite_e.hermegauss(n_nodes)
    gh_w = gh_w / gh_w.sum()
    ks = np.arange(5)
    pk = binom.pmf(ks, 4, 0.2)
    nodes = (b0 + b * (2.0 * gh_x[None, :] + ks[:, None])).ravel()
    weights = (pk[:, None] * gh_w[None, :]).ravel()
    return nodes, weights


def lp0_moments(auc: float) -> tuple[float, float]:
    b0, b = BETAS[auc]
    return b0 + 0.8 * b, math.sqrt(4 * b * b + 4 * 0.16 * b * b)


def mean_benefit(auc: float, gamma, c: float = 0.0) -> float:
    nodes, w = lp0_quadrature(auc)
    return float(w @ (expit(nodes) - expit(treatment_lp(nodes, gamma, c))))


def control_event_rate(auc: float) -> float:
    nodes, w = lp0_quadrature(auc)
    return float(w @ expit(nodes))


def profile_gamma(auc: float, d0: float, slope: float, curvature: float) -> tuple[float, float, float]:
    """Convert a standardized log-odds-ratio profile to (g0, g1, g2) with c = 0."""
    m, s = lp0_moments(auc)
    g2 = curvature / s**2
    g1 = 1.0 + slope / s - 2.0 * curvature * m / s**2
    g0 = d0 - slope * m / s + curvature * m**2 / s**2
    return g0, g1, g2


def _solve_intercept(auc: float, g1: float, g2: float, target: float) -> float:
    f = lambda g0: mean_benefit(auc, (g0, g1, g2)) - target  # noqa: E731
    return brentq(f, -8.0, 8.0, xtol=1e-12)


def deviation_gamma(effect: str, shape: str, kind: str, auc: float) -> tuple[float, float, float]:
    key = (effect, shape, kind, auc)
    if key in REFERENCE_GAMMA:
        return REFERENCE_GAMMA[key]
    log_or = EFFECT_LOG_OR[effect]
    if shape == "constant":
        return (log_or, 1.0, 0.0)
    target = mean_benefit(auc, (log_or, 1.0, 0.0))
    if shape == "linear":
        _, g1, g2 = profile_gamma(auc, 0.0, LINEAR_SLOPE[kind], 0.0)
    elif shape == "quadratic":
        curv = QUADRATIC_CURVATURE[kind]
        _, g1, g2 = profile_gamma(auc, 0.0, -2.0 * QUADRATIC_VERTEX * curv, curv)
    elif shape == "non-monotonic":
        # no reference row for a null average effect: keep the moderate
        # effect's shape and re-centre it on zero mean benefit
        _, g1, g2 = REFERENCE_GAMMA[("moderate", "non-monotonic", "", auc)]
    else:
        raise ValueError(shape)
    g0 = _solve_intercept(auc, g1, g2, target)
    return (round(g0, 3), round(g1, 3), round(g2, 3))


def printed_benefits(effect: str, harm: str, exact_before: float, fractions: dict) -> tuple[float, float]:
    """Benefit columns as tabulated: three decimals, harm taken off the rounded value.

    Rounding is decimal half-to-even. A null average effect is tabulated as
    exactly zero.
    """
    milli = Decimal("0.001")
    if effect == "absent":
        before = Decimal(0)
        shift = Decimal(str(NULL_EFFECT_HARM[harm]))
    else:
        before = Decimal(repr(exact_before)).quantize(milli, rounding=ROUND_HALF_EVEN)
        shift = Decimal(str(fractions[harm])) * before
    after = (before - shift).quantize(milli, rounding=ROUND_HALF_EVEN)
    return float(before) + 0.0, float(after) + 0.0


def build_risk_grid() -> list[Scenario]:
    from .scenarios import HARM_FRACTION

    out = []
    sid = 0
    for effect in EFFECT_ORDER:
        for shape, kind in SHAPE_ORDER:
            for n in N_ORDER:
                for auc in AUC_ORDER:
                    gamma = deviation_gamma(effect, shape, kind, auc)
                    exact = mean_benefit(auc, gamma)
                    for harm in HARM_LABELS:
                        before, after = printed_benefits(effect, harm, exact, HARM_FRACTION)
                        sid += 1
                        out.append(
                            Scenario(
                                id=sid,
                                deviation_shape=shape,
                                deviation_type=kind,
                                effect_size=effect,
                                n=n,
                                target_auc=auc,
                                harm_label=harm,
                                beta=full_beta(auc),
                                gamma=tuple(float(g) for g in gamma),
                                c=0.0,
                                benefit_before=before,
                                benefit_after=after,
                            )
                        )
    return out


def write_shipped_grids(data_dir) -> None:
    from pathlib import Path

    from .scenarios import write_scenarios

    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    write_scenarios(build_risk_grid(), data_dir / "scenarios.csv")
    write_scenarios(build_interaction_grid(), data_dir / "interaction_scenarios.csv")


def interaction_mean_benefit(theta, gamma0: float = INTERACTION_GAMMA0, auc: float = 0.75) -> float:
    """Mean benefit of an interaction scenario without harm.

    The normal covariates enter both linear predictors only through a
    bivariate normal pair, integrated by tensor Gauss-Hermite; the 16 binary
    patterns are enumerated.
    """
    b0, b = BETAS[auc]
    theta = np.asarray(theta, dtype=float)
    loadings = np.array([[b] * 4, theta[:4]])
    cov = loadings @ loadings.T
    gh_x, gh_w = np.polynomial.hermite_e.hermegauss(64)
    gh_w = gh_w / gh_w.sum()
    z1, z2 = np.meshgrid(gh_x, gh_x, indexing="ij")
    w2 = np.outer(gh_w, gh_w)
    sa = math.sqrt(cov[0, 0])
    rho_part = cov[0, 1] / sa
    resid = math.sqrt(max(cov[1, 1] - rho_part**2, 0.0))
    a = sa * z1
    c = rho_part * z1 + resid * z2
    total = 0.0
    for bits in itertools.product((0.0, 1.0), repeat=4):
        bits = np.array(bits)
        prob = float(np.prod(np.where(bits == 1.0, 0.2, 0.8)))
        lp0 = b0 + a + b * bits.sum()
        lp1 = gamma0 + lp0 + c + theta[4:] @ bits
        total += prob * float((w2 * (expit(lp0) - expit(lp1))).sum())
    return total


def build_interaction_grid() -> list[Scenario]:
    from .scenarios import INTERACTION_HARM_FRACTION

    out = []
    sid = 648
    for kind, values in INTERACTION_TYPES:
        theta = [0.0] * 8
        for idx, v in zip(INTERACTION_COVARIATES, values):
            theta[idx] = v
        exact = interaction_mean_benefit(theta)
        for harm in HARM_LABELS:
            before, after = printed_benefits("high", harm, exact, INTERACTION_HARM_FRACTION)
            sid += 1
            out.append(
                Scenario(
                    id=sid,
                    deviation_shape="interaction",
                    deviation_type=kind,
                    effect_size="high",
                    n=4250,
                    target_auc=0.75,
                    harm_label=harm,
                    beta=full_beta(0.75),
                    gamma=(INTERACTION_GAMMA0, 1.0, 0.0),
                    theta=tuple(theta),
                    benefit_before=before,
                    benefit_after=after,
                )
            )
    return out
