"""Trial and super-population generation for the simulation scenarios.

Control-arm risk follows a logistic model in eight covariates (four standard
normal, four Bernoulli(0.2)). The treated-arm linear predictor is either a
quadratic transform of the control one (risk-based scenarios) or adds
per-covariate interaction terms (interaction scenarios). A constant absolute
harm may be added to the treated-arm probability.
"""
from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .glm import expit

N_COVARIATES = 8
SHAPES = ("constant", "linear", "quadratic", "non-monotonic", "interaction")
EFFECTS = ("absent", "moderate", "high")
HARM_LABELS = ("absent", "moderate-positive", "strong-positive", "negative")
GRID_SIZES = (1063, 4250, 17000)
TARGET_AUCS = (0.65, 0.75, 0.85)

# fraction of the harm-free mean benefit added as absolute harm
HARM_FRACTION = {"absent": 0.0, "moderate-positive": 0.25, "strong-positive": 0.50, "negative": -0.25}
# interaction scenarios define negative harm as a 50% absolute risk reduction
INTERACTION_HARM_FRACTION = {**HARM_FRACTION, "negative": -0.50}
NULL_EFFECT_HARM = {"absent": 0.0, "moderate-positive": 0.01, "strong-positive": 0.02, "negative": -0.01}

_FIELDS_HEAD = ["id", "shape", "type", "effect", "n", "target_auc", "harm_label"]
_BETA = [f"b{i}" for i in range(9)]
_GAMMA = ["g0", "g1", "g2", "c"]
_THETA = [f"theta{i}" for i in range(1, 9)]
_TAIL = ["benefit_before", "benefit_after"]
GRID_HEADER = _FIELDS_HEAD + _BETA + _GAMMA + _THETA + _TAIL


class ScenarioFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    id: int
    deviation_shape: str
    effect_size: str
    n: int
    target_auc: float
    harm_label: str
    beta: tuple[float, ...]
    gamma: tuple[float, float, float]
    c: float = 0.0
    theta: tuple[float, ...] | None = None
    harm_value: float | None = None
    deviation_type: str = ""
    benefit_before: float | None = None
    benefit_after: float | None = None

    def __post_init__(self):
        if len(self.beta) != 9:
            raise ScenarioFormatError(f"scenario {self.id}: beta needs 9 entries, got {len(self.beta)}")
        if self.deviation_shape not in SHAPES:
            raise ScenarioFormatError(f"scenario {self.id}: unknown shape {self.deviation_shape!r}")
        if self.effect_size not in EFFECTS:
            raise ScenarioFormatError(f"scenario {self.id}: unknown effect {self.effect_size!r}")
        if self.harm_label not in HARM_LABELS:
            raise ScenarioFormatError(f"scenario {self.id}: unknown harm label {self.harm_label!r}")
        if self.n < 1:
            raise ScenarioFormatError(f"scenario {self.id}: n must be positive")
        if (self.theta is not None) != (self.deviation_shape == "interaction"):
            raise ScenarioFormatError(
                f"scenario {self.id}: theta is required for, and only for, interaction scenarios"
            )
        if self.theta is not None and len(self.theta) != N_COVARIATES:
            raise ScenarioFormatError(f"scenario {self.id}: theta needs 8 entries")

    @property
    def is_interaction(self) -> bool:
        return self.theta is not None

    def with_harm(self, harm_value: float) -> "Scenario":
        return dataclasses.replace(self, harm_value=float(harm_value))


@dataclass(frozen=True)
class Population:
    covariates: np.ndarray
    z: np.ndarray
    lp0: np.ndarray
    lp1: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    y: np.ndarray
    true_benefit: np.ndarray

    @property
    def n(self) -> int:
        return int(self.z.shape[0])


# ---------------------------------------------------------------- generators

def generate_covariates(n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be at least 1")
    cont = rng.standard_normal((n, 4))
    binary = (rng.random((n, 4)) < 0.2).astype(float)
    return np.hstack([cont, binary])


def control_lp(covariates, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    covariates = np.asarray(covariates, dtype=float)
    if beta.shape != (9,):
        raise ValueError(f"beta needs 9 entries, got {beta.shape}")
    if covariates.ndim != 2 or covariates.shape[1] != N_COVARIATES:
        raise ValueError(f"covariates must be n x 8, got {covariates.shape}")
    return beta[0] + covariates @ beta[1:]


def treatment_lp(lp0, gamma, c: float = 0.0) -> np.ndarray:
    g0, g1, g2 = gamma
    d = np.asarray(lp0, dtype=float) - c
    return g2 * d * d + g1 * d + g0


def interaction_lp(covariates, beta, gamma0: float, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (N_COVARIATES,):
        raise ValueError(f"theta needs 8 entries, got {theta.shape}")
    return gamma0 + control_lp(covariates, beta) + np.asarray(covariates, dtype=float) @ theta


def _treated_lp(scenario: Scenario, covariates, lp0) -> np.ndarray:
    if scenario.is_interaction:
        return interaction_lp(covariates, scenario.beta, scenario.gamma[0], scenario.theta)
    return treatment_lp(lp0, scenario.gamma, scenario.c)


def resolve_harm(scenario: Scenario, superpop_benefit_mean: float) -> float:
    """Absolute harm added to the treated-arm risk for this scenario."""
    if scenario.harm_label == "absent":
        return 0.0
    if scenario.effect_size == "absent":
        return NULL_EFFECT_HARM[scenario.harm_label]
    fractions = INTERACTION_HARM_FRACTION if scenario.is_interaction else HARM_FRACTION
    return fractions[scenario.harm_label] * float(superpop_benefit_mean)


def _realize(scenario: Scenario, n: int, rng: np.random.Generator, harm: float) -> Population:
    # draw order is part of the reproducibility contract: covariates, arm
    # permutation, outcome uniforms
    x = generate_covariates(n, rng)
    perm = rng.permutation(n)
    u = rng.random(n)
    z = np.zeros(n, dtype=np.int8)
    z[perm[: n // 2]] = 1
    lp0 = control_lp(x, scenario.beta)
    lp1 = _treated_lp(scenario, x, lp0)
    p0 = expit(lp0)
    p1 = np.clip(expit(lp1) + harm, 0.0, 1.0)
    y = (u < np.where(z == 1, p1, p0)).astype(np.int8)
    return Population(x, z, lp0, lp1, p0, p1, y, p0 - p1)


def sample_trial(scenario: Scenario, rng: np.random.Generator) -> Population:
    harm = 0.0 if scenario.harm_value is None else scenario.harm_value
    return _realize(scenario, scenario.n, rng, harm)


def sample_superpopulation(scenario: Scenario, size: int, rng: np.random.Generator) -> Population:
    harm = 0.0 if scenario.harm_value is None else scenario.harm_value
    return _realize(scenario, size, rng, harm)


def prepare_scenario(
    scenario: Scenario, size: int, rng: np.random.Generator
) -> tuple[Scenario, Population]:
    """Generate the scenario's super-population and resolve its harm.

    The harm-free mean benefit is computed on the super-population itself; the
    returned population then carries the harm. Covariates, arms and outcome
    draws are shared between the two passes.
    """
    state = rng.bit_generator.state
    base = sample_superpopulation(dataclasses.replace(scenario, harm_value=0.0), size, rng)
    resolved = scenario.with_harm(resolve_harm(scenario, base.true_benefit.mean()))
    if resolved.harm_value == 0.0:
        return resolved, base
    rng.bit_generator.state = state
    return resolved, sample_superpopulation(resolved, size, rng)


# ---------------------------------------------------------------- grid files

def _num(row: dict, key: str, lineno: int, required: bool = True) -> float | None:
    raw = (row.get(key) or "").strip()
    if raw == "":
        if required:
            raise ScenarioFormatError(f"line {lineno}: missing value for {key!r}")
        return None
    try:
        return float(raw)
    except ValueError:
        raise ScenarioFormatError(f"line {lineno}: {key!r} is not numeric: {raw!r}") from None


def _parse_row(row: dict, lineno: int) -> Scenario:
    try:
        sid = int(row["id"])
        n = int(float(row["n"]))
    except (KeyError, TypeError, ValueError):
        raise ScenarioFormatError(f"line {lineno}: bad id or n") from None
    beta = tuple(_num(row, k, lineno) for k in _BETA)
    thetas = [_num(row, k, lineno, required=False) for k in _THETA]
    theta = None
    if any(t is not None for t in thetas):
        if any(t is None for t in thetas):
            raise ScenarioFormatError(f"line {lineno}: theta columns partially filled")
        theta = tuple(thetas)
    g0 = _num(row, "g0", lineno)
    if theta is None:
        gamma = (g0, _num(row, "g1", lineno), _num(row, "g2", lineno))
        c = _num(row, "c", lineno)
    else:
        gamma = (g0, 1.0, 0.0)
        c = 0.0
    return Scenario(
        id=sid,
        deviation_shape=row.get("shape", "").strip(),
        deviation_type=(row.get("type") or "").strip(),
        effect_size=row.get("effect", "").strip(),
        n=n,
        target_auc=_num(row, "target_auc", lineno),
        harm_label=row.get("harm_label", "").strip(),
        beta=beta,
        gamma=gamma,
        c=c,
        theta=theta,
        benefit_before=_num(row, "benefit_before", lineno, required=False),
        benefit_after=_num(row, "benefit_after", lineno, required=False),
    )


def load_scenarios(path) -> list[Scenario]:
    """Read a scenario grid file (comma-delimited, header row)."""
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        return []
    reader = csv.DictReader(text.splitlines())
    missing = {"id", "shape", "effect", "n", "target_auc", "harm_label", *_BETA, "g0"} - set(
        reader.fieldnames or ()
    )
    if missing:
        raise ScenarioFormatError(f"line 1: header lacks columns {sorted(missing)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        try:
            out.append(_parse_row(row, lineno))
        except ScenarioFormatError as exc:
            if str(exc).startswith("line"):
                raise
            raise ScenarioFormatError(f"line {lineno}: {exc}") from None
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v + 0.0:.6g}"
    return str(v)


def write_scenarios(scenarios, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GRID_HEADER)
        for s in scenarios:
            gamma = (s.gamma[0], "", "", "") if s.is_interaction else (*s.gamma, s.c)
            theta = s.theta if s.theta is not None else ("",) * 8
            w.writerow(
                [s.id, s.deviation_shape, s.deviation_type, s.effect_size, s.n, _fmt(s.target_auc), s.harm_label]
                + [_fmt(b) for b in s.beta]
                + [_fmt(g) if g != "" else "" for g in gamma]
                + [_fmt(t) if t != "" else "" for t in theta]
                + [_fmt(s.benefit_before), _fmt(s.benefit_after)]
            )


def shipped_grid_path(name: str = "scenarios.csv") -> Path:
    return Path(str(resources.files("riskhte") / "data" / name))


def default_scenarios(include_interaction: bool = True) -> list[Scenario]:
    out = load_scenarios(shipped_grid_path("scenarios.csv"))
    if include_interaction:
        out += load_scenarios(shipped_grid_path("interaction_scenarios.csv"))
    return out


def scenario_by_id(scenarios, sid: int) -> Scenario:
    for s in scenarios:
        if s.id == sid:
            return s
    raise KeyError(f"no scenario with id {sid}")
