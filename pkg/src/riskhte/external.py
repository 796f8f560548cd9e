"""Apply the two-stage benefit models to a user-supplied trial data set."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .glm import RankDeficientError
from .models import (
    ALL_KINDS,
    CANDIDATE_KINDS,
    ModelFitError,
    fit_candidate,
    fit_risk_model,
    predict_benefit,
    select_adaptive,
)

_FIT_ERRORS = (ModelFitError, np.linalg.LinAlgError, ValueError)


class DataFormatError(ValueError):
    """The data file does not match the column specification."""


class SingleClassOutcomeError(DataFormatError):
    pass


@dataclass(frozen=True)
class ColumnSpec:
    """Which columns hold the outcome, the treatment and the covariates.

    A covariate written as ``name:cat`` is always one-hot encoded. Other
    covariates are numeric unless some value fails to parse as a number,
    in which case they are treated as categorical too.
    """

    outcome: str
    treatment: str
    covariates: tuple[str, ...]

    def __post_init__(self):
        if not self.covariates:
            raise DataFormatError("at least one covariate is required")
        names = [self.outcome, self.treatment, *(c.split(":")[0] for c in self.covariates)]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise DataFormatError(f"columns used more than once: {dupes}")


@dataclass(frozen=True)
class TrialData:
    covariates: np.ndarray
    z: np.ndarray
    y: np.ndarray
    design_names: tuple[str, ...]

    @property
    def n(self) -> int:
        return int(self.z.shape[0])

    def subset(self, idx) -> "TrialData":
        return TrialData(self.covariates[idx], self.z[idx], self.y[idx], self.design_names)


def _binary(raw: str, column: str, lineno: int) -> int:
    try:
        v = float(raw)
    except ValueError:
        raise DataFormatError(f"line {lineno}: {column!r} must be 0 or 1, got {raw!r}") from None
    if v not in (0.0, 1.0):
        raise DataFormatError(f"line {lineno}: {column!r} must be 0 or 1, got {raw!r}")
    return int(v)


def read_trial_csv(path, spec: ColumnSpec) -> TrialData:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError(f"line 1: {path} is empty") from None
        rows = [(i, r) for i, r in enumerate(reader, start=2) if any(cell.strip() for cell in r)]

    wanted = [spec.outcome, spec.treatment] + [c.split(":")[0] for c in spec.covariates]
    absent = [c for c in wanted if c not in header]
    if absent:
        raise DataFormatError(f"line 1: missing columns {absent}")
    pos = {name: header.index(name) for name in wanted}

    for lineno, r in rows:
        if len(r) != len(header):
            raise DataFormatError(f"line {lineno}: expected {len(header)} fields, found {len(r)}")
        for name in wanted:
            if r[pos[name]].strip() == "":
                raise DataFormatError(f"line {lineno}: missing value for {name!r}")
    if not rows:
        raise DataFormatError(f"{path}: no data rows")

    y = np.array([_binary(r[pos[spec.outcome]].strip(), spec.outcome, ln) for ln, r in rows], dtype=np.int8)
    z = np.array([_binary(r[pos[spec.treatment]].strip(), spec.treatment, ln) for ln, r in rows], dtype=np.int8)
    if y.min() == y.max():
        raise SingleClassOutcomeError(f"outcome {spec.outcome!r} takes the single value {int(y[0])}")

    cols, names = [], []
    for cov in spec.covariates:
        name, _, kind = cov.partition(":")
        if kind not in ("", "cat"):
            raise DataFormatError(f"unknown covariate type {kind!r} for {name!r}; use ':cat' or nothing")
        raw = [r[pos[name]].strip() for _, r in rows]
        numeric = None
        if kind == "":
            try:
                numeric = np.array([float(v) for v in raw])
            except ValueError:
                numeric = None
        if numeric is not None:
            bad = np.flatnonzero(~np.isfinite(numeric))
            if bad.size:
                raise DataFormatError(f"line {rows[bad[0]][0]}: {name!r} is not finite")
            cols.append(numeric)
            names.append(name)
            continue
        levels = sorted(set(raw))
        if len(levels) < 2:
            raise DataFormatError(f"categorical covariate {name!r} has a single level")
        for level in levels[1:]:
            cols.append(np.array([v == level for v in raw], dtype=float))
            names.append(f"{name}={level}")
    return TrialData(np.column_stack(cols), z, y, tuple(names))


def write_trial_csv(population, path, covariate_names=None) -> None:
    """Write a population's covariates, treatment and outcome; floats round-trip exactly."""
    x = np.asarray(population.covariates, dtype=float)
    names = covariate_names or [f"x{i + 1}" for i in range(x.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "treatment", "outcome"])
        for row, zi, yi in zip(x, population.z, population.y):
            w.writerow([repr(float(v)) for v in row] + [int(zi), int(yi)])


@dataclass
class ExternalResult:
    method: str
    lp0_hat: np.ndarray
    predicted_benefit: np.ndarray
    aic: dict[str, float]
    selected_model: str | None
    cv_c_for_benefit: float
    cv_ici_benefit: float
    folds: int
    seed: int
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        def clean(v):
            return None if v is None or (isinstance(v, float) and math.isnan(v)) else v

        return {
            "method": self.method,
            "selected_model": self.selected_model,
            "aic": {k: clean(v) for k, v in self.aic.items()},
            "cv_c_for_benefit": clean(self.cv_c_for_benefit),
            "cv_ici_benefit": clean(self.cv_ici_benefit),
            "folds": self.folds,
            "seed": self.seed,
            "n": int(self.lp0_hat.size),
            "notes": self.notes,
        }


def fit_method(data, method: str):
    """Fit the risk model and the requested benefit model.

    Returns ``(risk_model, benefit_model, candidates)``; ``candidates`` maps
    every AIC-comparable kind to its fit, or ``None`` if that fit failed.
    """
    if method not in ALL_KINDS:
        raise ValueError(f"unknown method {method!r}; choose from {ALL_KINDS}")
    risk = fit_risk_model(data)
    candidates = {}
    for kind in CANDIDATE_KINDS:
        try:
            candidates[kind] = fit_candidate(kind, data, risk)
        except _FIT_ERRORS:
            candidates[kind] = None
    if method == "adaptive":
        model = select_adaptive(list(candidates.values()))
    elif candidates.get(method) is not None:
        model = candidates[method]
    else:
        # stratified, or a candidate that failed above: refit so the error surfaces
        model = fit_candidate(method, data, risk)
    return risk, model, candidates


def cross_validate(data: TrialData, method: str, folds: int = 5, seed: int = 0) -> tuple[float, float, list[str]]:
    """Pooled out-of-fold c-for-benefit and ICI-for-benefit.

    Patients are matched within their own test fold; the matched pairs of all
    folds are then scored together.
    """
    if folds < 2:
        raise ValueError("folds must be at least 2")
    if folds > data.n:
        raise ValueError("more folds than patients")
    order = np.random.default_rng(seed).permutation(data.n)
    observed, predicted, notes = [], [], []
    for k, test in enumerate(np.array_split(order, folds)):
        train = np.setdiff1d(order, test, assume_unique=True)
        try:
            risk, model, _ = fit_method(data.subset(train), method)
        except _FIT_ERRORS as exc:
            notes.append(f"fold {k + 1}: fit failed ({exc})")
            continue
        held = data.subset(np.sort(test))
        pred = predict_benefit(model, risk.baseline_lp(held.covariates))
        pairs = metrics.match_arms(held.z, held.y, pred)
        observed.append(pairs.observed)
        predicted.append(pairs.predicted)
    if not observed:
        return math.nan, math.nan, notes
    pooled = metrics.MatchedPairSet(np.concatenate(observed), np.concatenate(predicted))
    try:
        cb = metrics.c_for_benefit(pooled)
    except metrics.UndefinedMetricError as exc:
        cb = math.nan
        notes.append(f"c-for-benefit undefined: {exc}")
    try:
        ici = metrics.ici_for_benefit(pooled)
    except ValueError as exc:
        ici = math.nan
        notes.append(f"ICI undefined: {exc}")
    return cb, ici, notes


def apply_external(
    data_path,
    spec: ColumnSpec,
    method: str = "adaptive",
    folds: int = 5,
    seed: int = 0,
    out_dir=None,
) -> ExternalResult:
    data = read_trial_csv(data_path, spec)
    try:
        risk, model, candidates = fit_method(data, method)
    except RankDeficientError as exc:
        raise DataFormatError(f"risk model cannot be fitted: {exc}") from None
    lp = risk.baseline_lp(data.covariates)
    benefit = predict_benefit(model, lp)
    aic = {k: (m.aic if m is not None else math.nan) for k, m in candidates.items()}
    cb, ici, notes = cross_validate(data, method, folds, seed)
    result = ExternalResult(
        method=method,
        lp0_hat=lp,
        predicted_benefit=benefit,
        aic=aic,
        selected_model=model.selected_kind if method == "adaptive" else None,
        cv_c_for_benefit=cb,
        cv_ici_benefit=ici,
        folds=folds,
        seed=seed,
        notes=notes,
    )
    if out_dir is not None:
        write_external(result, out_dir)
    return result


def write_external(result: ExternalResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "benefit.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "lp0_hat", "predicted_benefit"])
        for i, (a, b) in enumerate(zip(result.lp0_hat, result.predicted_benefit), start=1):
            w.writerow([i, repr(float(a)), repr(float(b))])
    (out / "summary.json").write_text(json.dumps(result.summary(), indent=2) + "\n")
