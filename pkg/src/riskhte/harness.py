"""Replication sweeps over scenarios, aggregation and plot-ready output."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import metrics
from .glm import expit
from .models import (
    ALL_KINDS,
    CANDIDATE_KINDS,
    ModelFitError,
    fit_candidate,
    fit_risk_model,
    predict_benefit,
    select_adaptive,
)
from .scenarios import (
    HARM_LABELS,
    Population,
    Scenario,
    prepare_scenario,
    sample_trial,
    treatment_lp,
)

log = logging.getLogger(__name__)

QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)
QUANTILE_COLUMNS = ("q025", "q25", "q50", "q75", "q975")
METRICS = ("rmse", "c_for_benefit", "ici_benefit")
FAST_REPLICATIONS = 200
FAST_SUPERPOP = 100_000

# stream purposes within a scenario
_SUPERPOP_STREAM = 0
_TRIAL_STREAM = 1


def rng_stream(master_seed: int, scenario_id: int, purpose: int, index: int = 0) -> np.random.Generator:
    """Independent counter-based (Philox) stream keyed by its coordinates."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(scenario_id), purpose, int(index)))
    return np.random.Generator(np.random.Philox(seq))


@dataclass
class RunConfig:
    scenario_ids: tuple[int, ...]
    replications: int = 500
    superpop_size: int = 500_000
    master_seed: int = 20240101
    worker_count: int = 1
    output_dir: Path | None = None
    metric_pop: str = "superpop"

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.superpop_size < 1000:
            raise ValueError("superpop_size must be at least 1,000")
        if self.metric_pop not in ("superpop", "trial"):
            raise ValueError("metric_pop must be 'superpop' or 'trial'")

    @classmethod
    def fast(cls, scenario_ids, **kw) -> "RunConfig":
        kw.setdefault("replications", FAST_REPLICATIONS)
        kw.setdefault("superpop_size", FAST_SUPERPOP)
        return cls(scenario_ids=tuple(scenario_ids), **kw)


@dataclass
class ReplicationResult:
    scenario_id: int
    replication: int
    method: str
    rmse: float = math.nan
    c_for_benefit: float = math.nan
    ici_benefit: float = math.nan
    selected_model: str = ""
    failed: bool = False
    reason: str = ""


RESULT_COLUMNS = tuple(f.name for f in fields(ReplicationResult))

_FIT_ERRORS = (ModelFitError, np.linalg.LinAlgError, ValueError)


def _benefit_metrics(pop: Population, pred: np.ndarray) -> tuple[float, float]:
    pairs = metrics.match_pairs(pop, pred)
    try:
        cb = metrics.c_for_benefit(pairs)
    except metrics.UndefinedMetricError:
        cb = math.nan
    try:
        ici = metrics.ici_for_benefit(pairs)
    except ValueError:
        ici = math.nan
    return cb, ici


def run_replication(
    scenario: Scenario,
    superpop: Population,
    rep_index: int,
    master_seed: int,
    metric_pop: str = "superpop",
) -> list[ReplicationResult]:
    """Sample one trial, fit every method and score it against the truth."""
    trial = sample_trial(scenario, rng_stream(master_seed, scenario.id, _TRIAL_STREAM, rep_index))
    rows = {k: ReplicationResult(scenario.id, rep_index, k) for k in ALL_KINDS}

    try:
        risk = fit_risk_model(trial)
    except _FIT_ERRORS as exc:
        for r in rows.values():
            r.failed, r.reason = True, f"risk model: {exc}"
        return list(rows.values())

    fitted = {}
    for kind in ("stratified",) + CANDIDATE_KINDS:
        try:
            fitted[kind] = fit_candidate(kind, trial, risk)
        except _FIT_ERRORS as exc:
            rows[kind].failed, rows[kind].reason = True, str(exc)
    try:
        fitted["adaptive"] = select_adaptive([fitted.get(k) for k in CANDIDATE_KINDS])
        rows["adaptive"].selected_model = fitted["adaptive"].selected_kind
    except ModelFitError as exc:
        rows["adaptive"].failed, rows["adaptive"].reason = True, str(exc)

    lp_super = risk.baseline_lp(superpop.covariates)
    lp_trial = risk.baseline_lp(trial.covariates) if metric_pop == "trial" else None
    scored: dict[str, tuple[float, float, float]] = {}
    for kind, model in fitted.items():
        base = model.selected_kind if kind == "adaptive" else kind
        if base not in scored:
            pred = predict_benefit(model, lp_super)
            err = metrics.rmse(superpop.true_benefit, pred)
            if metric_pop == "trial":
                cb, ici = _benefit_metrics(trial, predict_benefit(model, lp_trial))
            else:
                cb, ici = _benefit_metrics(superpop, pred)
            scored[base] = (err, cb, ici)
        row = rows[kind]
        row.rmse, row.c_for_benefit, row.ici_benefit = scored[base]
    return [rows[k] for k in ALL_KINDS]


# ------------------------------------------------------------------ sweeps

_WORKER_STATE: dict = {}


def _init_worker(state):
    _WORKER_STATE.update(state)


def _run_chunk(args):
    sid, reps = args
    scenario, superpop = _WORKER_STATE["prepared"][sid]
    out = []
    for rep in reps:
        out.extend(
            run_replication(scenario, superpop, rep, _WORKER_STATE["seed"], _WORKER_STATE["metric_pop"])
        )
    return out


def prepare(scenario: Scenario, config: RunConfig) -> tuple[Scenario, Population]:
    rng = rng_stream(config.master_seed, scenario.id, _SUPERPOP_STREAM)
    return prepare_scenario(scenario, config.superpop_size, rng)


def simulate(scenarios, config: RunConfig, progress=None) -> tuple[list[ReplicationResult], list[Scenario]]:
    """Run every replication of every selected scenario.

    Output ordering is (scenario id, replication, method), independent of the
    number of workers.
    """
    wanted = set(config.scenario_ids)
    chosen = sorted((s for s in scenarios if s.id in wanted), key=lambda s: s.id)
    missing = wanted - {s.id for s in chosen}
    if missing:
        raise KeyError(f"scenario ids not in grid: {sorted(missing)}")

    results: list[ReplicationResult] = []
    resolved: list[Scenario] = []
    for scn in chosen:
        scn_resolved, superpop = prepare(scn, config)
        resolved.append(scn_resolved)
        log.info("scenario %d: harm %.5f", scn.id, scn_resolved.harm_value)
        state = {
            "prepared": {scn.id: (scn_resolved, superpop)},
            "seed": config.master_seed,
            "metric_pop": config.metric_pop,
        }
        reps = list(range(config.replications))
        if config.worker_count <= 1:
            _init_worker(state)
            for rep in reps:
                results.extend(run_replication(scn_resolved, superpop, rep, config.master_seed, config.metric_pop))
                if progress:
                    progress(scn.id, rep)
        else:
            size = max(1, len(reps) // (4 * config.worker_count))
            chunks = [(scn.id, reps[i:i + size]) for i in range(0, len(reps), size)]
            with ProcessPoolExecutor(config.worker_count, initializer=_init_worker, initargs=(state,)) as ex:
                for chunk_rows in ex.map(_run_chunk, chunks):
                    results.extend(chunk_rows)
    return results, resolved


def _fmt_float(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def write_results(results, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in results:
            w.writerow(
                [r.scenario_id, r.replication, r.method, _fmt_float(r.rmse), _fmt_float(r.c_for_benefit),
                 _fmt_float(r.ici_benefit), r.selected_model, int(r.failed), r.reason]
            )


def read_results(path) -> list[ReplicationResult]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                ReplicationResult(
                    scenario_id=int(row["scenario_id"]),
                    replication=int(row["replication"]),
                    method=row["method"],
                    rmse=float(row["rmse"]) if row["rmse"] else math.nan,
                    c_for_benefit=float(row["c_for_benefit"]) if row["c_for_benefit"] else math.nan,
                    ici_benefit=float(row["ici_benefit"]) if row["ici_benefit"] else math.nan,
                    selected_model=row["selected_model"],
                    failed=row["failed"] == "1",
                    reason=row["reason"],
                )
            )
    return out


def write_resolved(resolved, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario_id", "harm_label", "harm_value"])
        for s in resolved:
            w.writerow([s.id, s.harm_label, _fmt_float(s.harm_value)])


def run_to_dir(scenarios, config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    results, resolved = simulate(scenarios, config)
    write_results(results, out / "results.csv")
    write_resolved(resolved, out / "harms.csv")
    return out


# ------------------------------------------------------------- aggregation

@dataclass
class Summary:
    metrics: list[dict] = field(default_factory=list)
    selection: list[dict] = field(default_factory=list)

    def metric_row(self, scenario_id: int, method: str, metric: str) -> dict:
        for r in self.metrics:
            if r["scenario_id"] == scenario_id and r["method"] == method and r["metric"] == metric:
                return r
        raise KeyError((scenario_id, method, metric))

    def median(self, scenario_id: int, method: str, metric: str = "rmse") -> float:
        return self.metric_row(scenario_id, method, metric)["q50"]

    def selection_frequency(self, scenario_id: int) -> dict[str, float]:
        return {
            r["model"]: r["frequency"] for r in self.selection if r["scenario_id"] == scenario_id
        }

    @property
    def scenario_ids(self) -> list[int]:
        return sorted({r["scenario_id"] for r in self.metrics})


def aggregate(results) -> Summary:
    """Per (scenario, method, metric) quantiles, plus adaptive selection shares."""
    results = list(results)
    if not results:
        raise ValueError("no results to aggregate")
    by_key: dict[tuple[int, str], list[ReplicationResult]] = {}
    for r in results:
        by_key.setdefault((r.scenario_id, r.method), []).append(r)

    summary = Summary()
    order = {k: i for i, k in enumerate(ALL_KINDS)}
    for (sid, method) in sorted(by_key, key=lambda k: (k[0], order.get(k[1], 99), k[1])):
        rows = by_key[(sid, method)]
        for metric in METRICS:
            vals = np.array([getattr(r, metric) for r in rows if not r.failed], dtype=float)
            finite = vals[np.isfinite(vals)]
            rec = {
                "scenario_id": sid,
                "method": method,
                "metric": metric,
                "n": int(finite.size),
                "n_failed": sum(r.failed for r in rows),
                "n_missing": int(vals.size - finite.size),
                "mean": float(finite.mean()) if finite.size else math.nan,
            }
            qs = np.quantile(finite, QUANTILES) if finite.size else [math.nan] * len(QUANTILES)
            rec.update({c: float(q) for c, q in zip(QUANTILE_COLUMNS, qs)})
            summary.metrics.append(rec)

        if method == "adaptive":
            picked = [r.selected_model for r in rows if not r.failed and r.selected_model]
            total = len(picked)
            for kind in CANDIDATE_KINDS:
                count = picked.count(kind)
                summary.selection.append(
                    {
                        "scenario_id": sid,
                        "model": kind,
                        "count": count,
                        "frequency": count / total if total else math.nan,
                        "n_failed": sum(r.failed for r in rows),
                    }
                )
    return summary


SUMMARY_COLUMNS = ("scenario_id", "method", "metric", "n", "n_failed", "n_missing", "mean") + QUANTILE_COLUMNS
SELECTION_COLUMNS = ("scenario_id", "model", "count", "frequency", "n_failed")


def selection_path(summary_path) -> Path:
    p = Path(summary_path)
    return p.with_name(p.stem + "_selection" + (p.suffix or ".csv"))


def write_summary(summary: Summary, path) -> None:
    for rows, cols, target in (
        (summary.metrics, SUMMARY_COLUMNS, Path(path)),
        (summary.selection, SELECTION_COLUMNS, selection_path(path)),
    ):
        with open(target, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([_fmt_float(r[c]) if isinstance(r[c], float) else r[c] for c in cols])


def read_summary(path) -> Summary:
    def conv(row):
        out = {}
        for k, v in row.items():
            if k in ("scenario_id", "n", "n_failed", "n_missing", "count"):
                out[k] = int(v)
            elif k in ("method", "metric", "model"):
                out[k] = v
            else:
                out[k] = float(v) if v != "" else math.nan
        return out

    summary = Summary()
    with open(path, newline="") as fh:
        summary.metrics = [conv(r) for r in csv.DictReader(fh)]
    sel = selection_path(path)
    if sel.exists():
        with open(sel, newline="") as fh:
            summary.selection = [conv(r) for r in csv.DictReader(fh)]
    return summary


# ------------------------------------------------------------ figure data

def scenario_id(effect: str, shape: str, n: int = 4250, auc: float = 0.75, harm: str = "absent") -> int:
    """Grid id of a risk-based scenario.

    ``shape`` is one of constant, linear-moderate, linear-strong,
    quadratic-moderate, quadratic-strong, non-monotonic.
    """
    effects = ("absent", "moderate", "high")
    shapes = ("constant", "linear-moderate", "linear-strong", "quadratic-moderate",
              "quadratic-strong", "non-monotonic")
    sizes = (4250, 1063, 17000)
    aucs = (0.75, 0.65, 0.85)
    return (
        effects.index(effect) * 216
        + shapes.index(shape) * 36
        + sizes.index(n) * 12
        + aucs.index(auc) * 4
        + HARM_LABELS.index(harm)
        + 1
    )


_PANEL_SHAPES = (("A", "constant"), ("B", "linear-strong"), ("C", "quadratic-strong"), ("D", "non-monotonic"))
_INTERACTION_TYPES = {
    "S13": ("weak", "mixed", "strong"),
    "S14": ("negative-weak", "negative-mixed", "negative-strong"),
    "S15": ("combined",),
}
_INTERACTION_BASE = {"weak": 649, "mixed": 653, "strong": 657, "negative-weak": 661,
                     "negative-mixed": 665, "negative-strong": 669, "combined": 673}

FIGURES = {
    "1": dict(metric="rmse", effect="moderate", n=4250, auc=0.75),
    "2": dict(metric="rmse", effect="moderate", n=17000, auc=0.75),
    "3": dict(metric="rmse", effect="moderate", n=4250, auc=0.85),
    "4": dict(metric="c_for_benefit", effect="moderate", n=4250, auc=0.75),
    "5": dict(metric="ici_benefit", effect="moderate", n=4250, auc=0.75),
    "S3": dict(metric="selection", effect="moderate", n=4250, auc=0.75),
    "S4": dict(metric="selection", effect="moderate", n=17000, auc=0.75),
    "S5": dict(metric="selection", effect="moderate", n=4250, auc=0.85),
    "S6": dict(metric="c_for_benefit", effect="moderate", n=17000, auc=0.75),
    "S7": dict(metric="c_for_benefit", effect="moderate", n=4250, auc=0.85),
    "S8": dict(metric="ici_benefit", effect="moderate", n=17000, auc=0.75),
    "S9": dict(metric="ici_benefit", effect="moderate", n=4250, auc=0.85),
    "S10": dict(metric="rmse", effect="high", n=4250, auc=0.75),
    "S11": dict(metric="rmse", effect="high", n=17000, auc=0.75),
    "S12": dict(metric="rmse", effect="high", n=4250, auc=0.85),
    "S13": dict(metric="rmse", interaction=True),
    "S14": dict(metric="rmse", interaction=True),
    "S15": dict(metric="rmse", interaction=True),
}


def figure_panels(figure_id: str) -> dict[str, list[int]]:
    """Panel label -> scenario ids (one per harm level) for a figure."""
    spec = FIGURES[figure_id]
    if spec.get("interaction"):
        return {
            t: [_INTERACTION_BASE[t] + i for i in range(4)] for t in _INTERACTION_TYPES[figure_id]
        }
    return {
        panel: [scenario_id(spec["effect"], shape, spec["n"], spec["auc"], h) for h in HARM_LABELS]
        for panel, shape in _PANEL_SHAPES
    }


def truth_curve(scenario: Scenario, harms: dict[str, float], n_points: int = 101) -> list[list[float]]:
    """Baseline risk vs true benefit, one column per harm level.

    The risk grid spans the 0.5th-99.5th percentiles of control risk implied
    by the scenario's coefficients (normal approximation to the linear
    predictor).
    """
    b = np.asarray(scenario.beta)
    mean = b[0] + 0.2 * b[5:].sum()
    sd = math.sqrt(float((b[1:5] ** 2).sum() + 0.16 * (b[5:] ** 2).sum()))
    lp = np.linspace(mean - 2.576 * sd, mean + 2.576 * sd, n_points)
    p0 = expit(lp)
    p1 = expit(treatment_lp(lp, scenario.gamma, scenario.c))
    rows = []
    for i in range(n_points):
        rows.append([float(p0[i])] + [float(p0[i] - min(max(p1[i] + harms[h], 0.0), 1.0)) for h in HARM_LABELS])
    return rows


def emit_figure_data(summary: Summary, figure_id: str, out_dir, scenarios=None, harms=None) -> list[Path]:
    """Write plot-ready files for one figure; returns the written paths."""
    if figure_id not in FIGURES:
        raise KeyError(f"unknown figure {figure_id!r}; choose from {sorted(FIGURES)}")
    spec = FIGURES[figure_id]
    panels = figure_panels(figure_id)
    have = set(summary.scenario_ids)
    missing = sorted({sid for ids in panels.values() for sid in ids} - have)
    if missing:
        raise KeyError(f"figure {figure_id} needs scenarios missing from the summary: {missing}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for panel, ids in panels.items():
        path = out / f"figure{figure_id}_{panel}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if spec["metric"] == "selection":
                w.writerow(["scenario_id", "harm_label", "model", "count", "frequency"])
                for sid, harm in zip(ids, HARM_LABELS):
                    for r in summary.selection:
                        if r["scenario_id"] == sid:
                            w.writerow([sid, harm, r["model"], r["count"], _fmt_float(r["frequency"])])
            else:
                w.writerow(["scenario_id", "harm_label", "method", "metric", *QUANTILE_COLUMNS])
                for sid, harm in zip(ids, HARM_LABELS):
                    for r in summary.metrics:
                        if r["scenario_id"] == sid and r["metric"] == spec["metric"]:
                            w.writerow([sid, harm, r["method"], r["metric"],
                                        *(_fmt_float(r[c]) for c in QUANTILE_COLUMNS)])
        written.append(path)

    if scenarios is not None and not spec.get("interaction"):
        by_id = {s.id: s for s in scenarios}
        for panel, ids in panels.items():
            base = by_id[ids[0]]
            panel_harms = {h: 0.0 for h in HARM_LABELS}
            for sid, h in zip(ids, HARM_LABELS):
                if harms and sid in harms:
                    panel_harms[h] = harms[sid]
            path = out / f"figure{figure_id}_{panel}_truth.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["baseline_risk", *(f"benefit_{h}" for h in HARM_LABELS)])
                for row in truth_curve(base, panel_harms):
                    w.writerow([_fmt_float(v) for v in row])
            written.append(path)
    return written


def resolve_harms_for(scenarios, ids, size: int = 100_000, seed: int = 0) -> dict[int, float]:
    """Harm values for the given ids on a fresh super-population."""
    by_id = {s.id: s for s in scenarios}
    out = {}
    for sid in ids:
        scn, _ = prepare_scenario(by_id[sid], size, rng_stream(seed, sid, _SUPERPOP_STREAM))
        out[sid] = scn.harm_value
    return out


def read_harms(path) -> dict[int, float]:
    with open(path, newline="") as fh:
        return {int(r["scenario_id"]): float(r["harm_value"]) for r in csv.DictReader(fh)}
