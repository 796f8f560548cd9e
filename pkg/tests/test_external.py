import json

import numpy as np
import pytest

from riskhte import cli
from riskhte.external import (
    ColumnSpec,
    DataFormatError,
    SingleClassOutcomeError,
    apply_external,
    cross_validate,
    fit_method,
    read_trial_csv,
    write_trial_csv,
)
from riskhte.models import fit_candidate, fit_risk_model, predict_benefit
from riskhte.scenarios import default_scenarios, sample_trial

SPEC = ColumnSpec("outcome", "treatment", tuple(f"x{i}" for i in range(1, 9)))


@pytest.fixture(scope="module")
def by_id():
    return {s.id: s for s in default_scenarios()}


@pytest.fixture(scope="module")
def trial(by_id):
    return sample_trial(by_id[217], np.random.default_rng(42))


@pytest.fixture()
def trial_file(trial, tmp_path):
    p = tmp_path / "trial.csv"
    write_trial_csv(trial, p)
    return p


def test_roundtrip_reproduces_in_memory_fit_exactly(trial, trial_file):
    data = read_trial_csv(trial_file, SPEC)
    np.testing.assert_array_equal(data.covariates, trial.covariates)
    np.testing.assert_array_equal(data.z, trial.z)
    np.testing.assert_array_equal(data.y, trial.y)
    result = apply_external(trial_file, SPEC, method="rcs-3", folds=3)
    risk = fit_risk_model(trial)
    lp = risk.baseline_lp(trial.covariates)
    np.testing.assert_array_equal(result.lp0_hat, lp)
    np.testing.assert_array_equal(result.predicted_benefit, predict_benefit(fit_candidate("rcs-3", trial, risk), lp))


def test_adaptive_reports_all_candidate_aics(trial, trial_file):
    result = apply_external(trial_file, SPEC, folds=4, seed=1)
    assert set(result.aic) == {"constant", "linear", "rcs-3", "rcs-4", "rcs-5"}
    assert result.aic[result.selected_model] == min(result.aic.values())
    assert 0 <= result.cv_c_for_benefit <= 1
    assert result.cv_ici_benefit >= 0


def test_constant_truth_favours_constant_model_by_aic(by_id, tmp_path):
    wins = 0
    for seed in range(5):
        pop = sample_trial(by_id[217], np.random.default_rng(seed))
        p = tmp_path / f"t{seed}.csv"
        write_trial_csv(pop, p)
        _, _, cands = fit_method(read_trial_csv(p, SPEC), "adaptive")
        wins += cands["constant"].aic < cands["rcs-5"].aic
    assert wins >= 4


def test_cross_validation_is_seeded(trial_file):
    data = read_trial_csv(trial_file, SPEC)
    assert cross_validate(data, "linear", 5, seed=3)[:2] == cross_validate(data, "linear", 5, seed=3)[:2]
    with pytest.raises(ValueError):
        cross_validate(data, "linear", folds=1)


def test_outputs_written(trial_file, tmp_path):
    out = tmp_path / "out"
    result = apply_external(trial_file, SPEC, method="linear", folds=3, out_dir=out)
    lines = (out / "benefit.csv").read_text().splitlines()
    assert lines[0] == "row,lp0_hat,predicted_benefit"
    assert len(lines) == 1 + result.lp0_hat.size
    summary = json.loads((out / "summary.json").read_text())
    assert summary["method"] == "linear" and summary["n"] == result.lp0_hat.size


def _write(tmp_path, text):
    p = tmp_path / "d.csv"
    p.write_text(text)
    return p


def test_single_class_outcome(tmp_path):
    p = _write(tmp_path, "y,t,a\n0,0,1.0\n0,1,2.0\n0,0,3.0\n")
    with pytest.raises(SingleClassOutcomeError):
        read_trial_csv(p, ColumnSpec("y", "t", ("a",)))


@pytest.mark.parametrize(
    "text, match",
    [
        ("y,t\n1,0\n", "line 1: missing columns"),
        ("y,t,a\n1,0,2\n0,1\n", "line 3: expected 3 fields"),
        ("y,t,a\n1,0,2\n0,1,\n", "line 3: missing value for 'a'"),
        ("y,t,a\n1,0,2\n2,1,3\n", "line 3: 'y' must be 0 or 1"),
        ("y,t,a\n1,0,2\n0,yes,3\n", "line 3: 't' must be 0 or 1"),
        ("y,t,a\n1,0,2\n0,1,inf\n", "line 3: 'a' is not finite"),
        ("", "empty"),
        ("y,t,a\n", "no data rows"),
    ],
)
def test_parse_errors(tmp_path, text, match):
    with pytest.raises(DataFormatError, match=match):
        read_trial_csv(_write(tmp_path, text), ColumnSpec("y", "t", ("a",)))


def test_categorical_coding(tmp_path):
    p = _write(tmp_path, "y,t,site,g\n1,0,b,1\n0,1,a,2\n1,1,c,1\n0,0,a,3\n")
    data = read_trial_csv(p, ColumnSpec("y", "t", ("site", "g:cat")))
    assert data.design_names == ("site=b", "site=c", "g=2", "g=3")
    np.testing.assert_array_equal(data.covariates[:, :2], [[1, 0], [0, 0], [0, 1], [0, 0]])


def test_column_spec_validation():
    with pytest.raises(DataFormatError):
        ColumnSpec("y", "t", ())
    with pytest.raises(DataFormatError, match="more than once"):
        ColumnSpec("y", "t", ("y",))


# ------------------------------------------------------------------- CLI

def test_parse_ids():
    assert cli.parse_ids("1-3,217, 2") == (1, 2, 3, 217)
    for bad in ("", "5-2", "a"):
        with pytest.raises(Exception):
            cli.parse_ids(bad)


def test_cli_end_to_end(tmp_path, trial_file, capsys):
    run = tmp_path / "run"
    assert cli.main(["simulate", "--ids", "217-220", "--replications", "2", "--superpop", "2000",
                     "--out", str(run)]) == 0
    assert (run / "results.csv").exists() and (run / "harms.csv").exists()
    summary = tmp_path / "summary.csv"
    assert cli.main(["aggregate", "--in", str(run), "--out", str(summary)]) == 0
    assert cli.main(["figure", "--id", "1", "--in", str(summary), "--out", str(tmp_path / "fig")]) == 2
    assert "missing" in capsys.readouterr().err
    assert cli.main(["apply", "--data", str(trial_file), "--outcome", "outcome", "--treatment", "treatment",
                     "--covariates", ",".join(SPEC.covariates), "--method", "constant", "--folds", "3",
                     "--out", str(tmp_path / "ext")]) == 0
    assert (tmp_path / "ext" / "summary.json").exists()
    assert cli.main(["apply", "--data", str(trial_file), "--outcome", "nope", "--treatment", "treatment",
                     "--covariates", "x1", "--out", str(tmp_path / "ext2")]) == 2
