import math
import re
import pytest
from pydantic import ValidationError

from fraclab.core.errors import DomainError, HypothesisError, LabError
from fraclab.core.ledger import load_constants, write_constants
from fraclab.schemas.experiment import ExperimentConfig
from fraclab.services.experiment import CRITERIA_HEADER, ExperimentService
from fraclab.utils.config_file import parse_config_text
from fraclab.utils.csvio import format_value, read_csv

FAST = {
    "grid": {"M": 64},
    "criteria": {"search": {"centers_per_component": 8, "sigma_per_decade": 2, "sigma_decades": 3}},
    "workers": 2,
}


def fast_config(**sections) -> ExperimentConfig:
    data = {key: dict(value) if isinstance(value, dict) else value for key, value in FAST.items()}
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key] = {**data[key], **value}
        else:
            data[key] = value
    return ExperimentConfig.model_validate(data)


def test_parse_config_text():
    text = """
    # reference run
    pipeline = condition-sweep
    model.p = 3          # cubic
    model.theta = 1.0
    criteria.T = inf
    criteria.select = (necessary_subcritical, sufficient_qnorm)
    domain = (0, 1)
    measure.weighted = no
    """
    data = parse_config_text(text)
    assert data["pipeline"] == "condition-sweep"
    assert data["model"] == {"p": 3, "theta": 1.0}
    assert math.isinf(data["criteria"]["T"])
    assert data["criteria"]["select"] == ("necessary_subcritical", "sufficient_qnorm")
    assert data["domain"] == (0, 1)
    assert data["measure"]["weighted"] is False


@pytest.mark.parametrize("text", ["model.p 3", "seed = 1\nseed = 2", "model = 1\nmodel.p = 3"])
def test_parse_config_text_errors(text):
    with pytest.raises(DomainError):
        parse_config_text(text)


def test_domain_shorthands():
    assert ExperimentConfig.model_validate({"domain": (0, 1)}).domain.intervals == ((0.0, 1.0),)
    union = ExperimentConfig.model_validate({"domain": [(0, 1), (2, 3)]})
    assert union.domain_model().intervals == ((0.0, 1.0), (2.0, 3.0))
    half = ExperimentConfig.model_validate({"domain": "half_space:2", "model": {"N": 2}})
    assert half.domain_model().kind == "half_space"
    assert half.domain_model().dim == 2
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"domain": "sphere"})


def test_config_rejects_unknown_keys():
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"bogus": 1})
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"model": {"theta": 2.0}})
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"seed": -1})


def test_interval_union_needs_one_dimension():
    with pytest.raises(DomainError):
        ExperimentConfig.model_validate({"model": {"N": 2}}).domain_model()


@pytest.mark.parametrize(
    "sections, theorem",
    [
        ({"criteria": {"select": "necessary_critical"}}, "Theorem 3.1"),
        ({"criteria": {"select": "sufficient_qnorm"}, "measure": {"boundary": ((0.0, 1.0),)}}, "Theorem 4.3"),
        ({"criteria": {"select": "sufficient_log", "r": 1.5}, "model": {"p": 2.0}}, "Theorem 4.4"),
        ({"criteria": {"select": "sufficient_log", "locus": "boundary"}, "model": {"p": 2.0}}, "Theorem 4.5"),
    ],
)
def test_condition_sweep_hypotheses(sections, theorem):
    with pytest.raises(HypothesisError) as exc:
        fast_config(**sections).validate_pipeline("condition-sweep")
    assert theorem in str(exc.value)


def test_kappa_star_needs_optimal_profile():
    with pytest.raises(DomainError):
        fast_config(measure={"density": "uniform"}).validate_pipeline("kappa-star")
    config = fast_config(measure={"density": "interior_profile"}, solver={"p_values": (1.5,)})
    with pytest.raises(HypothesisError) as exc:
        config.validate_pipeline("kappa-star")
    assert "Theorem 1.1(i)" in str(exc.value)


def test_grid_pipelines_need_bounded_interval():
    config = fast_config(domain="half_space:1")
    with pytest.raises(DomainError):
        config.validate_pipeline("picard-run")
    with pytest.raises(DomainError):
        fast_config().validate_pipeline("optimize")


def test_condition_sweep_on_zero_datum(workspace):
    out, ledger = workspace
    paths = ExperimentService(fast_config(), out=out, ledger=ledger).run("condition-sweep")
    assert {p.name for p in paths} == {"criteria.csv", "criteria_profiles.csv", "criteria_parameters.csv"}
    header, rows = read_csv(out / "criteria.csv")
    assert tuple(header) == CRITERIA_HEADER
    assert [r[0] for r in rows] == ["necessary_subcritical", "sufficient_kernel_integral"]
    assert all(r[header.index("value")] == "0" for r in rows)
    assert all(r[header.index("verdict")] == "n/a" for r in rows)
    _, params = read_csv(out / "criteria_parameters.csv")
    assert ["pipeline", "condition-sweep"] in params
    assert ["grid.M", "64"] in params


def test_ledger_constants_drive_verdicts(workspace):
    out, ledger = workspace
    write_constants({"gamma1": 1e-12, "gamma": 1e12}, ledger)
    config = fast_config(measure={"density": "uniform", "amplitude": 0.1})
    ExperimentService(config, out=out, ledger=ledger).run("condition-sweep")
    header, rows = read_csv(out / "criteria.csv")
    verdicts = {r[0]: r[header.index("verdict")] for r in rows}
    assert verdicts == {"necessary_subcritical": "nonexistence", "sufficient_kernel_integral": "existence"}


def test_condition_sweep_over_amplitudes(workspace):
    out, ledger = workspace
    config = fast_config(
        measure={"density": "uniform"},
        criteria={"select": "necessary_subcritical", "kappas": (0.5, 1.0)},
    )
    ExperimentService(config, out=out, ledger=ledger).run("condition-sweep")
    header, rows = read_csv(out / "criteria.csv")
    values = [float(r[header.index("value")]) for r in rows]
    assert len(values) == 2
    assert values[1] == pytest.approx(2 * values[0], rel=1e-9)


def test_ledger_is_write_once(tmp_path):
    ledger = tmp_path / "constants.json"
    assert load_constants(ledger) == {}
    write_constants({"gamma": 2.0}, ledger)
    assert load_constants(ledger) == {"gamma": 2.0}
    with pytest.raises(LabError):
        write_constants({"gamma": 3.0}, ledger)
    write_constants({"gamma": 3.0}, ledger, overwrite=True)
    assert load_constants(ledger)["gamma"] == 3.0


def test_csv_formatting():
    assert format_value(0.0) == "0"
    assert format_value(math.inf) == "inf"
    assert format_value(True) == "true"
    assert format_value(None) == ""
    assert format_value((1.0, 2.5)) == "1;2.5"
    assert format_value(0.1) == "0.10000000000000001"


def test_picard_run_on_zero_datum(workspace):
    out, ledger = workspace
    config = fast_config(solver={"schedule_length": 3})
    ExperimentService(config, out=out, ledger=ledger).run("picard-run")
    header, rows = read_csv(out / "picard_runs.csv")
    assert len(rows) == 3
    assert all(r[header.index("verdict")] == "converged" for r in rows)
    assert all(r[header.index("iterations")] == "1" for r in rows)
    header, trace = read_csv(out / "picard_trace.csv")
    assert [r[header.index("sup_history")] for r in trace] == ["0"] * 3


@pytest.mark.slow
def test_kappa_star_for_boundary_profile_below_interior_exponent(workspace):
    out, ledger = workspace
    config = fast_config(
        measure={"density": "boundary_profile", "center": 0.0},
        solver={"p_values": (1.8,), "schedule_length": 2, "tol_kappa": 0.25},
    )
    ExperimentService(config, out=out, ledger=ledger).run("kappa-star")
    header, rows = read_csv(out / "kappa_star.csv")
    (row,) = rows
    assert row[header.index("unbounded_above")] == "false"
    assert 0 < float(row[header.index("kappa_lo")]) < float(row[header.index("kappa_hi")]) < math.inf


@pytest.mark.slow
def test_calibration_brackets_every_reference_family(workspace):
    out, ledger = workspace
    config = fast_config(solver={"schedule_length": 2, "tol_kappa": 0.25})
    ExperimentService(config, out=out, ledger=ledger).run("calibrate-constants")
    constants = load_constants(ledger)
    keys = ("gamma1", "gamma1_interior_critical", "gamma1_boundary_critical")
    assert all(math.isfinite(constants[key]) and constants[key] > 0 for key in keys)
    header, rows = read_csv(out / "calibration.csv")
    sources = {r[0]: r[header.index("source")] for r in rows}
    for key in keys:
        kappa_lo = float(re.search(r"κ_lo=([0-9.e+-]+)", sources[key]).group(1))
        assert kappa_lo < config.solver.ceiling
