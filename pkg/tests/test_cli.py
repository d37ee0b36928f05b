import pytest

from fraclab.main import EXIT_INVALID, EXIT_OK, run
from fraclab.utils.csvio import read_csv

FAST = """
grid.M = 64
criteria.search.centers_per_component = 8
criteria.search.sigma_per_decade = 2
criteria.search.sigma_decades = 3
workers = 2
"""


@pytest.fixture
def config_file(tmp_path):
    def write(extra: str = "") -> str:
        path = tmp_path / "experiment.cfg"
        path.write_text(FAST + extra, encoding="utf-8")
        return str(path)

    return write


def test_report_on_empty_directory(tmp_path):
    assert run(["report", "--out", str(tmp_path)]) == EXIT_OK
    assert "No experiment artifacts" in (tmp_path / "summary.md").read_text(encoding="utf-8")


def test_report_on_missing_directory(tmp_path, capsys):
    assert run(["report", "--out", str(tmp_path / "absent")]) == EXIT_INVALID
    assert "does not exist" in capsys.readouterr().err


def test_failed_hypothesis_exits_invalid(workspace, config_file, capsys):
    out, _ = workspace
    path = config_file("model.p = 3\ncriteria.select = necessary_critical\n")
    assert run(["condition-sweep", "--config", path, "--out", str(out)]) == EXIT_INVALID
    assert "Theorem 3.1" in capsys.readouterr().err
    assert not (out / "criteria.csv").exists()


def test_negative_seed_exits_invalid(workspace, config_file):
    out, _ = workspace
    assert run(["condition-sweep", "--config", config_file(), "--seed", "-1", "--out", str(out)]) == EXIT_INVALID


def test_unknown_key_exits_invalid(workspace, config_file):
    out, _ = workspace
    assert run(["condition-sweep", "--config", config_file("bogus = 1\n"), "--out", str(out)]) == EXIT_INVALID


def test_missing_config_exits_invalid(workspace, tmp_path):
    out, _ = workspace
    assert run(["condition-sweep", "--config", str(tmp_path / "absent.cfg"), "--out", str(out)]) == EXIT_INVALID


def test_condition_sweep_writes_summary(workspace, config_file):
    out, _ = workspace
    assert run(["condition-sweep", "--config", config_file(), "--out", str(out), "--seed", "3"]) == EXIT_OK
    header, rows = read_csv(out / "criteria.csv")
    assert len(rows) == 2
    _, params = read_csv(out / "criteria_parameters.csv")
    assert ["seed", "3"] in params
    summary = (out / "summary.md").read_text(encoding="utf-8")
    assert "## condition-sweep" in summary
    assert "### criteria (2 rows)" in summary


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["--version"])
    assert exc.value.code == 0
    assert "fraclab" in capsys.readouterr().out
