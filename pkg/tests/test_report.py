import pytest

from fraclab.core.errors import DomainError
from fraclab.services.experiment import KAPPA_HEADER
from fraclab.services.report import ReportService
from fraclab.utils.csvio import read_csv, write_csv


def test_empty_directory_gives_empty_summary(tmp_path):
    path = ReportService(tmp_path).emit_report()
    assert path.name == "summary.md"
    assert "No experiment artifacts" in path.read_text(encoding="utf-8")


def test_missing_directory_rejected(tmp_path):
    with pytest.raises(DomainError):
        ReportService(tmp_path / "absent").emit_report()


def test_kappa_star_section_and_plot_data(tmp_path):
    row = (3.0, 1.0, "interior_profile", 0.5, 1.25, 1.3125, 0.015625, True, 2.5, 1.0, False)
    write_csv(tmp_path / "kappa_star.csv", KAPPA_HEADER, [row])
    text = ReportService(tmp_path).emit_report().read_text(encoding="utf-8")
    assert "## kappa-star" in text
    assert "### kappa_star (1 rows)" in text
    assert "`kappa_star_parameters.csv` (skipped)" in text
    assert "No experiment artifacts" not in text

    header, pairs = read_csv(tmp_path / "plots" / "kappa_lo_vs_p.csv")
    assert header == ["x", "y"]
    assert pairs == [["3", "1.25"]]
    assert (tmp_path / "plots" / "kappa_hi_vs_p.csv").exists()


def test_sections_follow_pipeline_order(tmp_path):
    write_csv(tmp_path / "criteria.csv", ("kind", "value"), [("necessary_subcritical", 0.5)])
    write_csv(tmp_path / "criteria_parameters.csv", ("key", "value"), [("model.p", 3.0)])
    write_csv(tmp_path / "kernel_diagnostics.csv", ("quantity", "value"), [("symmetry", 0.0)])
    write_csv(tmp_path / "kernel_diagnostics_parameters.csv", ("key", "value"), [("grid.M", 64)])
    text = ReportService(tmp_path).emit_report().read_text(encoding="utf-8")
    assert text.index("## kernel-diagnostics") < text.index("## condition-sweep")
    assert "| model.p | 3 |" in text


def test_kernel_cross_section_becomes_plot_data(tmp_path):
    rows = [(0.01, 0.25, 1.5), (0.01, 0.75, 1.5), (0.1, 0.25, 0.5)]
    write_csv(tmp_path / "kernel_cross_section.csv", ("t", "x", "G"), rows)
    service = ReportService(tmp_path)
    written = sorted(p.name for p in service.plot_data())
    assert written == ["kernel_cross_section_t=0.01.csv", "kernel_cross_section_t=0.10000000000000001.csv"]
    sections, missing = service.sections()
    assert sections == []
    assert missing == []
