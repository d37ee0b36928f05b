import logging
from collections import defaultdict
from pathlib import Path
from typing import Any
from fraclab.core.config import get_settings
from fraclab.core.errors import DomainError
from fraclab.services.experiment import ARTIFACTS, COMPANIONS
from fraclab.templating import templates
from fraclab.utils.csvio import read_csv, write_csv

settings = get_settings()
logger = logging.getLogger(__name__)

SUMMARY = "summary.md"
PLOTS_DIR = "plots"


class ReportService:
    """Collects the CSV artifacts of a run directory into ``summary.md`` and
    derives (x, y) plot-data files from them."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)

    def _table(self, stem: str) -> dict[str, Any] | None:
        path = self.directory / f"{stem}.csv"
        if not path.exists():
            return None
        header, rows = read_csv(path)
        return {"name": stem, "header": header, "rows": rows}

    def sections(self) -> tuple[list[dict[str, Any]], list[str]]:
        """One section per pipeline that left artifacts, in pipeline order.

        Returns:
            (sections, names of expected artifacts that are missing).
        """
        sections, missing = [], []
        for pipeline, stem in ARTIFACTS.items():
            params = self._table(f"{stem}_parameters")
            main = self._table(stem)
            if params is None and main is None:
                continue
            section = {"pipeline": pipeline, "parameters": params["rows"] if params else [], "tables": []}
            for name in (stem, *COMPANIONS[pipeline]):
                table = main if name == stem else self._table(name)
                if table is None:
                    missing.append(f"{name}.csv")
                    logger.warning(f"Artifact {name}.csv of {pipeline} is missing; skipped")
                    continue
                # cross-sections are summarized through plot data only
                if name != "kernel_cross_section":
                    section["tables"].append(table)
            if params is None:
                missing.append(f"{stem}_parameters.csv")
            sections.append(section)
        return sections, missing

    def plot_data(self) -> list[Path]:
        """Kernel cross-sections x ↦ G(x_mid, x, t) per t and κ* bracket ends vs p."""
        written: list[Path] = []
        plots = self.directory / PLOTS_DIR
        section = self._table("kernel_cross_section")
        if section is not None:
            by_time: dict[str, list[tuple[str, str]]] = defaultdict(list)
            for t, x, g in section["rows"]:
                by_time[t].append((x, g))
            for t, pairs in by_time.items():
                written.append(write_csv(plots / f"kernel_cross_section_t={t}.csv", ("x", "y"), pairs))
        kappa = self._table("kappa_star")
        if kappa is not None:
            col = {name: i for i, name in enumerate(kappa["header"])}
            rows = sorted(kappa["rows"], key=lambda r: float(r[col["p"]]))
            for end in ("kappa_lo", "kappa_hi"):
                pairs = [(r[col["p"]], r[col[end]]) for r in rows]
                written.append(write_csv(plots / f"{end}_vs_p.csv", ("x", "y"), pairs))
        return written

    def emit_report(self) -> Path:
        """Write ``summary.md`` for the directory; an empty directory yields an empty summary.

        Raises:
            DomainError: the directory does not exist.
        """
        if not self.directory.is_dir():
            raise DomainError(f"artifact directory {self.directory} does not exist")
        sections, missing = self.sections()
        plots = [str(p.relative_to(self.directory)) for p in self.plot_data()]
        text = templates.get_template("summary.md.j2").render(
            title=f"{settings.APP_NAME} summary",
            directory=self.directory.name,
            sections=sections,
            plots=plots,
            missing=missing,
        )
        path = self.directory / SUMMARY
        path.write_text(text, encoding="utf-8")
        logger.info(f"Summary with {len(sections)} sections written to {path}")
        return path
