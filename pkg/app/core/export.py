"""CSV export of experiment results.

Every file starts with a block of ``# key: value`` comment lines echoing the run
configuration, followed by one header row and the data rows.
"""

import csv
from io import StringIO
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence, TextIO

from app.core.hodge import SupertraceProfile
from app.core.models import DensityMap, EstimatorRow, StudyRow, SuiteReport

ESTIMATOR_COLUMNS = ["name", "t", "x", "value_re", "value_im", "stderr", "n", "bandwidth", "seed"]
STUDY_COLUMNS = ["epsilon", "residual", "slope"]
CHECK_COLUMNS = ["check", "passed", "measured", "tolerance", "detail"]


def profile_columns(dim: int) -> list[str]:
    return ["t", *[f"x{i + 1}" for i in range(dim)], "str_density", "extrapolated",
            "reference_euler_form", "abs_err"]


def density_columns(dim: int) -> list[str]:
    return [*[f"x{i + 1}" for i in range(dim)], "euler_form", "reference"]


def _write(
    out: TextIO,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    echo: Mapping[str, Any] | None,
) -> None:
    for key, value in (echo or {}).items():
        out.write(f"# {key}: {value}\n")
    writer = csv.writer(out)
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])


def _cell(value: Any) -> Any:
    if isinstance(value, float):
        return "" if value != value else repr(float(value))
    if hasattr(value, "item"):
        return _cell(value.item())
    return value


def _to_file(
    filepath: Path,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    echo: Mapping[str, Any] | None,
) -> Path:
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, "w", newline="", encoding="utf-8") as f:
        _write(f, columns, rows, echo)
    return filepath


def _to_string(
    columns: Sequence[str], rows: Iterable[Sequence[Any]], echo: Mapping[str, Any] | None
) -> str:
    output = StringIO()
    _write(output, columns, rows, echo)
    return output.getvalue()


def export_profile_csv(
    profile: SupertraceProfile, filepath: Path, echo: Mapping[str, Any] | None = None
) -> Path:
    """
    Export a local supertrace profile to CSV.

    One row per (t, x) with the measured density, then one t = 0 row per point
    carrying the extrapolated value, the Euler form reference and the error.

    Args:
        profile: Supertrace profile from the heat experiment
        filepath: Path to save the CSV file
        echo: Configuration echoed into the header block

    Returns:
        Path to the saved file
    """
    columns = profile_columns(profile.points.shape[1])
    return _to_file(filepath, columns, profile.rows(), echo)


def profile_csv_string(profile: SupertraceProfile, echo: Mapping[str, Any] | None = None) -> str:
    return _to_string(profile_columns(profile.points.shape[1]), profile.rows(), echo)


def export_estimates_csv(
    rows: Sequence[EstimatorRow], filepath: Path, echo: Mapping[str, Any] | None = None
) -> Path:
    """Export Monte Carlo estimator rows to CSV."""
    return _to_file(filepath, ESTIMATOR_COLUMNS, [r.cells() for r in rows], echo)


def estimates_csv_string(rows: Sequence[EstimatorRow], echo: Mapping[str, Any] | None = None) -> str:
    return _to_string(ESTIMATOR_COLUMNS, [r.cells() for r in rows], echo)


def export_study_csv(
    rows: Sequence[StudyRow],
    filepath: Path,
    echo: Mapping[str, Any] | None = None,
    parameter: str = "epsilon",
) -> Path:
    """Export order-study rows; the first column is named after the refined parameter."""
    columns = [parameter, *STUDY_COLUMNS[1:]]
    return _to_file(filepath, columns, [(r.parameter, r.residual, r.slope) for r in rows], echo)


def study_csv_string(
    rows: Sequence[StudyRow], echo: Mapping[str, Any] | None = None, parameter: str = "epsilon"
) -> str:
    columns = [parameter, *STUDY_COLUMNS[1:]]
    return _to_string(columns, [(r.parameter, r.residual, r.slope) for r in rows], echo)


def export_density_csv(
    density: DensityMap, filepath: Path, echo: Mapping[str, Any] | None = None
) -> Path:
    """Export a pointwise Euler form map."""
    return _to_file(filepath, density_columns(density.points.shape[1]), density.rows(), echo)


def export_checks_csv(
    report: SuiteReport, filepath: Path, echo: Mapping[str, Any] | None = None
) -> Path:
    """Export the pass/fail table of a verification suite."""
    rows = [
        (c.name, int(c.passed), c.measured, c.tolerance if c.tolerance is not None else "", c.detail)
        for c in report.checks
    ]
    return _to_file(filepath, CHECK_COLUMNS, rows, echo)


def generate_export_filename(command: str, geometry: str | None, kind: str) -> str:
    """
    Generate a filename for export.

    Args:
        command: Subcommand that produced the data
        geometry: Geometry name, or None for geometry-free suites
        kind: Table kind (profile, estimates, study, density, checks)

    Returns:
        Filename string
    """
    name = geometry or "algebra"
    safe_name = "".join(c if c.isalnum() or c in "-_" else "_" for c in name)
    return f"gbcheck_{command}_{safe_name}_{kind}.csv"
