"""Tests for CSV export."""

import numpy as np
import pytest

from app.core.export import (
    CHECK_COLUMNS,
    estimates_csv_string,
    export_checks_csv,
    export_density_csv,
    export_profile_csv,
    export_study_csv,
    generate_export_filename,
    profile_csv_string,
    study_csv_string,
)
from app.core.hodge import SupertraceProfile
from app.core.models import CheckResult, DensityMap, EstimatorRow, StudyRow, SuiteReport


@pytest.fixture
def profile():
    """A two-time, one-point supertrace profile."""
    return SupertraceProfile(
        times=(0.1, 0.2),
        points=np.array([[0.5, 1.5]]),
        density=np.array([[0.11], [0.12]]),
        extrapolated=np.array([0.1]),
        error=np.array([np.nan]),
        reference=np.array([0.095]),
    )


def data_lines(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


class TestProfileExport:
    """Tests for the supertrace profile table."""

    def test_header_and_rows(self, profile):
        """Should write one row per (t, x) and one extrapolated row per point."""
        lines = data_lines(profile_csv_string(profile))
        assert lines[0] == "t,x1,x2,str_density,extrapolated,reference_euler_form,abs_err"
        assert len(lines) == 4
        assert lines[-1].startswith("0.0,0.5,1.5,,0.1,0.095,")

    def test_echo_block(self, profile):
        """Should start with the configuration echo."""
        text = profile_csv_string(profile, {"command": "heat", "seed": 0})
        assert text.splitlines()[:2] == ["# command: heat", "# seed: 0"]

    def test_writes_file(self, profile, tmp_path):
        """Should create missing directories and write the table."""
        path = export_profile_csv(profile, tmp_path / "out" / "profile.csv")
        assert path.exists()
        assert path.read_text(encoding="utf-8").splitlines() == profile_csv_string(profile).splitlines()


class TestOtherTables:
    """Tests for the estimator, study, density and check tables."""

    def test_estimates(self):
        """Should flatten estimator rows."""
        row = EstimatorRow("str", 0.1, (0.0, 1.0), complex(0.25), 0.01, 1000, 0.05, 42)
        lines = data_lines(estimates_csv_string([row]))
        assert lines[0].startswith("name,t,x,value_re,value_im")
        assert lines[1] == "str,0.1,0 1,0.25,0.0,0.01,1000,0.05,42"

    def test_study_parameter_column(self):
        """Should name the first column after the refined parameter."""
        rows = [StudyRow(0.1, 1e-3, 2.0), StudyRow(0.05, 2.5e-4, 2.0)]
        lines = data_lines(study_csv_string(rows, parameter="step"))
        assert lines[0] == "step,residual,slope"
        assert lines[2] == "0.05,0.00025,2.0"

    def test_study_file(self, tmp_path):
        """Should write the study table to disk."""
        path = export_study_csv([StudyRow(0.1, 1e-3, float("nan"))], tmp_path / "s.csv")
        assert path.read_text(encoding="utf-8").splitlines()[1] == "0.1,0.001,"

    def test_density(self, tmp_path):
        """Should leave the reference column empty when there is none."""
        density = DensityMap(np.array([[0.0, 0.0]]), np.array([0.5]))
        path = export_density_csv(density, tmp_path / "d.csv")
        assert path.read_text(encoding="utf-8").splitlines() == ["x1,x2,euler_form,reference",
                                                                  "0.0,0.0,0.5,"]

    def test_checks(self, tmp_path):
        """Should write one row per check with a 0/1 pass flag."""
        report = SuiteReport("curvature")
        report.add(CheckResult.below("bianchi", 1e-12, 1e-8))
        report.add(CheckResult.at_least("order", 1.2, 1.9))
        lines = export_checks_csv(report, tmp_path / "c.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(CHECK_COLUMNS)
        assert lines[1].startswith("bianchi,1,")
        assert lines[2].startswith("order,0,")


class TestFilename:
    """Tests for export file names."""

    def test_geometry_name(self):
        """Should combine command, geometry and table kind."""
        assert generate_export_filename("heat", "conformal-torus", "profile") == (
            "gbcheck_heat_conformal-torus_profile.csv"
        )

    def test_sanitises_paths(self):
        """Should replace characters outside [A-Za-z0-9_-]."""
        assert generate_export_filename("euler", "specs/my geo.gbc", "density") == (
            "gbcheck_euler_specs_my_geo_gbc_density.csv"
        )

    def test_algebra(self):
        """Should use 'algebra' when there is no geometry."""
        assert generate_export_filename("verify-algebra", None, "checks") == (
            "gbcheck_verify-algebra_algebra_checks.csv"
        )
