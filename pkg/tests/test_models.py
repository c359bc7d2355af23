"""Tests for the result models."""

import math

import numpy as np

from app.core.models import CheckResult, DensityMap, StudyRow, SuiteReport
from app.core.sde import OrderStudy


class TestCheckResult:
    """Tests for single checks."""

    def test_below(self):
        """Should pass strictly below the tolerance and fail on NaN."""
        assert CheckResult.below("a", 1e-12, 1e-10).passed
        assert not CheckResult.below("a", 1e-10, 1e-10).passed
        assert not CheckResult.below("a", math.nan, 1e-10).passed

    def test_at_least(self):
        """Should treat a NaN slope as an exact result."""
        assert CheckResult.at_least("order", 2.1, 2.0).passed
        assert CheckResult.at_least("order", math.nan, 2.0).passed
        assert not CheckResult.at_least("order", 1.5, 2.0).passed

    def test_line(self):
        """Should format the mark, value, tolerance and detail."""
        line = CheckResult.below("pfaffian", 3e-15, 1e-8, "d=4").line()
        assert line == "✓ pfaffian: 3.000e-15 (tol 1.0e-08) [d=4]"


class TestSuiteReport:
    """Tests for suite aggregation."""

    def test_summary_and_failures(self):
        """Should count passes and list failures."""
        report = SuiteReport("heat")
        report.add(CheckResult.below("a", 0.0, 1.0))
        failed = report.add(CheckResult.below("b", 2.0, 1.0))
        assert not report.passed
        assert report.failures == [failed]
        assert report.summary == "heat: 1/2 checks passed"


class TestRows:
    """Tests for table rows."""

    def test_study_rows_share_slope(self):
        """Should repeat the fitted slope on every refinement level."""
        study = OrderStudy("epsilon", (0.4, 0.2, 0.1, 0.05), (0.16, 0.04, 0.01, 0.0025))
        rows = StudyRow.from_study(study)
        assert [r.parameter for r in rows] == [0.4, 0.2, 0.1, 0.05]
        assert all(abs(r.slope - 2.0) < 1e-9 for r in rows)

    def test_density_rows_without_reference(self):
        """Should fill a missing reference with NaN."""
        rows = DensityMap(np.zeros((2, 2)), np.array([0.1, 0.2])).rows()
        assert len(rows) == 2
        assert math.isnan(rows[0][-1])
