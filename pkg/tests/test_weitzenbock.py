"""Tests for the Weitzenböck identity of the squared Dirac operator."""

import numpy as np
import pytest

from app.core.errors import GridError
from app.core.geometry import ChartDomain
from app.core.hodge import Grid
from app.core.presets import preset
from app.core.weitzenbock import (
    WeitzenbockReport,
    WeitzenbockSides,
    smooth_sections,
    weitzenbock_check,
)


class TestSmoothSections:
    """Tests for the random test sections."""

    def test_shape(self):
        """Should produce one (nodes, fiber) array per requested section."""
        grid = Grid(ChartDomain.torus(2), 8)
        sections = smooth_sections(grid, 3, np.random.default_rng(0))
        assert sections.shape == (3, 64, 4)


class TestWeitzenbockCheck:
    """Tests for the grid convergence of the residual."""

    def test_flat_is_exact(self):
        """Should satisfy the identity to rounding on the flat torus."""
        report = weitzenbock_check(preset("flat-torus"), (16, 32))
        assert report.exact
        assert report.passed()

    def test_conformal_torus_order(self):
        """Should converge with at least second order on the conformal torus."""
        report = weitzenbock_check(preset("conformal-torus"), (16, 32, 64))
        assert not report.exact
        assert report.passed(2.0)

    def test_torsion_torus_order(self):
        """Should converge with at least second order with torsion present."""
        report = weitzenbock_check(preset("torsion-torus"), (16, 32, 64))
        assert report.passed(2.0)


class TestWeitzenbockReport:
    """Tests for report bookkeeping."""

    def test_slope_in_grid_points(self):
        """Should measure the order against 1/N."""
        report = WeitzenbockReport("x", (16, 32, 64), (1e-2, 2.5e-3, 6.25e-4))
        assert report.slope == pytest.approx(2.0)
        assert report.passed(2.0 - 1e-9)


class TestSectionCap:
    """Tests for the memory cap on the Weitzenböck grids."""

    def test_rejects_four_torus_at_64_points(self):
        """Should raise GridError before allocating a 64⁴ grid of 16-dimensional fibers."""
        with pytest.raises(GridError):
            weitzenbock_check(preset("conformal-4torus"), (8, 64))

    def test_sides_respect_explicit_cap(self):
        """Should raise GridError when one grid exceeds an explicit cap."""
        geometry = preset("conformal-torus")
        with pytest.raises(GridError):
            WeitzenbockSides(geometry, Grid(geometry.domain, 16), cap=100)

    def test_cap_from_environment(self, monkeypatch):
        """Should honour GBCHECK_MAX_SECTION_DOFS."""
        monkeypatch.setenv("GBCHECK_MAX_SECTION_DOFS", "1000")
        with pytest.raises(GridError):
            weitzenbock_check(preset("conformal-torus"), (16, 32))
