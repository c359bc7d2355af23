"""Tests for the discrete Dirac operator and the grid heat kernel."""

import math

import numpy as np
import pytest

from app.core.errors import GridError
from app.core.geometry import ChartDomain
from app.core.hodge import (
    Grid,
    assemble_dirac,
    grading_anticommutator,
    heat_diag,
    max_dofs,
    max_section_dofs,
    mckean_singer,
    mckean_singer_grid,
    plane_wave_symbol,
    richardson,
    self_adjointness_residual,
    semigroup_residual,
    supertrace_profile,
)
from app.core.presets import preset


@pytest.fixture
def flat():
    geometry = preset("flat-torus")
    return assemble_dirac(geometry, Grid(geometry.domain, 16))


@pytest.fixture
def conformal():
    geometry = preset("conformal-torus")
    return assemble_dirac(geometry, Grid(geometry.domain, 16))


class TestGrid:
    """Tests for grid construction and caps."""

    def test_rejects_full_space_chart(self):
        """Should refuse charts that are not periodic."""
        with pytest.raises(GridError):
            Grid(ChartDomain(2, "full-space"), 16)

    def test_rejects_coarse_grid(self):
        """Should refuse fewer than eight points per axis."""
        with pytest.raises(GridError):
            Grid(ChartDomain.torus(2), 4)

    def test_rejects_unknown_scheme(self):
        """Should refuse unknown derivative schemes."""
        with pytest.raises(GridError):
            Grid(ChartDomain.torus(2), 16, "fd2")

    def test_nearest_node_round_trip(self):
        """Should map a node's coordinates back to its index."""
        grid = Grid(ChartDomain.torus(2), 16)
        assert grid.nearest_node(grid.node(37)) == 37

    def test_dof_cap(self):
        """Should refuse to assemble beyond the dof cap."""
        geometry = preset("flat-torus")
        with pytest.raises(GridError):
            assemble_dirac(geometry, Grid(geometry.domain, 16), cap=100)

    def test_dense_cap_from_environment(self, flat, monkeypatch):
        """Should honour GBCHECK_MAX_DENSE_DOFS for dense matrices."""
        monkeypatch.setenv("GBCHECK_MAX_DENSE_DOFS", "100")
        with pytest.raises(GridError):
            flat.to_dense()

    def test_section_cap_from_environment(self, monkeypatch):
        """Should read GBCHECK_MAX_SECTION_DOFS."""
        monkeypatch.setenv("GBCHECK_MAX_SECTION_DOFS", "1234")
        assert max_section_dofs() == 1234

    @pytest.mark.parametrize("raw", ["lots", "0", "-5"])
    def test_invalid_cap_environment(self, monkeypatch, raw):
        """Should raise GridError for caps that are not positive integers."""
        monkeypatch.setenv("GBCHECK_MAX_DOFS", raw)
        with pytest.raises(GridError):
            max_dofs()


class TestDiracStructure:
    """Tests for the algebraic structure of the discrete operator."""

    @pytest.mark.parametrize("scheme", ["spectral", "fd4"])
    def test_flat_plane_wave(self, scheme):
        """Should reproduce the discrete symbol of D² on a cosine wave."""
        geometry = preset("flat-torus")
        op = assemble_dirac(geometry, Grid(geometry.domain, 16, scheme))
        discrete, continuum = plane_wave_symbol(op, (1, 2))
        assert discrete < 1e-10
        if scheme == "spectral":
            assert continuum < 1e-10
        else:
            assert continuum > 1e-6

    def test_odd_under_grading(self, conformal):
        """Should anticommute with the even/odd grading."""
        assert grading_anticommutator(conformal) < 1e-10

    def test_self_adjoint(self, conformal):
        """Should be symmetric in the √g-weighted inner product."""
        assert self_adjointness_residual(conformal) < 1e-10

    def test_mckean_singer(self, conformal):
        """Should have vanishing global supertrace on the torus."""
        assert mckean_singer(conformal, 0.5) == pytest.approx(0.0, abs=1e-6)


class TestHeatKernel:
    """Tests for the heat kernel diagonal."""

    def test_flat_diagonal(self):
        """Should match the Euclidean heat kernel 1/(2πt) with zero supertrace."""
        geometry = preset("flat-torus")
        op = assemble_dirac(geometry, Grid(geometry.domain, 32))
        block = heat_diag(op, 0.2, op.grid.nearest_node(np.array([1.0, 1.0])))
        expected = 1.0 / (2 * math.pi * 0.2)
        np.testing.assert_allclose(np.diagonal(block), expected, rtol=1e-3)
        assert np.max(np.abs(block - np.diag(np.diagonal(block)))) < 1e-8
        assert float(np.diagonal(block) @ op.grading) == pytest.approx(0.0, abs=1e-8)

    def test_multiple_times_shape(self, flat):
        """Should return one block per time for a sequence of times."""
        blocks = heat_diag(flat, [0.2, 0.4], 0)
        assert blocks.shape == (2, 4, 4)

    def test_rejects_non_positive_time(self, flat):
        """Should raise GridError for t ≤ 0."""
        with pytest.raises(GridError):
            heat_diag(flat, 0.0, 0)

    def test_semigroup(self, conformal):
        """Should compose two half steps into one full step."""
        assert semigroup_residual(conformal, 0.4, 5) < 1e-7


class TestExtrapolation:
    """Tests for the t → 0 extrapolation."""

    def test_richardson_is_exact_on_lines(self):
        """Should recover the intercept of linear data with zero error."""
        times = [0.4, 0.2, 0.3]
        values = np.array([[3.0 + 2.0 * t, -1.0 + t] for t in times])
        intercept, error = richardson(times, values)
        np.testing.assert_allclose(intercept, [3.0, -1.0], atol=1e-12)
        np.testing.assert_allclose(error, 0.0, atol=1e-12)

    def test_richardson_two_times(self):
        """Should report a NaN error with only two times."""
        _, error = richardson([0.1, 0.2], np.array([1.0, 2.0]))
        assert np.isnan(error)

    def test_profile_needs_two_times(self, flat):
        """Should refuse a single time."""
        with pytest.raises(GridError):
            supertrace_profile(flat, [0.3], np.zeros((1, 2)))

    def test_profile_below_grid_resolution(self, flat):
        """Should refuse times below h²."""
        with pytest.raises(GridError):
            supertrace_profile(flat, [0.01, 0.3], np.zeros((1, 2)))

    def test_flat_profile(self, flat):
        """Should extrapolate to the vanishing Euler form of the flat torus."""
        profile = supertrace_profile(flat, [0.2, 0.3, 0.4], np.array([[1.0, 2.0]]))
        assert profile.passed()
        assert profile.rows()[-1][0] == 0.0


class TestMcKeanSingerGrid:
    """Tests for the dense grid of the global supertrace."""

    def test_surface_grid(self):
        """Should pick 32 points per axis for a surface under the default dense cap."""
        grid = mckean_singer_grid(ChartDomain.torus(2))
        assert grid.points == 32
        assert 4 * grid.size <= 4096

    def test_four_torus_grid(self):
        """Should fit a coarse four-dimensional grid under the dense cap."""
        grid = mckean_singer_grid(ChartDomain.torus(4))
        assert grid.points == 4
        assert 16 * grid.size == 4096

    def test_follows_dense_cap(self, monkeypatch):
        """Should shrink with GBCHECK_MAX_DENSE_DOFS."""
        monkeypatch.setenv("GBCHECK_MAX_DENSE_DOFS", "1024")
        assert mckean_singer_grid(ChartDomain.torus(2)).points == 16

    def test_coarse_grid_only_on_request(self):
        """Should keep the eight-point minimum for ordinary grids."""
        with pytest.raises(GridError):
            Grid(ChartDomain.torus(4), 4)

    def test_four_torus_supertrace_vanishes(self):
        """Should give a vanishing global supertrace on the twisted conformal 4-torus."""
        geometry = preset("conformal-4torus")
        dense = assemble_dirac(geometry, mckean_singer_grid(geometry.domain))
        values = [mckean_singer(dense, t) for t in (1.0, 0.05)]
        assert max(abs(v) for v in values) < 1e-5
