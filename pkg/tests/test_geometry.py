"""Tests for chart geometry, connections and curvature."""

import math

import numpy as np
import pytest

from app.core.errors import GeometryError
from app.core.geometry import (
    ChartDomain,
    ContorsionField,
    GeometrySpec,
    MetricField,
    christoffel,
    curvature,
    dirac_decompose,
    euler_characteristic,
    three_form_coefficients,
    torsion_forms,
)
from app.core.presets import preset


@pytest.fixture
def points():
    """Random points on the 2-torus."""
    return ChartDomain.torus(2).sample(np.random.default_rng(5), 12)


def constant_contorsion(dim, values):
    k = np.asarray(values, dtype=np.float64)
    return ContorsionField(
        dim,
        lambda x: np.broadcast_to(k, (*x.shape[:-1], dim, dim, dim)),
        lambda x: np.zeros((*x.shape[:-1], dim, dim, dim, dim)),
    )


def flat_with(contorsion):
    flat = preset("flat-torus", {"dim": contorsion.dim})
    return GeometrySpec("flat+K", flat.domain, flat.metric, contorsion)


class TestChartDomain:
    """Test cases for chart domains."""

    def test_torus_sample_inside_box(self):
        """Should sample points inside [0, 2π)^d."""
        pts = ChartDomain.torus(4).sample(np.random.default_rng(0), 100)
        assert pts.shape == (100, 4)
        assert np.all((pts >= 0) & (pts < 2 * math.pi))

    def test_minimal_image(self):
        """Should wrap differences into the half-open box."""
        domain = ChartDomain.torus(2)
        dx = domain.minimal_image(np.array([2 * math.pi - 0.1, 0.2]))
        assert dx == pytest.approx([-0.1, 0.2])

    def test_odd_dimension(self):
        """Should reject odd chart dimensions."""
        with pytest.raises(GeometryError):
            ChartDomain(3, "periodic-box", (1.0, 1.0, 1.0))

    def test_missing_sides(self):
        """Should require one side length per axis."""
        with pytest.raises(GeometryError):
            ChartDomain(2, "periodic-box", (1.0,))


class TestChristoffel:
    """Test cases for Levi-Civita symbols."""

    def test_flat(self, points):
        """Should vanish for the flat metric."""
        flat = preset("flat-torus")
        assert np.max(np.abs(christoffel(flat.metric, points))) == 0.0

    def test_conformal_pattern(self, points):
        """Should give Γ^1_11 = ∂_1φ for g = e^{2φ}δ."""
        geometry = preset("conformal-torus", {"amplitude": 0.3})
        gamma = christoffel(geometry.metric, points)
        d1_phi = 0.3 * np.cos(points[:, 0]) * np.cos(points[:, 1])
        assert gamma[:, 0, 0, 0] == pytest.approx(d1_phi, abs=1e-12)

    def test_finite_difference_fallback(self, points):
        """Should agree with analytic derivatives when none are supplied."""
        geometry = preset("conformal-torus")
        numeric = MetricField(2, geometry.metric.value_fn)
        diff = christoffel(numeric, points) - christoffel(geometry.metric, points)
        assert np.max(np.abs(diff)) < 1e-8


class TestConnection:
    """Test cases for metric-compatible connections."""

    def test_torsion_torus_compatible(self, points):
        """Should be metric compatible to machine precision."""
        full = preset("torsion-torus").connection("full")
        assert full.metric_compatibility_residual(points) < 1e-12

    def test_conformal_4torus_compatible(self):
        """Should be metric compatible with constant contorsion in d = 4."""
        geometry = preset("conformal-4torus")
        pts = geometry.domain.sample(np.random.default_rng(1), 6)
        assert geometry.connection("full").metric_compatibility_residual(pts) < 1e-8

    def test_torsion_from_constant_contorsion(self, points):
        """Should give T^b_ij = K_ijb - K_jib on a flat metric."""
        rng = np.random.default_rng(2)
        raw = rng.standard_normal((2, 2, 2))
        k = raw - np.swapaxes(raw, -1, -2)
        geometry = flat_with(constant_contorsion(2, k))
        torsion = geometry.connection("full").torsion(points)
        expected = np.einsum("ijb->bij", k) - np.einsum("jib->bij", k)
        assert np.max(np.abs(torsion - expected)) < 1e-12

    def test_levi_civita_torsion_free(self, points):
        """Should have no torsion for the Levi-Civita connection."""
        torsion = preset("conformal-torus").connection("levi-civita").torsion(points)
        assert np.max(np.abs(torsion)) < 1e-12

    def test_unknown_kind(self):
        """Should reject unknown connection kinds."""
        with pytest.raises(GeometryError):
            preset("flat-torus").connection("weyl")


class TestCurvature:
    """Test cases for curvature data."""

    def test_flat(self, points):
        """Should give zero curvature and torsion for the flat torus."""
        data = preset("flat-torus").curvature(points)
        assert np.max(np.abs(data.riemann)) == 0.0
        assert np.max(np.abs(data.torsion)) == 0.0

    def test_round_sphere(self):
        """Should give Gauss curvature 1 for the stereographic sphere."""
        geometry = preset("stereographic-sphere")
        pts = geometry.domain.sample(np.random.default_rng(4), 10)
        data = geometry.curvature(pts)
        assert np.max(np.abs(data.gauss - 1.0)) < 1e-6
        assert np.max(np.abs(data.riemann[:, 0, 1, 0, 1] + 1.0)) < 1e-6

    def test_bianchi(self, points):
        """Should satisfy the first Bianchi identity for Levi-Civita."""
        data = preset("conformal-torus").curvature(points, "levi-civita")
        assert data.bianchi_residual < 1e-6

    def test_constant_contorsion_on_flat(self):
        """Should reduce to the quadratic contorsion term on a flat metric."""
        k = np.zeros((4, 4, 4))
        k[0, 1, 2], k[0, 2, 1] = 0.3, -0.3
        k[1, 2, 3], k[1, 3, 2] = 0.5, -0.5
        geometry = flat_with(constant_contorsion(4, k))
        x = np.array([[0.3, 1.1, 2.0, 0.7]])
        riemann = curvature(geometry.connection("full"), x).riemann[0]
        # ω_i = -K_i on the identity frame; R_ikab = (ω_i ω_k - ω_k ω_i)_ba
        omega = -k
        two_form = np.einsum("iac,kcb->ikab", omega, omega) - np.einsum("kac,icb->ikab", omega, omega)
        assert np.max(np.abs(riemann - np.swapaxes(two_form, -1, -2))) < 1e-10

    def test_euler_form_sphere_origin(self):
        """Should give 4/(2π) at the origin of the stereographic chart."""
        density = preset("stereographic-sphere").euler_density(np.zeros((1, 2)))
        assert density[0] == pytest.approx(4.0 / (2 * math.pi), rel=1e-6)


class TestDiracDecompose:
    """Test cases for the (a, B) split of the torsion term."""

    def test_zero(self):
        """Should give a = 0 and B = 0 without contorsion."""
        split = dirac_decompose(ContorsionField.zero(2), np.zeros(2))
        assert split.a.norm == 0.0
        assert split.b.norm == 0.0

    def test_two_dimensions(self, points):
        """Should have no 3-form part in d = 2 and match the closed form."""
        geometry = preset("torsion-torus")
        a_closed, _ = torsion_forms(geometry.contorsion(points))
        for j, x in enumerate(points):
            split = dirac_decompose(geometry.contorsion, x)
            assert split.b.norm == 0.0
            assert split.a_vector == pytest.approx(a_closed[j], abs=1e-12)

    def test_totally_antisymmetric(self):
        """Should give a = 0 and B ≠ 0 for an ε-pattern contorsion."""
        geometry = preset("conformal-4torus")
        x = np.array([0.5, 1.0, 1.5, 2.0])
        split = dirac_decompose(geometry.contorsion, x)
        _, b_closed = torsion_forms(geometry.contorsion(x))
        assert np.max(np.abs(split.a_vector)) < 1e-14
        assert split.b.norm > 0.1
        assert np.max(np.abs(split.b.coeffs.real - three_form_coefficients(b_closed))) < 1e-12


class TestEulerCharacteristic:
    """Test cases for the integrated Euler form."""

    @pytest.mark.parametrize("name", ["flat-torus", "conformal-torus", "torsion-torus"])
    def test_tori(self, name):
        """Should integrate to 0 on every torus preset."""
        assert abs(euler_characteristic(preset(name))) < 1e-6

    def test_sphere(self):
        """Should integrate to 2 over the stereographic chart."""
        assert euler_characteristic(preset("stereographic-sphere")) == pytest.approx(2.0, abs=1e-4)


class TestValidate:
    """Test cases for geometry validation."""

    def test_presets_validate(self):
        """Should accept every shipped preset."""
        for name in ("flat-torus", "conformal-torus", "torsion-torus", "conformal-4torus"):
            preset(name).validate(samples=20)

    def test_non_symmetric_metric(self):
        """Should reject a metric that is not symmetric."""
        bad = np.array([[1.0, 0.2], [0.0, 1.0]])
        metric = MetricField(2, lambda x: np.broadcast_to(bad, (*x.shape[:-1], 2, 2)))
        geometry = GeometrySpec("bad", ChartDomain.torus(2), metric, ContorsionField.zero(2))
        with pytest.raises(GeometryError):
            geometry.validate(samples=5)

    def test_non_skew_contorsion(self):
        """Should reject contorsion that is not skew in its frame indices."""
        geometry = flat_with(constant_contorsion(2, np.ones((2, 2, 2))))
        with pytest.raises(GeometryError):
            geometry.validate(samples=5)
