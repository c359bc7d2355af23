"""Tests for the pointwise endomorphism fields of the form bundle."""

import numpy as np
import pytest

from app.core.bundle import BundleFields
from app.core.errors import GeometryError
from app.core.presets import preset
from app.core.representations import double_rep


@pytest.fixture
def points():
    """A handful of interior chart points."""
    return np.random.default_rng(11).uniform(-1.0, 1.0, size=(6, 2))


class TestFlatFields:
    """Tests on the flat torus, where every field is trivial."""

    def test_coefficients_vanish(self, points):
        """Should have zero transport coefficients."""
        fields = BundleFields(preset("flat-torus"))
        assert np.max(np.abs(fields.coefficients(points))) < 1e-14

    def test_potential_vanishes(self, points):
        """Should have zero potential."""
        fields = BundleFields(preset("flat-torus"))
        assert np.max(np.abs(fields.potential(points))) < 1e-14

    def test_drift_and_diffusion(self, points):
        """Should have zero drift and identity diffusion."""
        fields = BundleFields(preset("flat-torus"))
        assert np.max(np.abs(fields.drift(points))) < 1e-14
        np.testing.assert_allclose(fields.diffusion(points), np.broadcast_to(np.eye(2), (6, 2, 2)))


class TestCurvedFields:
    """Tests on curved and twisted geometries."""

    def test_diffusion_squares_to_inverse_metric(self, points):
        """Should produce σ with σσᵀ = g⁻¹."""
        geometry = preset("conformal-torus")
        sigma = BundleFields(geometry).diffusion(points)
        product = sigma @ np.swapaxes(sigma, -1, -2)
        np.testing.assert_allclose(product, geometry.metric.inverse(points), atol=1e-12)

    def test_sphere_potential_terms(self, points):
        """Should give scalar curvature 2 and twist supertrace -2 on the unit sphere."""
        terms = BundleFields(preset("stereographic-sphere")).potential_terms(points)
        rep = double_rep(2)
        np.testing.assert_allclose(terms.scalar, 2.0, atol=1e-5)
        for twist in terms.twist:
            assert rep.supertrace(twist).real == pytest.approx(-2.0, abs=1e-5)

    def test_levi_civita_ignores_torsion(self, points):
        """Should drop all torsion terms for the Levi-Civita connection."""
        fields = BundleFields(preset("torsion-torus"), "levi-civita")
        terms = fields.potential_terms(points)
        assert np.max(np.abs(terms.one_form_norm)) == 0.0
        assert np.max(np.abs(terms.d_three_form)) == 0.0
        assert np.max(np.abs(fields.drift(points))) < 1e-14

    def test_torsion_drift_comes_from_one_form(self, points):
        """Should drive the flat torsion torus by twice the torsion one-form."""
        fields = BundleFields(preset("torsion-torus"))
        one_form, _ = fields.torsion(points)
        np.testing.assert_allclose(fields.drift(points), 2.0 * one_form, atol=1e-12)
        assert np.max(np.abs(one_form)) > 0.0

    def test_rejects_three_b_connection(self):
        """Should raise GeometryError for connections other than full or Levi-Civita."""
        with pytest.raises(GeometryError):
            BundleFields(preset("flat-torus"), "3b")
