"""Tests for Pfaffians and the curvature ladder."""

import numpy as np
import pytest

from app.core.clifford import Multivector
from app.core.errors import AlgebraError, DimensionError
from app.core.ladder import (
    check_curvature_symmetry,
    curvature_pfaffian,
    curvature_pfaffian_permutation,
    ladder_supertrace,
    random_curvature,
)
from app.core.pfaffian import SkewMatrix, form_pfaffian, pfaffian, pfaffian_permutation


@pytest.fixture
def rng():
    """Seeded generator for random skew matrices and curvature."""
    return np.random.default_rng(3)


def sphere_block(gauss):
    r = np.zeros((2, 2, 2, 2))
    r[0, 1, 0, 1] = r[1, 0, 1, 0] = -gauss
    r[1, 0, 0, 1] = r[0, 1, 1, 0] = gauss
    return r


class TestPfaffian:
    """Test cases for numeric Pfaffians."""

    def test_two_by_two(self):
        """Should return the upper entry in d = 2."""
        assert pfaffian(SkewMatrix(2, [2.5])) == pytest.approx(2.5)

    def test_four_by_four_formula(self):
        """Should match a12 a34 - a13 a24 + a14 a23."""
        a12, a13, a14, a23, a24, a34 = 1.0, 2.0, 3.0, 5.0, 7.0, 11.0
        skew = SkewMatrix(4, [a12, a13, a14, a23, a24, a34])
        assert pfaffian(skew) == pytest.approx(a12 * a34 - a13 * a24 + a14 * a23)

    def test_zero(self):
        """Should vanish on the zero matrix."""
        assert pfaffian(SkewMatrix(4, np.zeros(6))) == 0.0

    @pytest.mark.parametrize("dim", [2, 4, 6])
    def test_square_is_determinant(self, dim, rng):
        """Should satisfy Pf(A)^2 = det(A)."""
        for _ in range(20):
            skew = SkewMatrix.random(dim, rng)
            det = np.linalg.det(skew.matrix)
            assert abs(pfaffian(skew) ** 2 - det) <= 1e-8 * max(1.0, abs(det))

    @pytest.mark.parametrize("dim", [2, 4, 6])
    def test_routes_agree(self, dim, rng):
        """Should agree with the permutation expansion."""
        skew = SkewMatrix.random(dim, rng)
        assert abs(pfaffian(skew) - pfaffian_permutation(skew.matrix)) < 1e-10

    def test_congruence(self, rng):
        """Should scale by det(M) under MᵀAM."""
        skew = SkewMatrix.random(4, rng)
        m = rng.standard_normal((4, 4))
        assert pfaffian(skew.congruent(m)) == pytest.approx(np.linalg.det(m) * pfaffian(skew))

    def test_odd_dimension(self):
        """Should reject odd dimensions."""
        with pytest.raises(DimensionError):
            pfaffian(SkewMatrix(3, [1.0, 2.0, 3.0]))

    def test_from_array_rejects_symmetric(self):
        """Should refuse a matrix that is not antisymmetric."""
        with pytest.raises(AlgebraError):
            SkewMatrix.from_array(np.eye(2))


class TestFormPfaffian:
    """Test cases for Pfaffians of matrices of 2-forms."""

    def test_block_diagonal(self):
        """Should give the wedge of the two diagonal blocks."""
        zero = Multivector.zero(4)
        x = Multivector.basis(4, 1, 2)
        y = Multivector.basis(4, 3, 4)
        entries = [
            [zero, x, zero, zero],
            [-x, zero, zero, zero],
            [zero, zero, zero, y],
            [zero, zero, -y, zero],
        ]
        assert form_pfaffian(entries).allclose(Multivector.basis(4, 1, 2, 3, 4))


class TestCurvaturePfaffian:
    """Test cases for Pf(-R) of curvature data."""

    def test_constant_curvature(self):
        """Should give Pf(-R) = K for the sphere block."""
        assert curvature_pfaffian(sphere_block(1.0)) == pytest.approx(1.0)
        assert curvature_pfaffian_permutation(sphere_block(1.0)) == pytest.approx(1.0)

    def test_flat(self):
        """Should vanish for R = 0."""
        assert curvature_pfaffian(np.zeros((4, 4, 4, 4))) == 0.0

    def test_routes_agree_in_four_dimensions(self, rng):
        """Should agree between the form and permutation routes."""
        r = random_curvature(4, rng)
        assert abs(curvature_pfaffian(r) - curvature_pfaffian_permutation(r)) < 1e-8

    def test_symmetry_violation(self, rng):
        """Should reject data that is not skew in its frame indices."""
        r = rng.standard_normal((2, 2, 2, 2))
        with pytest.raises(AlgebraError):
            check_curvature_symmetry(r)


class TestLadder:
    """Test cases for the supertrace ladder."""

    @pytest.mark.parametrize("dim", [2, 4])
    def test_random_curvature(self, dim, rng):
        """Should cancel below the top power and close to Pf(-R)."""
        for _ in range(10):
            report = ladder_supertrace(random_curvature(dim, rng))
            assert report.lower_residual < 1e-10
            assert report.closure_error < 1e-8
            assert report.passed()

    def test_flat(self):
        """Should vanish at every rung for R = 0."""
        report = ladder_supertrace(np.zeros((2, 2, 2, 2)))
        assert all(abs(p) == 0.0 for p in report.powers)

    def test_sphere_top(self):
        """Should give Str of the top power equal to K."""
        report = ladder_supertrace(sphere_block(2.0))
        assert report.top == pytest.approx(2.0)

    def test_dimension_check(self):
        """Should reject curvature of the wrong dimension."""
        with pytest.raises(DimensionError):
            ladder_supertrace(np.zeros((2, 2, 2, 2)), dim=4)
