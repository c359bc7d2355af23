"""Tests for the exterior and Clifford algebra."""

import numpy as np
import pytest

from app.core.clifford import (
    CliffordElement,
    Multivector,
    berezin,
    chirality,
    clifford_mul,
    dual_chirality,
    exp_wedge,
    interior,
    quantize,
    supertrace_berezin,
    symbol,
    wedge,
)
from app.core.errors import DimensionError


@pytest.fixture
def rng():
    """Seeded generator for random elements."""
    return np.random.default_rng(7)


def e(dim, *indices):
    return Multivector.basis(dim, *indices)


def c(dim, *indices, dual=False):
    return CliffordElement.generator(dim, *indices, dual=dual)


class TestWedge:
    """Test cases for the exterior product."""

    def test_basis_product(self):
        """Should give e^1∧e^2 for e^1 and e^2."""
        assert wedge(e(2, 1), e(2, 2)).allclose(e(2, 1, 2))

    def test_nilpotent(self):
        """Should vanish for a repeated factor."""
        assert wedge(e(2, 1), e(2, 1)).norm == 0.0

    def test_bilinear(self):
        """Should expand (e^1 + e^2)∧e^2 to e^1∧e^2."""
        assert wedge(e(2, 1) + e(2, 2), e(2, 2)).allclose(e(2, 1, 2))

    def test_reordered_basis(self):
        """Should pick up the sign of the sorting permutation."""
        assert e(3, 2, 1).allclose(-e(3, 1, 2))
        assert e(3, 3, 1, 2).allclose(e(3, 1, 2, 3))

    def test_dimension_mismatch(self):
        """Should refuse to combine different dimensions."""
        with pytest.raises(DimensionError):
            wedge(e(2, 1), e(4, 1))

    def test_exp_of_block_two_form(self):
        """Should reach e^1∧e^2∧e^3∧e^4 with coefficient 1 in exp(e^12 + e^34)."""
        result = exp_wedge(e(4, 1, 2) + e(4, 3, 4))
        assert berezin(result) == pytest.approx(1.0)
        assert result.coeffs[0] == pytest.approx(1.0)


class TestInterior:
    """Test cases for the interior product."""

    def test_first_factor(self):
        """Should remove e^1 from e^1∧e^2."""
        assert interior(e(2, 1), e(2, 1, 2)).allclose(e(2, 2))

    def test_second_factor_sign(self):
        """Should give -e^1 for ι(e^2)(e^1∧e^2)."""
        assert interior(e(2, 2), e(2, 1, 2)).allclose(-e(2, 1))

    def test_scalar(self):
        """Should annihilate scalars."""
        assert interior(e(2, 1), Multivector.scalar(2, 1.0)).norm == 0.0

    def test_requires_covector(self):
        """Should reject a first argument that is not a 1-form."""
        with pytest.raises(DimensionError):
            interior(e(2, 1, 2), e(2, 1))


class TestCliffordProduct:
    """Test cases for the Clifford product."""

    def test_generator_squares_to_minus_one(self):
        """Should give c(e^1)c(e^1) = -1."""
        assert clifford_mul(c(2, 1), c(2, 1)).allclose(CliffordElement.scalar(2, -1.0))

    def test_dual_generator_squares_to_one(self):
        """Should give c*(e^1)c*(e^1) = +1 in the dual algebra."""
        square = clifford_mul(c(2, 1, dual=True), c(2, 1, dual=True))
        assert square.allclose(CliffordElement.scalar(2, 1.0, dual=True))

    def test_distinct_generators(self):
        """Should store c(e^1)c(e^2) as a single blade."""
        product = clifford_mul(c(2, 1), c(2, 2))
        assert product.terms() == [(0b11, 1.0)]

    def test_relations(self):
        """Should reduce c(e^2)·c(e^1)c(e^2) to c(e^1)."""
        assert clifford_mul(c(2, 2), c(2, 1, 2)).allclose(c(2, 1))

    def test_associative(self, rng):
        """Should be associative on random elements."""
        a, b, d = (CliffordElement.random(4, rng) for _ in range(3))
        left = clifford_mul(clifford_mul(a, b), d)
        right = clifford_mul(a, clifford_mul(b, d))
        assert left.allclose(right, atol=1e-10)

    def test_mixing_algebras(self):
        """Should refuse to multiply an element by a dual element."""
        with pytest.raises(DimensionError):
            clifford_mul(c(2, 1), c(2, 1, dual=True))


class TestSymbolMap:
    """Test cases for quantize and symbol."""

    def test_symbol_of_disjoint_product(self):
        """Should map c(e^1)c(e^2) to e^1∧e^2."""
        assert symbol(c(2, 1, 2)).allclose(e(2, 1, 2))

    def test_quantize_three_blade(self):
        """Should map e^1∧e^2∧e^3 to c(e^1)c(e^2)c(e^3)."""
        assert quantize(e(3, 1, 2, 3)).allclose(c(3, 1, 2, 3))

    def test_symbol_after_relation(self):
        """Should reduce c(e^1)c(e^1) before taking the symbol."""
        assert symbol(c(2, 1, 1)).allclose(Multivector.scalar(2, -1.0))


class TestChirality:
    """Test cases for the chirality element."""

    def test_two_dimensions(self):
        """Should be i·c(e^1)c(e^2) in d = 2."""
        assert chirality(2).allclose(1j * c(2, 1, 2))

    @pytest.mark.parametrize("dim", [2, 4, 6])
    def test_squares_to_one(self, dim):
        """Should satisfy Γ² = 1."""
        gamma = chirality(dim)
        assert clifford_mul(gamma, gamma).allclose(CliffordElement.scalar(dim, 1.0), atol=1e-12)

    @pytest.mark.parametrize("dim", [2, 4])
    def test_dual_squares_to_one(self, dim):
        """Should satisfy Γ*² = 1 in the dual algebra."""
        gamma = dual_chirality(dim)
        assert clifford_mul(gamma, gamma).allclose(CliffordElement.scalar(dim, 1.0, dual=True))

    def test_anticommutes_with_generators(self):
        """Should anticommute with every generator in even dimension."""
        gamma = chirality(4)
        for i in range(1, 5):
            total = clifford_mul(gamma, c(4, i)) + clifford_mul(c(4, i), gamma)
            assert total.norm < 1e-12

    def test_odd_dimension(self):
        """Should reject odd dimensions."""
        with pytest.raises(DimensionError):
            chirality(3)


class TestBerezin:
    """Test cases for the Berezin integral and its supertrace."""

    def test_top_coefficient(self):
        """Should read the coefficient of e^1∧e^2."""
        assert berezin(e(2, 1, 2)) == 1.0

    def test_scalar(self):
        """Should vanish on scalars."""
        assert berezin(Multivector.scalar(2, 1.0)) == 0.0

    def test_mixed_grades(self):
        """Should ignore lower-grade terms."""
        v = e(4, 1, 2, 3, 4) * 3.0 + e(4, 1, 2)
        assert berezin(v) == 3.0

    def test_supertrace_of_blade(self):
        """Should give -2i for c(e^1)c(e^2)."""
        assert supertrace_berezin(c(2, 1, 2)) == pytest.approx(-2j)

    def test_supertrace_of_identity(self):
        """Should vanish on the identity."""
        assert supertrace_berezin(CliffordElement.scalar(2, 1.0)) == 0.0

    def test_dual_supertrace(self):
        """Should give 2i for c*(e^1)c*(e^2)."""
        assert supertrace_berezin(c(2, 1, 2, dual=True)) == pytest.approx(2j)


class TestDump:
    """Test cases for the debug text form."""

    def test_format(self):
        """Should print one coefficient·blade line per term."""
        v = Multivector.from_terms(3, {(): 1.5, (1, 3): -2.0j})
        assert v.dump() == "1.5·1\n-2.0i·e^1∧e^3"

    def test_parse_dump(self):
        """Should read back a golden dump."""
        v = Multivector.parse_dump(2, "0.5·e^1\n1.0-0.25i·e^1∧e^2")
        assert v.coeffs[0b01] == 0.5
        assert v.coeffs[0b11] == 1.0 - 0.25j

    def test_hodge_norm(self):
        """Should sum squared coefficients."""
        v = Multivector.from_terms(4, {(1, 2, 3): 2.0, (2, 3, 4): 1.0})
        assert v.hodge_norm() == pytest.approx(5.0)
        assert v.grades() == {3}
