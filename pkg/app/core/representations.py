"""Matrix representations of the Clifford algebra.

``SpinorRep`` realises Cl(R^d) ⊗ C on spinors S of dimension 2^l by the
tensor-product recursion starting from γ_j = iσ_j in d = 2. ``DoubleCliffordRep``
realises the left action c = ε - ι and the right action c* = ε + ι on Λ*(R^d),
the model of S ⊗ S*.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from app.core.clifford import (
    CliffordElement,
    blade_grades,
    exterior_matrix,
    interior_matrix,
)
from app.core.errors import DimensionError

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)


def _blade_products(generators: tuple[np.ndarray, ...], reverse: bool = False) -> np.ndarray:
    """Matrices of every blade: increasing products, or reversed compositions."""
    dim = len(generators)
    size = generators[0].shape[0]
    products = np.zeros((1 << dim, size, size), dtype=generators[0].dtype)
    for mask in range(1 << dim):
        mat = np.eye(size, dtype=generators[0].dtype)
        factors = [generators[i] for i in range(dim) if mask >> i & 1]
        if reverse:
            factors.reverse()
        for factor in factors:
            mat = mat @ factor
        products[mask] = mat
    products.setflags(write=False)
    return products


@dataclass(frozen=True, eq=False)
class SpinorRep:
    """Gamma matrices and chirality on the spinor space of dimension 2^l."""

    dim: int
    gammas: tuple[np.ndarray, ...]
    chirality: np.ndarray

    @property
    def half_dim(self) -> int:
        return self.dim // 2

    @property
    def size(self) -> int:
        return 1 << self.half_dim

    @property
    def dual_gammas(self) -> tuple[np.ndarray, ...]:
        """Images of c*(e^j): δ_j = -iγ_j, which square to +1."""
        return tuple(-1j * g for g in self.gammas)

    def matrix(self, a: CliffordElement) -> np.ndarray:
        """Image ρ(a); dual elements are represented through δ_j."""
        if a.dim != self.dim:
            raise DimensionError(f"element of dimension {a.dim} in rep of dimension {self.dim}")
        table = _spinor_blades(self.dim, a.dual)
        return np.tensordot(a.coeffs, table, axes=1)


@lru_cache(maxsize=None)
def spinor_rep(dim: int) -> SpinorRep:
    """Brauer-Weyl spinor representation for even ``dim``."""
    if dim % 2 or dim < 2:
        raise DimensionError(f"spinor representation needs an even dimension, got {dim}")
    gammas = [1j * PAULI[0], 1j * PAULI[1]]
    chir = PAULI[2].copy()
    for _ in range(dim // 2 - 1):
        eye = np.eye(2, dtype=np.complex128)
        gammas = [np.kron(g, eye) for g in gammas] + [
            np.kron(chir, 1j * PAULI[0]),
            np.kron(chir, 1j * PAULI[1]),
        ]
        chir = np.kron(chir, PAULI[2])
    for g in gammas:
        g.setflags(write=False)
    chir.setflags(write=False)
    return SpinorRep(dim, tuple(gammas), chir)


@lru_cache(maxsize=None)
def _spinor_blades(dim: int, dual: bool) -> np.ndarray:
    rep = spinor_rep(dim)
    return _blade_products(rep.dual_gammas if dual else rep.gammas)


def supertrace_gamma(a: CliffordElement) -> complex:
    """Str(a) = tr(Γ ρ(a)); the dual chirality coincides with Γ in this representation."""
    rep = spinor_rep(a.dim)
    return complex(np.trace(rep.chirality @ rep.matrix(a)))


def supertrace_product(a: CliffordElement, b: CliffordElement) -> complex:
    """Str(a ⊗ b) = tr(Γa) tr(Γ*b) for ``a`` in Cl and ``b`` in the dual algebra."""
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.dual or not b.dual:
        raise DimensionError("supertrace_product takes an element of Cl and one of its dual")
    return supertrace_gamma(a) * supertrace_gamma(b)


@dataclass(frozen=True, eq=False)
class DoubleCliffordRep:
    """Left and right Clifford actions on coefficient vectors of Λ*(R^d)."""

    dim: int
    left_generators: tuple[np.ndarray, ...]
    right_generators: tuple[np.ndarray, ...]
    grading: np.ndarray

    @property
    def size(self) -> int:
        return 1 << self.dim

    def left(self, a: CliffordElement) -> np.ndarray:
        """ρ_L(a), a homomorphism from Cl."""
        if a.dual or a.dim != self.dim:
            raise DimensionError("left action takes a non-dual element of matching dimension")
        return np.tensordot(a.coeffs, _double_blades(self.dim, "left"), axes=1)

    def right(self, b: CliffordElement) -> np.ndarray:
        """ρ_R(b), an anti-homomorphism from the dual algebra."""
        if not b.dual or b.dim != self.dim:
            raise DimensionError("right action takes a dual element of matching dimension")
        return np.tensordot(b.coeffs, _double_blades(self.dim, "right"), axes=1)

    def left_coefficients(self, coeffs: np.ndarray) -> np.ndarray:
        """ρ_L of batched coefficient vectors over the Clifford blade basis."""
        return np.einsum("...p,pqr->...qr", coeffs, _double_blades(self.dim, "left"))

    def supertrace(self, matrix: np.ndarray) -> complex:
        """Grading-weighted trace on Λ*: trace on even forms minus trace on odd forms."""
        return complex(np.sum(np.diagonal(matrix, axis1=-2, axis2=-1) * self.grading, axis=-1))

    def spin_action(self, skew: np.ndarray) -> np.ndarray:
        """-¼ Σ A_bc c_b c_c: lift of a skew matrix to the spinor factor."""
        return -0.25 * np.einsum("...bc,bij,cjk->...ik", skew, self._left, self._left)

    def twist_action(self, skew: np.ndarray) -> np.ndarray:
        """¼ Σ A_bc c*_b c*_c: lift of a skew matrix to the dual spinor factor."""
        return 0.25 * np.einsum("...bc,bij,cjk->...ik", skew, self._right, self._right)

    def derivation(self, skew: np.ndarray) -> np.ndarray:
        """Σ A_bc ε_b ι_c, the derivation extending e^c ↦ Σ_b A_bc e^b."""
        return self.spin_action(skew) + self.twist_action(skew)

    def clifford_vector(self, covector: np.ndarray) -> np.ndarray:
        """Σ v_b c_b for a (possibly batched) component vector."""
        return np.einsum("...b,bij->...ij", covector, self._left)

    @property
    def _left(self) -> np.ndarray:
        return np.stack(self.left_generators)

    @property
    def _right(self) -> np.ndarray:
        return np.stack(self.right_generators)


@lru_cache(maxsize=None)
def double_rep(dim: int) -> DoubleCliffordRep:
    """c(e^i) = ε(e^i) - ι(e^i) and c*(e^i) = ε(e^i) + ι(e^i) on Λ*(R^d)."""
    left = tuple(exterior_matrix(dim, i) - interior_matrix(dim, i) for i in range(1, dim + 1))
    right = tuple(exterior_matrix(dim, i) + interior_matrix(dim, i) for i in range(1, dim + 1))
    grading = (-1.0) ** blade_grades(dim)
    for mat in (*left, *right, grading):
        mat.setflags(write=False)
    return DoubleCliffordRep(dim, left, right, grading)


@lru_cache(maxsize=None)
def _double_blades(dim: int, side: str) -> np.ndarray:
    rep = double_rep(dim)
    if side == "left":
        return _blade_products(rep.left_generators)
    return _blade_products(rep.right_generators, reverse=True)


def grading_operator(dim: int) -> np.ndarray:
    """(-1)^deg on Λ*(R^d) as a diagonal matrix."""
    return np.diag(double_rep(dim).grading)
