"""Pfaffians of skew matrices and of matrices of even forms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from app.core.clifford import Multivector, berezin, exp_wedge, wedge
from app.core.errors import AlgebraError, DimensionError


@dataclass(frozen=True, eq=False)
class SkewMatrix:
    """Real skew-symmetric matrix stored by its strictly upper triangle."""

    dim: int
    upper: np.ndarray

    def __post_init__(self) -> None:
        upper = np.array(self.upper, dtype=np.float64).reshape(-1)
        expected = self.dim * (self.dim - 1) // 2
        if upper.shape != (expected,):
            raise DimensionError(
                f"skew matrix of dimension {self.dim} needs {expected} entries, got {upper.size}"
            )
        upper.setflags(write=False)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def from_array(cls, array: np.ndarray, tol: float = 1e-12) -> SkewMatrix:
        """Validate antisymmetry of a full d×d array and keep its upper triangle."""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {array.shape}")
        scale = max(1.0, float(np.max(np.abs(array))) if array.size else 1.0)
        if np.max(np.abs(array + array.T), initial=0.0) > tol * scale:
            raise AlgebraError("matrix is not antisymmetric")
        rows, cols = np.triu_indices(array.shape[0], k=1)
        return cls(array.shape[0], array[rows, cols])

    @classmethod
    def random(cls, dim: int, rng: np.random.Generator) -> SkewMatrix:
        return cls(dim, rng.standard_normal(dim * (dim - 1) // 2))

    @property
    def matrix(self) -> np.ndarray:
        full = np.zeros((self.dim, self.dim))
        rows, cols = np.triu_indices(self.dim, k=1)
        full[rows, cols] = self.upper
        full[cols, rows] = -self.upper
        return full

    def congruent(self, m: np.ndarray) -> SkewMatrix:
        """Mᵀ A M."""
        return SkewMatrix.from_array(m.T @ self.matrix @ m, tol=1e-10)

    def __neg__(self) -> SkewMatrix:
        return SkewMatrix(self.dim, -self.upper)


def pfaffian(a: SkewMatrix) -> float:
    """Pf(A) as the Berezin integral of exp(½ Σ A_ij e^i∧e^j)."""
    if a.dim % 2:
        raise DimensionError(f"Pfaffian needs an even dimension, got {a.dim}")
    if a.dim == 0:
        return 1.0
    return berezin(exp_wedge(Multivector.two_form(a.matrix))).real


def pfaffian_permutation(matrix: np.ndarray) -> complex:
    """Pf by the signed expansion along the first row (the permutation-sum definition)."""
    matrix = np.asarray(matrix)
    n = matrix.shape[0]
    if n % 2:
        raise DimensionError(f"Pfaffian needs an even dimension, got {n}")
    if n == 0:
        return 1.0
    total: complex = 0.0
    for j in range(1, n):
        keep = [k for k in range(n) if k not in (0, j)]
        minor = matrix[np.ix_(keep, keep)]
        total += (-1) ** (j + 1) * matrix[0, j] * pfaffian_permutation(minor)
    return total


def form_pfaffian(entries: Sequence[Sequence[Multivector]]) -> Multivector:
    """Pfaffian of a skew matrix whose entries are even forms (they commute)."""
    n = len(entries)
    if n % 2:
        raise DimensionError(f"Pfaffian needs an even dimension, got {n}")
    if n == 0:
        raise DimensionError("form Pfaffian needs at least one row")
    dim = entries[0][0].dim
    if n == 2:
        return entries[0][1]
    total = Multivector.zero(dim)
    for j in range(1, n):
        keep = [k for k in range(n) if k not in (0, j)]
        minor = [[entries[r][c] for c in keep] for r in keep]
        term = wedge(entries[0][j], form_pfaffian(minor))
        total = total + term if j % 2 else total - term
    return total
