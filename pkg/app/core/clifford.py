"""Exterior and Clifford algebra over R^d with dense blade storage.

Blades are indexed by bitmask: bit ``i - 1`` set means ``e^i`` is a factor, and a
blade always denotes the increasing product of its factors. Coefficient arrays
therefore have length ``2**d`` and entry ``mask`` multiplies the blade ``mask``.

Conventions:
    c(v)^2 = -|v|^2 for the Clifford algebra and c*(v)^2 = +|v|^2 for the dual
    algebra. ``quantize`` and ``symbol`` are the coefficientwise identity on
    increasing monomials. The chirality element is i^l c(e^1)...c(e^d).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

from app.core.errors import DimensionError

MAX_DIM = 8


def reorder_sign(a: int, b: int) -> int:
    """Sign of the permutation sorting the concatenated factors of blades ``a`` and ``b``."""
    a >>= 1
    swaps = 0
    while a:
        swaps += bin(a & b).count("1")
        a >>= 1
    return -1 if swaps & 1 else 1


def _check_dim(dim: int) -> None:
    if dim < 1 or dim > MAX_DIM:
        raise DimensionError(f"dimension must be in 1..{MAX_DIM}, got {dim}")


@lru_cache(maxsize=None)
def blade_grades(dim: int) -> np.ndarray:
    """Grade of every blade mask for dimension ``dim``."""
    grades = np.array([bin(mask).count("1") for mask in range(1 << dim)], dtype=np.int64)
    grades.setflags(write=False)
    return grades


@lru_cache(maxsize=None)
def _xor_index(dim: int) -> np.ndarray:
    n = 1 << dim
    idx = np.arange(n)[:, None] ^ np.arange(n)[None, :]
    idx.setflags(write=False)
    return idx


@lru_cache(maxsize=None)
def _product_table(dim: int, kind: str) -> np.ndarray:
    """Sign table s[A, B] so that blade_A * blade_B = s[A, B] * blade_{A^B}."""
    n = 1 << dim
    table = np.zeros((n, n), dtype=np.float64)
    for a in range(n):
        for b in range(n):
            sign = reorder_sign(a, b)
            overlap = a & b
            if kind == "wedge":
                table[a, b] = 0.0 if overlap else sign
            elif kind == "clifford":
                table[a, b] = sign * (-1) ** bin(overlap).count("1")
            else:
                table[a, b] = sign
    table.setflags(write=False)
    return table


def _multiply(u: np.ndarray, v: np.ndarray, dim: int, kind: str) -> np.ndarray:
    weighted = np.outer(u, v) * _product_table(dim, kind)
    rows = np.arange(1 << dim)[:, None]
    # result[k] = sum_A weighted[A, A ^ k]; fixed summation order
    return weighted[rows, _xor_index(dim)].sum(axis=0)


@lru_cache(maxsize=None)
def exterior_matrix(dim: int, index: int) -> np.ndarray:
    """Matrix of ε(e^index) acting on coefficient vectors (index is 1-based)."""
    _check_dim(dim)
    bit = 1 << (index - 1)
    n = 1 << dim
    mat = np.zeros((n, n))
    for mask in range(n):
        if not mask & bit:
            mat[mask | bit, mask] = (-1) ** bin(mask & (bit - 1)).count("1")
    mat.setflags(write=False)
    return mat


@lru_cache(maxsize=None)
def interior_matrix(dim: int, index: int) -> np.ndarray:
    """Matrix of ι(e^index) acting on coefficient vectors (index is 1-based)."""
    _check_dim(dim)
    bit = 1 << (index - 1)
    n = 1 << dim
    mat = np.zeros((n, n))
    for mask in range(n):
        if mask & bit:
            mat[mask ^ bit, mask] = (-1) ** bin(mask & (bit - 1)).count("1")
    mat.setflags(write=False)
    return mat


def _mask_of(indices: Iterable[int], dim: int) -> tuple[int, int]:
    """Mask and sign of the product e^{i1}...e^{ik} in arbitrary order without repeats."""
    mask = 0
    sign = 1
    for i in indices:
        if i < 1 or i > dim:
            raise DimensionError(f"index {i} out of range for dimension {dim}")
        bit = 1 << (i - 1)
        if mask & bit:
            return 0, 0
        sign *= reorder_sign(mask, bit)
        mask |= bit
    return mask, sign


def format_coefficient(value: complex) -> str:
    """Exact text form of a complex coefficient ("1.5", "-2.0i", "1.0+0.5i")."""
    re_part, im_part = float(value.real), float(value.imag)
    if im_part == 0.0:
        return repr(re_part)
    if re_part == 0.0:
        return f"{im_part!r}i"
    op = "+" if im_part >= 0 else "-"
    return f"{re_part!r}{op}{abs(im_part)!r}i"


def format_blade(mask: int) -> str:
    """Text form of a blade such as ``e^1∧e^3``; the empty blade is ``1``."""
    if mask == 0:
        return "1"
    bits = [str(i + 1) for i in range(mask.bit_length()) if mask >> i & 1]
    return "∧".join(f"e^{i}" for i in bits)


def parse_coefficient(text: str) -> complex:
    """Inverse of ``format_coefficient``."""
    text = text.strip()
    if text.endswith("i"):
        body = text[:-1]
        # split at the last sign that is not part of an exponent
        for pos in range(len(body) - 1, 0, -1):
            if body[pos] in "+-" and body[pos - 1] not in "eE":
                return complex(float(body[:pos]), float(body[pos:]))
        return complex(0.0, float(body))
    return complex(float(text), 0.0)


class _GradedArray:
    """Shared storage behaviour for multivectors and Clifford elements."""

    dim: int
    coeffs: np.ndarray

    def _init_storage(self) -> None:
        _check_dim(self.dim)
        coeffs = np.array(self.coeffs, dtype=np.complex128).reshape(-1)
        if coeffs.shape != (1 << self.dim,):
            raise DimensionError(
                f"expected {1 << self.dim} coefficients for dimension {self.dim}, "
                f"got {coeffs.shape[0]}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def norm(self) -> float:
        """Maximum absolute coefficient."""
        return float(np.max(np.abs(self.coeffs)))

    def grades(self, tol: float = 0.0) -> set[int]:
        """Grades carrying a coefficient larger than ``tol`` in absolute value."""
        present = np.abs(self.coeffs) > tol
        return {int(g) for g in np.unique(blade_grades(self.dim)[present])}

    def terms(self, tol: float = 0.0) -> list[tuple[int, complex]]:
        """Nonzero (mask, coefficient) pairs ordered by grade, then mask."""
        order = sorted(range(1 << self.dim), key=lambda m: (bin(m).count("1"), m))
        return [(m, complex(self.coeffs[m])) for m in order if abs(self.coeffs[m]) > tol]

    def dump(self) -> str:
        """Debug text: one ``coeff·blade`` line per nonzero term."""
        return "\n".join(f"{format_coefficient(c)}·{format_blade(m)}" for m, c in self.terms())


@dataclass(frozen=True, eq=False)
class Multivector(_GradedArray):
    """Element of the exterior algebra Λ*(R^d)."""

    dim: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        self._init_storage()

    @classmethod
    def zero(cls, dim: int) -> Multivector:
        return cls(dim, np.zeros(1 << dim))

    @classmethod
    def scalar(cls, dim: int, value: complex) -> Multivector:
        coeffs = np.zeros(1 << dim, dtype=np.complex128)
        coeffs[0] = value
        return cls(dim, coeffs)

    @classmethod
    def basis(cls, dim: int, *indices: int) -> Multivector:
        """e^{i1}∧...∧e^{ik} for 1-based indices in any order."""
        mask, sign = _mask_of(indices, dim)
        coeffs = np.zeros(1 << dim, dtype=np.complex128)
        if sign:
            coeffs[mask] = sign
        return cls(dim, coeffs)

    @classmethod
    def covector(cls, dim: int, components: Iterable[complex]) -> Multivector:
        """Grade-1 element Σ components[i] e^{i+1}."""
        values = list(components)
        if len(values) != dim:
            raise DimensionError(f"covector needs {dim} components, got {len(values)}")
        coeffs = np.zeros(1 << dim, dtype=np.complex128)
        for i, value in enumerate(values):
            coeffs[1 << i] = value
        return cls(dim, coeffs)

    @classmethod
    def from_terms(cls, dim: int, terms: Mapping[tuple[int, ...], complex]) -> Multivector:
        """Build from a mapping of 1-based index tuples to coefficients."""
        result = cls.zero(dim)
        for indices, value in terms.items():
            result = result + value * cls.basis(dim, *indices)
        return result

    @classmethod
    def two_form(cls, matrix: np.ndarray) -> Multivector:
        """½ Σ A_ij e^i∧e^j for a d×d array."""
        matrix = np.asarray(matrix)
        dim = matrix.shape[0]
        coeffs = np.zeros(1 << dim, dtype=np.complex128)
        for i in range(dim):
            for j in range(i + 1, dim):
                coeffs[(1 << i) | (1 << j)] = 0.5 * (matrix[i, j] - matrix[j, i])
        return cls(dim, coeffs)

    @classmethod
    def parse_dump(cls, dim: int, text: str) -> Multivector:
        """Inverse of ``dump`` for golden-file comparisons."""
        coeffs = np.zeros(1 << dim, dtype=np.complex128)
        for line in text.strip().splitlines():
            coeff_text, blade_text = line.split("·")
            indices = () if blade_text == "1" else tuple(
                int(part[2:]) for part in blade_text.split("∧")
            )
            mask, sign = _mask_of(indices, dim)
            coeffs[mask] += sign * parse_coefficient(coeff_text)
        return cls(dim, coeffs)

    def grade(self, k: int) -> Multivector:
        """Projection onto grade ``k``."""
        return Multivector(self.dim, np.where(blade_grades(self.dim) == k, self.coeffs, 0))

    def hodge_norm(self) -> float:
        """Squared norm Σ |coeff|^2 in the orthonormal blade basis."""
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def allclose(self, other: Multivector, atol: float = 1e-12) -> bool:
        _same_dim(self, other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol))

    def __add__(self, other: Multivector) -> Multivector:
        _same_dim(self, other)
        return Multivector(self.dim, self.coeffs + other.coeffs)

    def __sub__(self, other: Multivector) -> Multivector:
        _same_dim(self, other)
        return Multivector(self.dim, self.coeffs - other.coeffs)

    def __neg__(self) -> Multivector:
        return Multivector(self.dim, -self.coeffs)

    def __mul__(self, value: complex) -> Multivector:
        return Multivector(self.dim, self.coeffs * value)

    __rmul__ = __mul__

    def __xor__(self, other: Multivector) -> Multivector:
        return wedge(self, other)


@dataclass(frozen=True, eq=False)
class CliffordElement(_GradedArray):
    """Element of Cl(R^d) in the basis of increasing products c(e^{i1})...c(e^{ik}).

    With ``dual=True`` the element lives in the dual algebra generated by c*(e^i),
    which squares to +1.
    """

    dim: int
    coeffs: np.ndarray
    dual: bool = False

    def __post_init__(self) -> None:
        self._init_storage()

    @classmethod
    def scalar(cls, dim: int, value: complex, dual: bool = False) -> CliffordElement:
        coeffs = np.zeros(1 << dim, dtype=np.complex128)
        coeffs[0] = value
        return cls(dim, coeffs, dual)

    @classmethod
    def generator(cls, dim: int, *indices: int, dual: bool = False) -> CliffordElement:
        """Product c(e^{i1})...c(e^{ik}) of generators in the given order."""
        result = cls.scalar(dim, 1.0, dual)
        for i in indices:
            result = clifford_mul(result, quantize(Multivector.basis(dim, i), dual=dual))
        return result

    @classmethod
    def random(
        cls, dim: int, rng: np.random.Generator, dual: bool = False
    ) -> CliffordElement:
        n = 1 << dim
        return cls(dim, rng.standard_normal(n) + 1j * rng.standard_normal(n), dual)

    def allclose(self, other: CliffordElement, atol: float = 1e-12) -> bool:
        _same_dim(self, other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol))

    def __add__(self, other: CliffordElement) -> CliffordElement:
        _same_algebra(self, other)
        return CliffordElement(self.dim, self.coeffs + other.coeffs, self.dual)

    def __sub__(self, other: CliffordElement) -> CliffordElement:
        _same_algebra(self, other)
        return CliffordElement(self.dim, self.coeffs - other.coeffs, self.dual)

    def __neg__(self) -> CliffordElement:
        return CliffordElement(self.dim, -self.coeffs, self.dual)

    def __mul__(self, other: CliffordElement | complex) -> CliffordElement:
        if isinstance(other, CliffordElement):
            return clifford_mul(self, other)
        return CliffordElement(self.dim, self.coeffs * other, self.dual)

    def __rmul__(self, value: complex) -> CliffordElement:
        return CliffordElement(self.dim, self.coeffs * value, self.dual)


def _same_dim(u: _GradedArray, v: _GradedArray) -> None:
    if u.dim != v.dim:
        raise DimensionError(f"dimension mismatch: {u.dim} vs {v.dim}")


def _same_algebra(a: CliffordElement, b: CliffordElement) -> None:
    _same_dim(a, b)
    if a.dual != b.dual:
        raise DimensionError("cannot combine elements of the algebra and its dual")


def wedge(u: Multivector, v: Multivector) -> Multivector:
    """Exterior product u ∧ v."""
    _same_dim(u, v)
    return Multivector(u.dim, _multiply(u.coeffs, v.coeffs, u.dim, "wedge"))


def exp_wedge(v: Multivector) -> Multivector:
    """Exponential in the exterior algebra; ``v`` must have no scalar part to terminate."""
    result = Multivector.scalar(v.dim, 1.0)
    term = Multivector.scalar(v.dim, 1.0)
    for k in range(1, v.dim + 1):
        term = wedge(term, v) * (1.0 / k)
        if term.norm == 0.0:
            break
        result = result + term
    return result


def interior(covector: Multivector, v: Multivector) -> Multivector:
    """Interior product ι(covector) v, a grade-lowering antiderivation."""
    _same_dim(covector, v)
    if covector.grades(tol=0.0) - {1}:
        raise DimensionError("interior product needs a pure grade-1 first argument")
    result = np.zeros(1 << v.dim, dtype=np.complex128)
    for i in range(v.dim):
        alpha = covector.coeffs[1 << i]
        if alpha != 0:
            result = result + alpha * (interior_matrix(v.dim, i + 1) @ v.coeffs)
    return Multivector(v.dim, result)


def clifford_mul(a: CliffordElement, b: CliffordElement) -> CliffordElement:
    """Clifford product; c(e^i)^2 = -1, or +1 in the dual algebra."""
    _same_algebra(a, b)
    kind = "dual" if a.dual else "clifford"
    return CliffordElement(a.dim, _multiply(a.coeffs, b.coeffs, a.dim, kind), a.dual)


def quantize(v: Multivector, dual: bool = False) -> CliffordElement:
    """Linear bijection Λ* → Cl sending e^{i1}∧...∧e^{ik} to c(e^{i1})...c(e^{ik})."""
    return CliffordElement(v.dim, v.coeffs, dual)


def symbol(a: CliffordElement) -> Multivector:
    """Inverse of ``quantize``."""
    return Multivector(a.dim, a.coeffs)


def chirality(dim: int) -> CliffordElement:
    """Γ = i^l c(e^1)...c(e^d)."""
    if dim % 2:
        raise DimensionError(f"chirality needs an even dimension, got {dim}")
    _check_dim(dim)
    coeffs = np.zeros(1 << dim, dtype=np.complex128)
    coeffs[-1] = 1j ** (dim // 2)
    return CliffordElement(dim, coeffs)


def dual_chirality(dim: int) -> CliffordElement:
    """Γ* = (-i)^l c*(e^1)...c*(e^d) in the dual algebra."""
    if dim % 2:
        raise DimensionError(f"chirality needs an even dimension, got {dim}")
    _check_dim(dim)
    coeffs = np.zeros(1 << dim, dtype=np.complex128)
    coeffs[-1] = (-1j) ** (dim // 2)
    return CliffordElement(dim, coeffs, dual=True)


def berezin(v: Multivector) -> complex:
    """Berezin integral: the coefficient of e^1∧...∧e^d."""
    return complex(v.coeffs[-1])


def supertrace_berezin(a: CliffordElement) -> complex:
    """Str(a) = (-2i)^l T(σ(a)); (2i)^l T(σ(a)) for dual elements."""
    if a.dim % 2:
        raise DimensionError(f"supertrace needs an even dimension, got {a.dim}")
    factor = (2j if a.dual else -2j) ** (a.dim // 2)
    return factor * berezin(symbol(a))
