"""Supertrace ladder of the twist-curvature endomorphism on Λ*(R^d).

For curvature data R_ijnm (2-form indices i, j; frame indices n, m) the
endomorphism c(F) = ⅛ Σ R_ijnm c(e^i)c(e^j)c*(e^m)c*(e^n) acts on Λ*(R^d).
Powers L^m/m! of L = -½c(F) have vanishing supertrace for m < l and the
l-th power closes to Pf(-R), where R is read as the skew matrix of 2-forms
X_nm = ½ Σ R_ijnm e^i∧e^j.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from app.core.clifford import Multivector, berezin
from app.core.errors import AlgebraError, DimensionError
from app.core.pfaffian import form_pfaffian
from app.core.representations import double_rep


def check_curvature_symmetry(curvature: np.ndarray, tol: float = 1e-12) -> None:
    """Raise ``AlgebraError`` unless R is skew in (i, j) and in (n, m)."""
    curvature = np.asarray(curvature)
    d = curvature.shape[0]
    if curvature.shape != (d, d, d, d):
        raise DimensionError(f"curvature must have shape (d, d, d, d), got {curvature.shape}")
    if d % 2:
        raise DimensionError(f"curvature ladder needs an even dimension, got {d}")
    scale = max(1.0, float(np.max(np.abs(curvature))))
    if np.max(np.abs(curvature + curvature.transpose(1, 0, 2, 3))) > tol * scale:
        raise AlgebraError("curvature is not antisymmetric in its 2-form indices")
    if np.max(np.abs(curvature + curvature.transpose(0, 1, 3, 2))) > tol * scale:
        raise AlgebraError("curvature is not antisymmetric in its frame indices")


def random_curvature(dim: int, rng: np.random.Generator, pair_symmetric: bool = False) -> np.ndarray:
    """Random admissible curvature array, optionally with R_ijnm = R_nmij."""
    raw = rng.standard_normal((dim, dim, dim, dim))
    r = raw - raw.transpose(1, 0, 2, 3)
    r = r - r.transpose(0, 1, 3, 2)
    if pair_symmetric:
        r = r + r.transpose(2, 3, 0, 1)
    return 0.25 * r


def curvature_forms(curvature: np.ndarray) -> list[list[Multivector]]:
    """Matrix of 2-forms X_nm = ½ Σ_ij R_ijnm e^i∧e^j."""
    d = curvature.shape[0]
    return [[Multivector.two_form(curvature[:, :, n, m]) for m in range(d)] for n in range(d)]


def curvature_pfaffian(curvature: np.ndarray) -> float:
    """Pf(-R): Berezin integral of the Pfaffian of the 2-form matrix -X."""
    forms = curvature_forms(-np.asarray(curvature))
    return berezin(form_pfaffian(forms)).real


def _permutation_sign(perm: tuple[int, ...]) -> int:
    sign = 1
    seen = list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def curvature_pfaffian_permutation(curvature: np.ndarray) -> float:
    """Pf(-R) from the double signed sum over permutations of form and frame indices."""
    curvature = np.asarray(curvature)
    d = curvature.shape[-1]
    half = d // 2
    perms = [(p, _permutation_sign(p)) for p in itertools.permutations(range(d))]
    total = np.zeros(curvature.shape[:-4])
    for sigma, s_sign in perms:
        for tau, t_sign in perms:
            term = np.ones(curvature.shape[:-4])
            for k in range(half):
                term = term * curvature[
                    ..., sigma[2 * k], sigma[2 * k + 1], tau[2 * k], tau[2 * k + 1]
                ]
            total = total + s_sign * t_sign * term
    return (-1) ** half * total / (4**half * math.factorial(half))


def twist_curvature_operator(curvature: np.ndarray) -> np.ndarray:
    """c(F) = ⅛ Σ R_ijnm c_i c_j c*_m c*_n as a matrix on Λ*(R^d)."""
    curvature = np.asarray(curvature)
    rep = double_rep(curvature.shape[-1])
    left = np.stack(rep.left_generators)
    right = np.stack(rep.right_generators)
    lc = np.einsum("iab,jbc->ijac", left, left)
    rc = np.einsum("mab,nbc->mnac", right, right)
    return 0.125 * np.einsum("...ijnm,ijab,mnbc->...ac", curvature, lc, rc)


@dataclass(frozen=True)
class LadderReport:
    """Supertraces Str(L^m/m!) for m = 0..l together with both Pfaffian routes."""

    dim: int
    powers: tuple[complex, ...]
    pfaffian: float
    pfaffian_permutation: float

    @property
    def lower_residual(self) -> float:
        """Largest |Str(L^m/m!)| over 0 < m < l."""
        lower = [abs(p) for p in self.powers[1:-1]]
        return max(lower, default=0.0)

    @property
    def top(self) -> complex:
        return self.powers[-1]

    @property
    def closure_error(self) -> float:
        """|Str(L^l/l!) - Pf(-R)| relative to max(1, |Pf(-R)|)."""
        return abs(self.top - self.pfaffian) / max(1.0, abs(self.pfaffian))

    @property
    def route_error(self) -> float:
        return abs(self.pfaffian - self.pfaffian_permutation)

    def passed(self, tol: float = 1e-8) -> bool:
        return self.lower_residual < 1e-10 and self.closure_error < tol and self.route_error < tol


def ladder_supertrace(curvature: np.ndarray, dim: int | None = None) -> LadderReport:
    """Supertrace ladder of L = -½c(F) with the Pfaffian closure values."""
    curvature = np.asarray(curvature, dtype=np.float64)
    if dim is not None and curvature.shape[0] != dim:
        raise DimensionError(f"curvature of dimension {curvature.shape[0]}, expected {dim}")
    check_curvature_symmetry(curvature)
    d = curvature.shape[0]
    rep = double_rep(d)
    generator = -0.5 * twist_curvature_operator(curvature)
    power = np.eye(rep.size)
    powers = [rep.supertrace(power)]
    for m in range(1, d // 2 + 1):
        power = power @ generator / m
        powers.append(rep.supertrace(power))
    return LadderReport(
        dim=d,
        powers=tuple(powers),
        pfaffian=curvature_pfaffian(curvature),
        pfaffian_permutation=float(curvature_pfaffian_permutation(curvature)),
    )
