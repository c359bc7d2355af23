"""Coefficient fields of the form bundle Λ* ≅ S ⊗ S* over a geometry.

The Dirac operator, its Weitzenböck decomposition and the stochastic transport all
act on Λ*(R^d) through the double Clifford representation: c(e^a) on the left
(spinor) factor and c*(e^a) on the right (dual spinor) factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from app.core.clifford import exterior_matrix
from app.core.errors import GeometryError
from app.core.geometry import (
    ConnectionField,
    GeometrySpec,
    christoffel,
    curvature,
    three_form_coefficients,
    torsion_forms,
)
from app.core.ladder import twist_curvature_operator
from app.core.representations import DoubleCliffordRep, double_rep


def apply_skew(
    skew: np.ndarray, u: np.ndarray, generators: np.ndarray, coefficient: float
) -> np.ndarray:
    """coefficient · Σ_bc A_bc γ_b γ_c u without forming the fiber matrices.

    Args:
        skew: A with shape (n, d, d)
        u: Sections with shape (n, F)
        generators: γ_b with shape (d, F, F)
        coefficient: Overall factor
    """
    v = np.einsum("cij,nj->cni", generators, u)
    w = np.einsum("nbc,cni->bni", skew, v)
    return coefficient * np.einsum("bij,bnj->ni", generators, w)


@dataclass(frozen=True)
class PotentialTerms:
    """Summands of the zeroth-order Weitzenböck term C at a set of points."""

    scalar: np.ndarray
    twist: np.ndarray
    d_three_form: np.ndarray
    three_form_norm: np.ndarray
    d_one_form: np.ndarray
    one_form_norm: np.ndarray

    @property
    def total(self) -> np.ndarray:
        """s/4 + c(F) + c(dB) - 2|B|² + c(D̂a) - |a|²."""
        identity = np.eye(self.twist.shape[-1])
        scalars = self.scalar / 4.0 - 2.0 * self.three_form_norm - self.one_form_norm
        return scalars[..., None, None] * identity + self.twist + self.d_three_form + self.d_one_form


@dataclass(frozen=True, eq=False)
class BundleFields:
    """Pointwise endomorphism fields of Λ* for one geometry and connection."""

    geometry: GeometrySpec
    kind: str = "full"

    def __post_init__(self) -> None:
        if self.kind not in ("full", "levi-civita"):
            raise GeometryError(
                f"form bundle fields need a full or Levi-Civita connection, got '{self.kind}'"
            )

    @cached_property
    def rep(self) -> DoubleCliffordRep:
        return double_rep(self.geometry.dim)

    @cached_property
    def left(self) -> np.ndarray:
        return np.stack(self.rep.left_generators)

    @cached_property
    def right(self) -> np.ndarray:
        return np.stack(self.rep.right_generators)

    @cached_property
    def connection(self) -> ConnectionField:
        return self.geometry.connection(self.kind)

    @cached_property
    def levi_civita(self) -> ConnectionField:
        return self.geometry.connection("levi-civita")

    def torsion(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(a, B) with B as a full antisymmetric array."""
        if self.kind != "full":
            d = self.geometry.dim
            shape = np.asarray(x).shape[:-1]
            return np.zeros((*shape, d)), np.zeros((*shape, d, d, d))
        return torsion_forms(self.geometry.contorsion(x))

    def theta(self, x: np.ndarray) -> np.ndarray:
        """Θ_a with ∇^β_{f_a} = f_a + Θ_a: LC spin part, D on the dual factor, plus c(ι_a B)."""
        x = np.asarray(x, dtype=np.float64)
        lc = self.levi_civita.frame_omega(x)
        full = self.connection.frame_omega(x)
        _, b = self.torsion(x)
        rep = self.rep
        return (
            rep.spin_action(lc)
            + rep.twist_action(full)
            + 0.5 * np.einsum("...ajk,jpq,kqr->...apr", b, self.left, self.left)
        )

    def coefficients(self, x: np.ndarray) -> np.ndarray:
        """Coordinate transport coefficients C_i = Σ_a f^a_i Θ_a."""
        coframe = self.connection.frames.coframe(x)
        return np.einsum("...ai,...apq->...ipq", coframe, self.theta(x))

    def potential_terms(self, x: np.ndarray) -> PotentialTerms:
        x = np.asarray(x, dtype=np.float64)
        d = self.geometry.dim
        rep = self.rep
        curv = curvature(self.connection, x)
        frame = self.connection.frames.frame(x)
        lc_frame = self.levi_civita.frame_omega(x)
        a, b = self.torsion(x)
        if self.kind == "full":
            dk = self.geometry.contorsion.derivative(x)
            da_coord, db_coord = torsion_forms(dk)
        else:
            da_coord = np.zeros((*x.shape[:-1], d, d))
            db_coord = np.zeros((*x.shape[:-1], d, d, d, d))
        # frame derivatives f_i(a_b) and f_i(B)
        da = np.einsum("...ik,...kb->...ib", frame, da_coord)
        db = np.einsum("...ik,...kabc->...iabc", frame, db_coord)

        b_coeffs = three_form_coefficients(b)
        nabla_b = three_form_coefficients(db) + np.einsum(
            "...ipq,...q->...ip", rep.derivation(lc_frame), b_coeffs
        )
        exterior = np.stack([exterior_matrix(d, i + 1) for i in range(d)])
        d_b = np.einsum("ipq,...iq->...p", exterior, nabla_b)
        c_db = rep.left_coefficients(d_b)

        nabla_a = da + np.einsum("...ibc,...c->...ib", lc_frame, a)
        c_da = np.einsum("...ib,iqs,bsr->...qr", nabla_a, self.left, self.left)

        return PotentialTerms(
            scalar=curv.scalar,
            twist=twist_curvature_operator(curv.riemann),
            d_three_form=c_db,
            three_form_norm=np.sum(b_coeffs**2, axis=-1),
            d_one_form=c_da,
            one_form_norm=np.sum(a**2, axis=-1),
        )

    def potential(self, x: np.ndarray) -> np.ndarray:
        return self.potential_terms(x).total

    def drift(self, x: np.ndarray) -> np.ndarray:
        """b^i = -g^{ls} Γ̂^i_ls + 2 Σ_b a_b f_b^i."""
        x = np.asarray(x, dtype=np.float64)
        g_inv = self.geometry.metric.inverse(x)
        gamma = christoffel(self.geometry.metric, x)
        a, _ = self.torsion(x)
        frame = self.connection.frames.frame(x)
        return -np.einsum("...ls,...ils->...i", g_inv, gamma) + 2.0 * np.einsum(
            "...b,...bi->...i", a, frame
        )

    def diffusion(self, x: np.ndarray) -> np.ndarray:
        """Symmetric positive square root σ of g⁻¹."""
        values, vectors = np.linalg.eigh(self.geometry.metric.inverse(x))
        return np.einsum("...ik,...k,...jk->...ij", vectors, np.sqrt(values), vectors)
