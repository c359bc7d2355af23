"""Chart-based Riemannian geometry with metric-compatible connections.

All field evaluations are vectorised: points have shape (..., d) and results carry
the same leading axes. Frames are orthonormal and come from the pointwise
Cholesky factorisation g = L Lᵀ, with coframe F = Lᵀ (rows f^a) and frame
E = F⁻ᵀ (rows f_a).

Index conventions:
    connection matrices   ω[..., i, a, b] with D_{∂_i} f_b = Σ_a ω_i[a, b] f_a
    contorsion            K[..., i, a, b] with D_{f_i} f_a = D̂_{f_i} f_a + Σ_b K_iab f_b
    curvature             R[..., m, k, a, b] = ⟨R(f_m, f_k) f_a, f_b⟩
    torsion               T[..., a, m, k] = f^a(T(f_m, f_k))
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from app.core.clifford import CliffordElement, Multivector, blade_grades, symbol
from app.core.errors import GeometryError
from app.core.ladder import curvature_pfaffian_permutation, twist_curvature_operator
from app.core.stencils import ArrayFn, central_difference

log = logging.getLogger(__name__)

DOMAIN_KINDS = ("periodic-box", "full-space")
CONNECTION_KINDS = ("full", "levi-civita", "3b")
DEFAULT_STEP = 1e-3


@dataclass(frozen=True)
class ChartDomain:
    """Coordinate domain: a periodic box or all of R^d."""

    dim: int
    kind: str = "periodic-box"
    sides: tuple[float, ...] = ()
    radius: float | None = None

    def __post_init__(self) -> None:
        if self.dim < 2 or self.dim % 2:
            raise GeometryError(f"chart dimension must be even and >= 2, got {self.dim}")
        if self.kind not in DOMAIN_KINDS:
            raise GeometryError(f"unknown chart kind '{self.kind}'")
        if self.kind == "periodic-box":
            if len(self.sides) != self.dim:
                raise GeometryError(f"periodic box needs {self.dim} side lengths")
            if any(side <= 0 for side in self.sides):
                raise GeometryError("periodic box side lengths must be positive")
        elif self.radius is not None and self.radius <= 0:
            raise GeometryError("perturbation radius must be positive")

    @classmethod
    def torus(cls, dim: int, side: float = 2 * math.pi) -> ChartDomain:
        return cls(dim, "periodic-box", (side,) * dim)

    @property
    def periodic(self) -> bool:
        return self.kind == "periodic-box"

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Random points: uniform in the box, or uniform in a ball for full space."""
        if self.periodic:
            return rng.random((count, self.dim)) * np.asarray(self.sides)
        radius = self.radius if self.radius is not None else 1.0
        direction = rng.standard_normal((count, self.dim))
        direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
        return direction * radius * rng.random((count, 1)) ** (1.0 / self.dim)

    def minimal_image(self, dx: np.ndarray) -> np.ndarray:
        """Shortest representative of a coordinate difference."""
        if not self.periodic:
            return dx
        sides = np.asarray(self.sides)
        return dx - sides * np.round(dx / sides)


@dataclass(frozen=True, eq=False)
class MetricField:
    """Symmetric positive-definite metric g_ij(x) with first derivatives."""

    dim: int
    value_fn: ArrayFn
    derivative_fn: ArrayFn | None = None
    step: float = DEFAULT_STEP

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        value = np.asarray(self.value_fn(x), dtype=np.float64)
        return np.broadcast_to(value, (*x.shape[:-1], self.dim, self.dim))

    def derivative(self, x: np.ndarray) -> np.ndarray:
        """∂_k g_ij as an array of shape (..., k, i, j)."""
        x = np.asarray(x, dtype=np.float64)
        if self.derivative_fn is not None:
            value = np.asarray(self.derivative_fn(x), dtype=np.float64)
            return np.broadcast_to(value, (*x.shape[:-1], self.dim, self.dim, self.dim))
        return central_difference(self, x, self.step)

    def inverse(self, x: np.ndarray) -> np.ndarray:
        g = self(x)
        if np.any(np.linalg.det(g) <= 0):
            raise GeometryError("metric is not invertible at an evaluation point")
        return np.linalg.inv(g)

    def sqrt_det(self, x: np.ndarray) -> np.ndarray:
        return np.sqrt(np.linalg.det(self(x)))

    def check(self, points: np.ndarray, tol: float = 1e-12) -> None:
        """Validate exact symmetry and positive-definiteness at sample points."""
        g = self(points)
        asym = np.max(np.abs(g - np.swapaxes(g, -1, -2)))
        if asym > tol * max(1.0, float(np.max(np.abs(g)))):
            raise GeometryError(f"metric is not symmetric (max asymmetry {asym:.3e})")
        if np.any(np.linalg.eigvalsh(g) <= 0):
            raise GeometryError("metric is not positive definite at a sample point")


@dataclass(frozen=True, eq=False)
class ContorsionField:
    """Contorsion K_iab(x) in the orthonormal frame, skew in (a, b)."""

    dim: int
    value_fn: ArrayFn | None = None
    derivative_fn: ArrayFn | None = None
    step: float = DEFAULT_STEP

    @classmethod
    def zero(cls, dim: int) -> ContorsionField:
        return cls(dim)

    @property
    def is_zero(self) -> bool:
        return self.value_fn is None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        shape = (*x.shape[:-1], self.dim, self.dim, self.dim)
        if self.value_fn is None:
            return np.zeros(shape)
        return np.broadcast_to(np.asarray(self.value_fn(x), dtype=np.float64), shape)

    def derivative(self, x: np.ndarray) -> np.ndarray:
        """∂_k K_iab as an array of shape (..., k, i, a, b)."""
        x = np.asarray(x, dtype=np.float64)
        shape = (*x.shape[:-1], self.dim, self.dim, self.dim, self.dim)
        if self.value_fn is None:
            return np.zeros(shape)
        if self.derivative_fn is not None:
            return np.broadcast_to(np.asarray(self.derivative_fn(x), dtype=np.float64), shape)
        return central_difference(self, x, self.step)

    def check(self, points: np.ndarray, tol: float = 1e-12) -> None:
        k = self(points)
        skew = np.max(np.abs(k + np.swapaxes(k, -1, -2)), initial=0.0)
        if skew > tol * max(1.0, float(np.max(np.abs(k), initial=0.0))):
            raise GeometryError(
                f"contorsion is not skew in its frame indices (max violation {skew:.3e})"
            )


@dataclass(frozen=True, eq=False)
class FrameField:
    """Orthonormal coframe from the Cholesky factor of the metric."""

    metric: MetricField

    def _cholesky(self, x: np.ndarray) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.metric(x))
        except np.linalg.LinAlgError as exc:
            raise GeometryError("metric is not positive definite at an evaluation point") from exc

    def coframe(self, x: np.ndarray) -> np.ndarray:
        """F[..., a, i] = f^a_i."""
        return np.swapaxes(self._cholesky(x), -1, -2)

    def frame(self, x: np.ndarray) -> np.ndarray:
        """E[..., a, i] = f_a^i."""
        return np.swapaxes(np.linalg.inv(self.coframe(x)), -1, -2)

    def coframe_derivative(self, x: np.ndarray) -> np.ndarray:
        """∂_k f^a_i as an array of shape (..., k, a, i), from the Cholesky derivative."""
        chol = self._cholesky(x)
        chol_inv = np.linalg.inv(chol)[..., None, :, :]
        dg = self.metric.derivative(x)
        inner = chol_inv @ dg @ np.swapaxes(chol_inv, -1, -2)
        phi = np.tril(inner, -1) + 0.5 * np.einsum("...ii->...i", inner)[..., None] * np.eye(
            self.metric.dim
        )
        d_chol = chol[..., None, :, :] @ phi
        return np.swapaxes(d_chol, -1, -2)

    def orthonormality_residual(self, x: np.ndarray) -> float:
        coframe = self.coframe(x)
        product = coframe @ self.metric.inverse(x) @ np.swapaxes(coframe, -1, -2)
        return float(np.max(np.abs(product - np.eye(self.metric.dim))))


def christoffel(metric: MetricField, x: np.ndarray) -> np.ndarray:
    """Levi-Civita symbols Γ̂^s_il as an array of shape (..., s, i, l)."""
    g_inv = metric.inverse(x)
    dg = metric.derivative(x)
    term = dg + np.swapaxes(dg, -3, -2) - np.moveaxis(dg, -3, -1)
    return 0.5 * np.einsum("...sm,...ilm->...sil", g_inv, term)


def torsion_forms(contorsion: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form (a, B) of a contorsion array.

    Returns:
        a[..., b] = -½ Σ_a K_aab and the fully antisymmetric B[..., i, j, k]
        whose entries for i < j < k are the coefficients of e^i∧e^j∧e^k
    """
    k = np.asarray(contorsion)
    a = -0.5 * np.einsum("...aab->...b", k)
    b = 0.25 * (
        k
        - np.einsum("...ijk->...ikj", k)
        - np.einsum("...ijk->...jik", k)
        + np.einsum("...ijk->...jki", k)
        + np.einsum("...ijk->...kij", k)
        - np.einsum("...ijk->...kji", k)
    )
    return a, b


def three_form_coefficients(b_full: np.ndarray) -> np.ndarray:
    """Coefficient vectors over all blades of a 3-form given as a full antisymmetric array."""
    d = b_full.shape[-1]
    coeffs = np.zeros((*b_full.shape[:-3], 1 << d))
    for mask in np.flatnonzero(blade_grades(d) == 3):
        i, j, k = (bit for bit in range(d) if mask >> bit & 1)
        coeffs[..., mask] = b_full[..., i, j, k]
    return coeffs


def one_form_coefficients(a: np.ndarray) -> np.ndarray:
    d = a.shape[-1]
    coeffs = np.zeros((*a.shape[:-1], 1 << d))
    for i in range(d):
        coeffs[..., 1 << i] = a[..., i]
    return coeffs


@dataclass(frozen=True, eq=False)
class TorsionDecomposition:
    """The 1-form a and 3-form B through which torsion enters the Dirac operator."""

    a: Multivector
    b: Multivector

    @property
    def a_vector(self) -> np.ndarray:
        return np.array([self.a.coeffs[1 << i].real for i in range(self.a.dim)])


def dirac_decompose(
    contorsion: ContorsionField, x: np.ndarray, tol: float = 1e-12
) -> TorsionDecomposition:
    """Grade split of σ(Σ_i c(e^i) ¼ K_iab c(e^a)c(e^b)) at a single point."""
    k = contorsion(np.asarray(x, dtype=np.float64).reshape(contorsion.dim))
    d = contorsion.dim
    total = CliffordElement.scalar(d, 0.0)
    for i in range(d):
        ci = CliffordElement.generator(d, i + 1)
        for a in range(d):
            for b in range(d):
                if k[i, a, b] != 0.0:
                    total = total + 0.25 * k[i, a, b] * (
                        ci * CliffordElement.generator(d, a + 1, b + 1)
                    )
    form = symbol(total)
    stray = form - form.grade(1) - form.grade(3)
    if stray.norm > tol * max(1.0, float(np.max(np.abs(k)))):
        raise GeometryError(f"Dirac contorsion term has stray grades (residual {stray.norm:.3e})")
    return TorsionDecomposition(form.grade(1), form.grade(3))


@dataclass(frozen=True, eq=False)
class ConnectionField:
    """Metric-compatible connection D = D̂ + K, its Levi-Civita part, or the 3B variant."""

    metric: MetricField
    contorsion: ContorsionField
    kind: str = "full"

    def __post_init__(self) -> None:
        if self.kind not in CONNECTION_KINDS:
            raise GeometryError(f"unknown connection kind '{self.kind}'")

    @cached_property
    def frames(self) -> FrameField:
        return FrameField(self.metric)

    @property
    def dim(self) -> int:
        return self.metric.dim

    def with_kind(self, kind: str) -> ConnectionField:
        return ConnectionField(self.metric, self.contorsion, kind)

    def levi_civita(self, x: np.ndarray) -> np.ndarray:
        """ω̂[..., i, a, b] of the Levi-Civita connection."""
        coframe = self.frames.coframe(x)
        frame = np.swapaxes(np.linalg.inv(coframe), -1, -2)
        d_coframe = self.frames.coframe_derivative(x)
        gamma = christoffel(self.metric, x)
        omega = -np.einsum("...iaj,...bj->...iab", d_coframe, frame) + np.einsum(
            "...aj,...jik,...bk->...iab", coframe, gamma, frame
        )
        return 0.5 * (omega - np.swapaxes(omega, -1, -2))

    def omega(self, x: np.ndarray) -> np.ndarray:
        """ω[..., i, a, b] of this connection along coordinate directions."""
        x = np.asarray(x, dtype=np.float64)
        lc = self.levi_civita(x)
        if self.kind == "levi-civita" or self.contorsion.is_zero:
            return lc
        coframe = self.frames.coframe(x)
        k = self.contorsion(x)
        if self.kind == "full":
            return lc - np.einsum("...ci,...cab->...iab", coframe, k)
        _, b = torsion_forms(k)
        return lc - 2.0 * np.einsum("...ci,...cab->...iab", coframe, b)

    def frame_omega(self, x: np.ndarray) -> np.ndarray:
        """ω(f_c)[..., c, a, b]."""
        return np.einsum("...ci,...iab->...cab", self.frames.frame(x), self.omega(x))

    def coordinate_christoffel(self, x: np.ndarray) -> np.ndarray:
        """Γ[..., j, i, k] with D_{∂_i} ∂_k = Σ_j Γ^j_ik ∂_j."""
        coframe = self.frames.coframe(x)
        frame = np.swapaxes(np.linalg.inv(coframe), -1, -2)
        d_coframe = self.frames.coframe_derivative(x)
        return np.einsum("...bj,...ibk->...jik", frame, d_coframe) + np.einsum(
            "...aj,...iab,...bk->...jik", frame, self.omega(x), coframe
        )

    def metric_compatibility_residual(self, x: np.ndarray) -> float:
        """max |∂_k g_ij - Σ_l (Γ^l_ki g_lj + Γ^l_kj g_il)|."""
        g = self.metric(x)
        dg = self.metric.derivative(x)
        gamma = self.coordinate_christoffel(x)
        residual = (
            dg
            - np.einsum("...lki,...lj->...kij", gamma, g)
            - np.einsum("...lkj,...il->...kij", gamma, g)
        )
        return float(np.max(np.abs(residual)))

    def torsion(self, x: np.ndarray) -> np.ndarray:
        """Frame torsion T[..., a, m, k] from the first structure equation."""
        coframe = self.frames.coframe(x)
        frame = np.swapaxes(np.linalg.inv(coframe), -1, -2)
        d_coframe = self.frames.coframe_derivative(x)
        omega = self.omega(x)
        exterior = np.einsum("...iaj->...aij", d_coframe)
        exterior = exterior - np.swapaxes(exterior, -1, -2)
        wedge = np.einsum("...iab,...bj->...aij", omega, coframe)
        coord = exterior + wedge - np.swapaxes(wedge, -1, -2)
        return np.einsum("...mi,...kj,...aij->...amk", frame, frame, coord)


@dataclass(frozen=True, eq=False)
class CurvatureData:
    """Curvature, torsion and scalar curvature at a set of points."""

    riemann: np.ndarray
    torsion: np.ndarray
    scalar: np.ndarray

    @property
    def dim(self) -> int:
        return self.riemann.shape[-1]

    @property
    def ricci(self) -> np.ndarray:
        """Ric(f_k, f_b) = Σ_a R[a, k, b, a]."""
        return np.einsum("...akba->...kb", self.riemann)

    @property
    def gauss(self) -> np.ndarray:
        """⟨R(f_1, f_2) f_2, f_1⟩, the Gauss curvature when d = 2."""
        return self.riemann[..., 0, 1, 1, 0]

    @property
    def twist(self) -> np.ndarray:
        """c(F) = ⅛ Σ R_ijnm c_i c_j c*_m c*_n on Λ*(R^d)."""
        return twist_curvature_operator(self.riemann)

    @property
    def bianchi_residual(self) -> float:
        r = self.riemann
        cyclic = r + np.einsum("...kamb->...mkab", r) + np.einsum("...amkb->...mkab", r)
        return float(np.max(np.abs(cyclic)))


def _curvature_tensor(connection: ConnectionField, x: np.ndarray, step: float) -> np.ndarray:
    omega = connection.omega(x)
    d_omega = central_difference(connection.omega, x, step)
    two_form = (
        d_omega
        - np.swapaxes(d_omega, -4, -3)
        + np.einsum("...iac,...jcb->...ijab", omega, omega)
        - np.einsum("...jac,...icb->...ijab", omega, omega)
    )
    frame = connection.frames.frame(x)
    riemann = np.einsum("...mi,...kj,...ijab->...mkab", frame, frame, two_form)
    return np.swapaxes(riemann, -1, -2)


def curvature(connection: ConnectionField, x: np.ndarray, step: float | None = None) -> CurvatureData:
    """Curvature R = dω + ω∧ω in the orthonormal frame, with torsion and LC scalar curvature."""
    x = np.asarray(x, dtype=np.float64)
    step = connection.metric.step if step is None else step
    riemann = _curvature_tensor(connection, x, step)
    if connection.kind == "levi-civita" or connection.contorsion.is_zero:
        lc = riemann
    else:
        lc = _curvature_tensor(connection.with_kind("levi-civita"), x, step)
    scalar = np.einsum("...abba->...", lc)
    return CurvatureData(riemann, connection.torsion(x), scalar)


def euler_form(curv: CurvatureData, metric: MetricField, x: np.ndarray) -> np.ndarray:
    """Pf(-R)/(2π)^l as a density against the coordinate volume."""
    half = curv.dim // 2
    pf = curvature_pfaffian_permutation(curv.riemann)
    return pf * metric.sqrt_det(x) / (2.0 * math.pi) ** half


@dataclass(frozen=True, eq=False)
class GeometrySpec:
    """Chart, metric and contorsion of one example geometry."""

    name: str
    domain: ChartDomain
    metric: MetricField
    contorsion: ContorsionField
    params: Mapping[str, float] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def connection(self, kind: str = "full") -> ConnectionField:
        return ConnectionField(self.metric, self.contorsion, kind)

    def without_contorsion(self) -> GeometrySpec:
        return GeometrySpec(
            f"{self.name}+lc", self.domain, self.metric, ContorsionField.zero(self.dim), self.params
        )

    def curvature(self, x: np.ndarray, kind: str = "full") -> CurvatureData:
        return curvature(self.connection(kind), x)

    def euler_density(self, x: np.ndarray, kind: str = "full") -> np.ndarray:
        return euler_form(self.curvature(x, kind), self.metric, x)

    def validate(self, samples: int = 100, seed: int = 0) -> None:
        """Check metric symmetry and definiteness, contorsion skewness and frame orthonormality."""
        if self.metric.dim != self.dim or self.contorsion.dim != self.dim:
            raise GeometryError("metric, contorsion and chart dimensions differ")
        points = self.domain.sample(np.random.default_rng(seed), samples)
        self.metric.check(points)
        self.contorsion.check(points)
        residual = FrameField(self.metric).orthonormality_residual(points)
        if residual > 1e-12 * max(1.0, float(np.max(np.abs(self.metric(points))))):
            raise GeometryError(f"frame orthonormality residual {residual:.3e}")


def _chunked(fn: ArrayFn, points: np.ndarray, chunk: int = 4096) -> np.ndarray:
    return np.concatenate([fn(points[i : i + chunk]) for i in range(0, len(points), chunk)])


def euler_characteristic(
    geometry: GeometrySpec, points: int | None = None, kind: str = "full"
) -> float:
    """Quadrature of the Euler form over the chart.

    Periodic boxes use the trapezoidal rule on a uniform grid (spectrally accurate
    for smooth periodic densities). Full-space charts (d = 2) use Gauss-Legendre in
    the compactified radius r = u/(1-u) and the trapezoidal rule in angle.
    """
    dim = geometry.dim
    density = lambda pts: geometry.euler_density(pts, kind)  # noqa: E731
    if geometry.domain.periodic:
        n = points if points is not None else (64 if dim == 2 else 12)
        sides = np.asarray(geometry.domain.sides)
        axes = [np.arange(n) * side / n for side in sides]
        nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        total = float(np.sum(_chunked(density, nodes)) * np.prod(sides / n))
    else:
        if dim != 2:
            raise GeometryError("full-space quadrature is available for d = 2 only")
        n = points if points is not None else 200
        u, weights = np.polynomial.legendre.leggauss(n)
        u = 0.5 * (u + 1.0)
        weights = 0.5 * weights
        radius = u / (1.0 - u)
        jacobian = radius / (1.0 - u) ** 2
        angles = np.arange(2 * n // 3) * (2 * math.pi / (2 * n // 3))
        rr, aa = np.meshgrid(radius, angles, indexing="ij")
        nodes = np.stack([rr * np.cos(aa), rr * np.sin(aa)], axis=-1).reshape(-1, 2)
        values = _chunked(density, nodes).reshape(rr.shape)
        total = float(np.sum(values * (weights * jacobian)[:, None]) * (2 * math.pi / len(angles)))
    if not math.isfinite(total):
        raise GeometryError(f"Euler characteristic quadrature failed for '{geometry.name}'")
    log.info("euler characteristic of %s (%s connection): %.3e", geometry.name, kind, total)
    return total
