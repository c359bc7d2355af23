"""Discrete Hodge-Dirac operator and heat semigroup on periodic grids.

Grid functions with values in Λ*(R^d) are stored as arrays of shape (nodes, 2^d)
in C order of the node multi-index. The operator is applied matrix-free:

    D u = Σ_a c(f^a) ½ (f_a^i ∂_i u + W⁻¹ ∂_i (W f_a^i u))
          + Σ_a c(f^a) (∇ on Λ*)(f_a) u - ½ Σ_a div(f_a) c(f^a) u

with W = √det g. The split first-order part keeps D symmetric with respect to
the W-weighted inner product when the connection is Levi-Civita. The heat
semigroup is exp(-t D²/2).
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.sparse.linalg import LinearOperator

from app.core.bundle import apply_skew
from app.core.errors import GridError
from app.core.geometry import ChartDomain, GeometrySpec
from app.core.krylov import exp_times_vector
from app.core.representations import double_rep
from app.core.stencils import SCHEMES, derivative_symbol, lowpass_kernel, periodic_derivative

log = logging.getLogger(__name__)

DEFAULT_MAX_DOFS = 32768
DEFAULT_MAX_DENSE_DOFS = 4096
DEFAULT_MAX_SECTION_DOFS = 1 << 21
MIN_POINTS = 8
# dense McKean-Singer grids: the supertrace identity is exact at any resolution
MIN_DENSE_POINTS = 4


def _env_cap(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise GridError(f"{name} must be an integer, got '{raw}'") from None
    if value <= 0:
        raise GridError(f"{name} must be positive, got {value}")
    return value


def max_dofs() -> int:
    """Memory cap on fiber·nodes for heat runs, overridable through GBCHECK_MAX_DOFS."""
    return _env_cap("GBCHECK_MAX_DOFS", DEFAULT_MAX_DOFS)


def max_dense_dofs() -> int:
    return _env_cap("GBCHECK_MAX_DENSE_DOFS", DEFAULT_MAX_DENSE_DOFS)


def max_section_dofs() -> int:
    """Cap on fiber·nodes for matrix-free identity checks, overridable through GBCHECK_MAX_SECTION_DOFS."""
    return _env_cap("GBCHECK_MAX_SECTION_DOFS", DEFAULT_MAX_SECTION_DOFS)


def check_dofs(dim: int, grid: Grid, limit: int, variable: str) -> int:
    """Number of fiber·nodes dofs of a section on ``grid``; GridError above ``limit``."""
    dofs = (1 << dim) * grid.size
    if dofs > limit:
        raise GridError(
            f"{1 << dim} x {grid.size} dofs exceed the cap of {limit} (set {variable} to raise it)"
        )
    return dofs


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with N points per axis."""

    domain: ChartDomain
    points: int
    scheme: str = "spectral"
    minimum: int = field(default=MIN_POINTS, repr=False)

    def __post_init__(self) -> None:
        if not self.domain.periodic:
            raise GridError("discrete operators need a periodic chart")
        if self.points < self.minimum:
            raise GridError(f"grids need at least {self.minimum} points per axis, got {self.points}")
        if self.scheme not in SCHEMES:
            raise GridError(f"unknown derivative scheme '{self.scheme}'")

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def size(self) -> int:
        return self.points**self.dim

    @property
    def spacing(self) -> np.ndarray:
        return np.asarray(self.domain.sides) / self.points

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def nodes(self) -> np.ndarray:
        axes = [np.arange(self.points) * h for h in self.spacing]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)

    def nearest_node(self, x: np.ndarray) -> int:
        index = np.round(np.asarray(x, dtype=np.float64) / self.spacing).astype(int) % self.points
        return int(np.ravel_multi_index(tuple(index), self.shape))

    def node(self, index: int) -> np.ndarray:
        return np.array(np.unravel_index(index, self.shape)) * self.spacing

    def derivative(self, u: np.ndarray, axis: int) -> np.ndarray:
        """∂_axis of grid data of shape (nodes, F)."""
        fiber = u.shape[1:]
        grid_u = u.reshape(*self.shape, *fiber)
        du = periodic_derivative(grid_u, axis, float(self.spacing[axis]), self.scheme)
        return du.reshape(u.shape)

    def lowpass_delta(self, index: int) -> np.ndarray:
        """Fourier-filtered unit mass at a node (keeps |k| ≤ ⅔ of the Nyquist wavenumber)."""
        multi = np.unravel_index(index, self.shape)
        kernel = np.ones(1)
        for center in multi:
            kernel = np.multiply.outer(kernel, lowpass_kernel(self.points, int(center)))
        return kernel.reshape(-1)


class DiscreteDirac:
    """Coefficient arrays of D on a grid and their matrix-free application."""

    def __init__(self, geometry: GeometrySpec, grid: Grid, kind: str = "full") -> None:
        if geometry.dim != grid.dim:
            raise GridError(f"grid of dimension {grid.dim} for a {geometry.dim}-dimensional geometry")
        self.geometry = geometry
        self.grid = grid
        self.kind = kind
        nodes = grid.nodes()
        connection = geometry.connection(kind)
        self.frame = connection.frames.frame(nodes)
        self.weights = geometry.metric.sqrt_det(nodes)
        self.omega = connection.frame_omega(nodes)
        if kind == "levi-civita":
            self.levi_civita = self.omega
        else:
            self.levi_civita = connection.with_kind("levi-civita").frame_omega(nodes)
        # div f_a = Σ_b ω̂(f_b)[b, a]
        self.divergence = np.einsum("nbba->na", self.levi_civita)
        rep = double_rep(geometry.dim)
        self.left = np.stack(rep.left_generators)
        self.right = np.stack(rep.right_generators)
        self.grading = rep.grading

    @property
    def fiber(self) -> int:
        return self.left.shape[-1]

    def derivation(self, a: int, u: np.ndarray) -> np.ndarray:
        """The connection on Λ* along f_a, applied pointwise."""
        skew = self.omega[:, a]
        return apply_skew(skew, u, self.left, -0.25) + apply_skew(skew, u, self.right, 0.25)

    def apply(self, u: np.ndarray) -> np.ndarray:
        d = self.grid.dim
        left_u = np.einsum("aij,nj->ani", self.left, u)
        out = np.zeros_like(u)
        weights = self.weights[:, None]
        for i in range(d):
            coef = self.frame[:, :, i]
            out += 0.5 * np.einsum("na,aij,nj->ni", coef, self.left, self.grid.derivative(u, i))
            flux = weights * np.einsum("na,ani->ni", coef, left_u)
            out += 0.5 * self.grid.derivative(flux, i) / weights
        zeroth = np.stack(
            [self.derivation(a, u) - 0.5 * self.divergence[:, a, None] * u for a in range(d)]
        )
        return out + np.einsum("aij,anj->ni", self.left, zeroth)


@dataclass(frozen=True, eq=False)
class HeatOperator:
    """D, D² and the heat generator -½D² on a periodic grid."""

    geometry: GeometrySpec
    grid: Grid
    kind: str
    stencil: DiscreteDirac

    @property
    def fiber(self) -> int:
        return self.stencil.fiber

    @property
    def size(self) -> int:
        return self.grid.size * self.fiber

    @property
    def weights(self) -> np.ndarray:
        return self.stencil.weights

    @property
    def grading(self) -> np.ndarray:
        return self.stencil.grading

    def apply_dirac(self, u: np.ndarray) -> np.ndarray:
        return self.stencil.apply(u)

    def apply_laplacian(self, u: np.ndarray) -> np.ndarray:
        return self.stencil.apply(self.stencil.apply(u))

    def _linear(self, fn: Callable[[np.ndarray], np.ndarray]) -> LinearOperator:
        shape = (self.grid.size, self.fiber)
        return LinearOperator(
            (self.size, self.size),
            matvec=lambda v: fn(np.reshape(v, shape)).reshape(-1),
            dtype=np.float64,
        )

    @cached_property
    def dirac(self) -> LinearOperator:
        return self._linear(self.apply_dirac)

    @cached_property
    def laplacian(self) -> LinearOperator:
        return self._linear(self.apply_laplacian)

    @cached_property
    def generator(self) -> LinearOperator:
        return self._linear(lambda u: -0.5 * self.apply_laplacian(u))

    def to_dense(self, which: str = "dirac") -> np.ndarray:
        """Dense matrix of D, D² or -½D², column by column."""
        if self.size > max_dense_dofs():
            raise GridError(
                f"dense matrix of {self.size} dofs exceeds the dense cap {max_dense_dofs()}"
            )
        op = {"dirac": self.dirac, "laplacian": self.laplacian, "generator": self.generator}[which]
        return op.matmat(np.eye(self.size))

    @cached_property
    def dense_generator(self) -> np.ndarray:
        return self.to_dense("generator")


def assemble_dirac(
    geometry: GeometrySpec, grid: Grid, kind: str = "full", cap: int | None = None
) -> HeatOperator:
    """Discrete Dirac operator of ``geometry`` on ``grid`` under the dof cap."""
    limit = max_dofs() if cap is None else cap
    dofs = check_dofs(geometry.dim, grid, limit, "GBCHECK_MAX_DOFS")
    log.info(
        "assembling Dirac operator on %s: N=%d, %d dofs, scheme %s",
        geometry.name,
        grid.points,
        dofs,
        grid.scheme,
    )
    return HeatOperator(geometry, grid, kind, DiscreteDirac(geometry, grid, kind))


def _as_times(t: float | Sequence[float]) -> tuple[list[float], bool]:
    if isinstance(t, (int, float)):
        return [float(t)], True
    return [float(v) for v in t], False


def heat_diag(
    op: HeatOperator,
    t: float | Sequence[float],
    node: int,
    method: str = "arnoldi",
    tol: float = 1e-9,
) -> np.ndarray:
    """Fiber block h(t, x, x) of the heat kernel density at a grid node.

    Returns:
        Array (F, F) for a single time, (T, F, F) for a sequence of increasing times
    """
    times, single = _as_times(t)
    if any(v <= 0 for v in times):
        raise GridError("heat times must be positive")
    delta = op.grid.lowpass_delta(node)
    scale = op.grid.cell_volume * op.weights[node]
    blocks = np.zeros((len(times), op.fiber, op.fiber))
    for a in range(op.fiber):
        start = np.zeros((op.grid.size, op.fiber))
        start[:, a] = delta
        results = exp_times_vector(op.generator, start.reshape(-1), times, method, tol)
        for k, w in enumerate(results):
            blocks[k, :, a] = delta @ w.reshape(op.grid.size, op.fiber) / scale
    return blocks[0] if single else blocks


@dataclass(frozen=True)
class SupertraceProfile:
    """Local supertrace densities Str h(t, x, x)·√g with their t → 0 extrapolation."""

    times: tuple[float, ...]
    points: np.ndarray
    density: np.ndarray
    extrapolated: np.ndarray
    error: np.ndarray
    reference: np.ndarray

    @property
    def abs_err(self) -> np.ndarray:
        return np.abs(self.extrapolated - self.reference)

    def passed(self, relative: float = 0.05, absolute: float = 0.01, threshold: float = 0.05) -> bool:
        """Relative tolerance where 2π|reference| exceeds ``threshold``, absolute elsewhere."""
        significant = 2 * math.pi * np.abs(self.reference) > threshold
        allowed = np.where(significant, relative * np.abs(self.reference), absolute)
        return bool(np.all(self.abs_err <= allowed))

    def rows(self) -> list[tuple[float, ...]]:
        out = []
        for k, t in enumerate(self.times):
            for j, x in enumerate(self.points):
                out.append((t, *x, self.density[k, j], np.nan, self.reference[j], np.nan))
        for j, x in enumerate(self.points):
            out.append(
                (0.0, *x, np.nan, self.extrapolated[j], self.reference[j], self.abs_err[j])
            )
        return out


def richardson(times: Sequence[float], values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Intercept of the linear model c₀ + c₁t through the two smallest times.

    The error estimate is the distance to the least-squares line through the three
    smallest times (NaN with only two times).
    """
    order = np.argsort(times)
    t = np.asarray(times)[order]
    v = np.asarray(values)[order]
    t1, t2 = t[0], t[1]
    c0 = (t2 * v[0] - t1 * v[1]) / (t2 - t1)
    if len(t) < 3:
        return c0, np.full_like(c0, np.nan)
    design = np.stack([np.ones(3), t[:3]], axis=1)
    fit = np.linalg.lstsq(design, v[:3].reshape(3, -1), rcond=None)[0][0].reshape(c0.shape)
    return c0, np.abs(fit - c0)


def supertrace_profile(
    op: HeatOperator,
    times: Sequence[float],
    points: np.ndarray,
    method: str = "arnoldi",
    tol: float = 1e-9,
) -> SupertraceProfile:
    """Supertrace densities at the grid nodes nearest to ``points`` with t → 0 extrapolation."""
    times = sorted(float(t) for t in times)
    if len(times) < 2:
        raise GridError("extrapolation needs at least two times")
    floor = float(np.max(op.grid.spacing)) ** 2
    if times[0] < floor:
        raise GridError(f"time {times[0]} is below the grid resolution h² = {floor:.3e}")
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    nodes = [op.grid.nearest_node(p) for p in points]
    coords = np.array([op.grid.node(i) for i in nodes])
    density = np.zeros((len(times), len(nodes)))
    for j, node in enumerate(nodes):
        blocks = heat_diag(op, times, node, method, tol)
        density[:, j] = np.einsum("kaa,a->k", blocks, op.grading) * op.weights[node]
        log.debug("supertrace at node %d: %s", node, density[:, j])
    extrapolated, error = richardson(times, density)
    reference = op.geometry.euler_density(coords, op.kind)
    log.info("supertrace profile on %s: %d points, %d times", op.geometry.name, len(nodes), len(times))
    return SupertraceProfile(tuple(times), coords, density, extrapolated, error, reference)


def mckean_singer_grid(domain: ChartDomain, scheme: str = "spectral") -> Grid:
    """Finest grid whose dense generator fits under the dense cap."""
    fiber = 1 << domain.dim
    n = MIN_DENSE_POINTS
    while fiber * (n + 1) ** domain.dim <= max_dense_dofs():
        n += 1
    return Grid(domain, n, scheme, minimum=MIN_DENSE_POINTS)


def mckean_singer(op: HeatOperator, t: float) -> float:
    """Global discrete supertrace Str exp(-tD²/2) from the dense generator."""
    if t <= 0:
        raise GridError("heat times must be positive")
    diagonal = np.diagonal(expm(t * op.dense_generator))
    grading = np.tile(op.grading, op.grid.size)
    return float(diagonal @ grading)


def grading_anticommutator(op: HeatOperator, seed: int = 0) -> float:
    """max |Dτu + τDu| for a random section u."""
    u = np.random.default_rng(seed).standard_normal((op.grid.size, op.fiber))
    tau = op.grading
    return float(np.max(np.abs(op.apply_dirac(u * tau) + op.apply_dirac(u) * tau)))


def self_adjointness_residual(op: HeatOperator, seed: int = 0) -> float:
    """|⟨u, Dv⟩_W - ⟨Du, v⟩_W| relative to ‖u‖_W ‖Dv‖_W for random sections."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((op.grid.size, op.fiber))
    v = rng.standard_normal((op.grid.size, op.fiber))
    w = op.weights[:, None]
    dv = op.apply_dirac(v)
    lhs = np.sum(w * u * dv)
    rhs = np.sum(w * op.apply_dirac(u) * v)
    scale = math.sqrt(np.sum(w * u * u) * np.sum(w * dv * dv))
    return float(abs(lhs - rhs) / scale)


def plane_wave_symbol(op: HeatOperator, wave: Sequence[int]) -> tuple[float, float]:
    """D² on cos(k·x) against the discrete and the continuum symbol (flat geometries).

    Returns:
        (discrete error, continuum error), both relative to the continuum symbol
    """
    k = 2 * math.pi * np.asarray(wave, dtype=np.float64) / np.asarray(op.grid.domain.sides)
    nodes = op.grid.nodes()
    profile = np.cos(nodes @ k)
    u = np.repeat(profile[:, None], op.fiber, axis=1)
    result = op.apply_laplacian(u)
    spacing = op.grid.spacing
    discrete = sum(derivative_symbol(k[i], spacing[i], op.grid.scheme) ** 2 for i in range(len(k)))
    continuum = float(k @ k)
    scale = max(continuum, 1.0)
    return (
        float(np.max(np.abs(result - discrete * u))) / scale,
        float(np.max(np.abs(result - continuum * u))) / scale,
    )


def semigroup_residual(op: HeatOperator, t: float, node: int, tol: float = 1e-10) -> float:
    """Two half steps of the semigroup against one full step, on the filtered delta."""
    start = np.zeros((op.grid.size, op.fiber))
    start[:, 0] = op.grid.lowpass_delta(node)
    start = start.reshape(-1)
    (full,) = exp_times_vector(op.generator, start, [t], tol=tol)
    (half,) = exp_times_vector(op.generator, start, [t / 2], tol=tol)
    (twice,) = exp_times_vector(op.generator, half, [t / 2], tol=tol)
    return float(np.max(np.abs(full - twice)) / np.max(np.abs(full)))
