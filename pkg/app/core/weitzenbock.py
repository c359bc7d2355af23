"""Finite-difference check of the Weitzenböck formula for D² on Λ*.

Both sides of

    D² = -Δ^β - 2 Σ_a a_a ∇^β_{f_a} + C,
    C  = s/4 + c(F) + c(dB) - 2|B|² + c(D̂a) - |a|²,

are applied to random smooth sections on a periodic grid and compared at random
nodes. ∇^β is the Levi-Civita connection on the spinor factor shifted by the
torsion 3-form (ω̂ - 2B), tensored with D on the dual factor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from app.core.bundle import BundleFields, apply_skew
from app.core.geometry import GeometrySpec, torsion_forms
from app.core.hodge import DiscreteDirac, Grid, check_dofs, max_section_dofs
from app.core.stencils import fit_slope

log = logging.getLogger(__name__)

EXACT_THRESHOLD = 1e-10


@dataclass(frozen=True)
class WeitzenbockReport:
    geometry: str
    grid_points: tuple[int, ...]
    residuals: tuple[float, ...]

    @property
    def exact(self) -> bool:
        return max(self.residuals) < EXACT_THRESHOLD

    @property
    def slope(self) -> float:
        """Convergence order of the residual under grid refinement."""
        if self.exact:
            return float("nan")
        return fit_slope(1.0 / np.array(self.grid_points), np.array(self.residuals))

    def passed(self, min_slope: float = 2.0) -> bool:
        return self.exact or self.slope >= min_slope


def smooth_sections(grid: Grid, count: int, rng: np.random.Generator) -> np.ndarray:
    """Random trigonometric sections built from the modes k ∈ {-1, 0, 1}^d.

    Returns:
        Array of shape (count, nodes, 2^d)
    """
    d = grid.dim
    fiber = 1 << d
    nodes = grid.nodes()
    waves = np.array(np.meshgrid(*[[-1, 0, 1]] * d, indexing="ij")).reshape(d, -1).T
    phase = nodes @ (2 * np.pi * waves / np.asarray(grid.domain.sides)).T
    cos_c = rng.standard_normal((count, len(waves), fiber))
    sin_c = rng.standard_normal((count, len(waves), fiber))
    return np.einsum("nk,ckf->cnf", np.cos(phase), cos_c) + np.einsum(
        "nk,ckf->cnf", np.sin(phase), sin_c
    )


class WeitzenbockSides:
    """Both sides of the identity on one grid."""

    def __init__(self, geometry: GeometrySpec, grid: Grid, cap: int | None = None) -> None:
        limit = max_section_dofs() if cap is None else cap
        check_dofs(geometry.dim, grid, limit, "GBCHECK_MAX_SECTION_DOFS")
        self.geometry = geometry
        self.grid = grid
        self.dirac = DiscreteDirac(geometry, grid, "full")
        self.bundle = BundleFields(geometry)
        nodes = grid.nodes()
        _, self.three_form = torsion_forms(geometry.contorsion(nodes))

    def nabla(self, u: np.ndarray, a: int) -> np.ndarray:
        """∇^β_{f_a} u on the whole grid."""
        dirac = self.dirac
        out = np.zeros_like(u)
        for i in range(self.grid.dim):
            out += dirac.frame[:, a, i, None] * self.grid.derivative(u, i)
        out += apply_skew(dirac.levi_civita[:, a], u, dirac.left, -0.25)
        out += apply_skew(dirac.omega[:, a], u, dirac.right, 0.25)
        out += apply_skew(self.three_form[:, a], u, dirac.left, 0.5)
        return out

    def lhs(self, u: np.ndarray, sample: np.ndarray) -> np.ndarray:
        return self.dirac.apply(self.dirac.apply(u))[sample]

    def rhs(self, u: np.ndarray, sample: np.ndarray) -> np.ndarray:
        d = self.grid.dim
        lc = self.dirac.levi_civita
        first = [self.nabla(u, a) for a in range(d)]
        laplacian = np.zeros((len(sample), u.shape[1]))
        for a in range(d):
            laplacian += self.nabla(first[a], a)[sample]
            for b in range(d):
                laplacian -= lc[sample, a, b, a, None] * first[b][sample]
        points = self.grid.nodes()[sample]
        one_form, _ = self.bundle.torsion(points)
        drift = sum(one_form[:, a, None] * first[a][sample] for a in range(d))
        potential = np.einsum("mij,mj->mi", self.bundle.potential(points), u[sample])
        return -laplacian - 2.0 * drift + potential


def weitzenbock_residual(
    geometry: GeometrySpec, grid: Grid, trials: int = 3, samples: int = 16, seed: int = 0
) -> float:
    """max |D²u - (-Δ^β u - 2 a·∇^β u + C u)| / max |D²u| over random sections and nodes."""
    rng = np.random.default_rng(seed)
    sides = WeitzenbockSides(geometry, grid)
    sample = rng.choice(grid.size, size=min(samples, grid.size), replace=False)
    worst = 0.0
    for u in smooth_sections(grid, trials, rng):
        lhs = sides.lhs(u, sample)
        rhs = sides.rhs(u, sample)
        worst = max(worst, float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(lhs))))
    log.debug("weitzenbock residual on %s, N=%d: %.3e", geometry.name, grid.points, worst)
    return worst


def weitzenbock_check(
    geometry: GeometrySpec,
    grid_points: tuple[int, ...],
    trials: int = 3,
    samples: int = 16,
    seed: int = 0,
    scheme: str = "fd4",
) -> WeitzenbockReport:
    """Residuals of the Weitzenböck identity over a sequence of grid sizes."""
    grids = [Grid(geometry.domain, n, scheme) for n in grid_points]
    limit = max_section_dofs()
    for grid in grids:
        check_dofs(geometry.dim, grid, limit, "GBCHECK_MAX_SECTION_DOFS")
    residuals = tuple(
        weitzenbock_residual(geometry, grid, trials, samples, seed) for grid in grids
    )
    report = WeitzenbockReport(geometry.name, tuple(grid_points), residuals)
    log.info(
        "weitzenbock check on %s: residuals %s, slope %.3f",
        geometry.name,
        ", ".join(f"{r:.3e}" for r in residuals),
        report.slope,
    )
    return report
