"""Riemannian normal coordinates with radially parallel frames.

Geodesics of the Levi-Civita connection are shot from an origin; along each one
the orthonormal frame is transported by the chosen connection. In these
coordinates the connection coefficients satisfy
Γ_i(y) = -½ Σ_j R(∂_i, ∂_j)(0) y^j + O(|y|²), which is what the check measures.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from app.core.errors import GeodesicError
from app.core.geometry import GeometrySpec, christoffel, curvature
from app.core.stencils import fit_slope

log = logging.getLogger(__name__)

DEFAULT_RADII = (0.2, 0.1, 0.05, 0.025)
EXACT_THRESHOLD = 1e-13


@dataclass(frozen=True)
class NormalCoordinateReport:
    """Residuals max|Γ_i + ½ R_ij y^j| on spheres of decreasing radius."""

    connection: str
    radii: tuple[float, ...]
    residuals: tuple[float, ...]

    @property
    def exact(self) -> bool:
        return max(self.residuals) < EXACT_THRESHOLD

    @property
    def slope(self) -> float:
        if self.exact:
            return float("nan")
        return fit_slope(np.array(self.radii), np.array(self.residuals))

    def passed(self, min_slope: float = 1.9) -> bool:
        return self.exact or self.slope >= min_slope


def shoot(
    geometry: GeometrySpec, origin: np.ndarray, velocities: np.ndarray, kind: str = "full"
) -> tuple[np.ndarray, np.ndarray]:
    """Geodesic endpoints at s = 1 and the transported frame matrices.

    Args:
        geometry: Geometry supplying the metric and connection
        origin: Base point, shape (d,)
        velocities: Frame components y of the initial velocities, shape (n, d)
        kind: Connection used for transport

    Returns:
        (x, U) with x of shape (n, d) and U of shape (n, d, d), e_b = Σ_c U_cb f_c
    """
    connection = geometry.connection(kind)
    d = geometry.dim
    n = len(velocities)
    frame0 = connection.frames.frame(origin)
    start = np.concatenate(
        [
            np.broadcast_to(origin, (n, d)),
            velocities @ frame0,
            np.broadcast_to(np.eye(d).reshape(-1), (n, d * d)),
        ],
        axis=1,
    )

    def rhs(_s: float, flat: np.ndarray) -> np.ndarray:
        state = flat.reshape(n, -1)
        x, p = state[:, :d], state[:, d : 2 * d]
        u = state[:, 2 * d :].reshape(n, d, d)
        accel = -np.einsum("nsil,ni,nl->ns", christoffel(geometry.metric, x), p, p)
        d_u = -np.einsum("nk,nkab,nbc->nac", p, connection.omega(x), u)
        return np.concatenate([p, accel, d_u.reshape(n, -1)], axis=1).reshape(-1)

    sol = solve_ivp(rhs, (0.0, 1.0), start.reshape(-1), method="DOP853", rtol=1e-12, atol=1e-12)
    if not sol.success:
        raise GeodesicError(f"geodesic integration failed: {sol.message}")
    log.debug("geodesic shooting: %d shots, %d rhs evaluations", n, sol.nfev)
    end = sol.y[:, -1].reshape(n, -1)
    return end[:, :d], end[:, 2 * d :].reshape(n, d, d)


def pulled_back_coefficients(
    geometry: GeometrySpec,
    origin: np.ndarray,
    points: np.ndarray,
    kind: str = "full",
    delta: float = 1e-3,
) -> np.ndarray:
    """Γ_i(y)[a, b] in normal coordinates y with the radially parallel frame.

    Returns:
        Array of shape (m, i, a, b) for the m normal-coordinate points
    """
    d = geometry.dim
    m = len(points)
    offsets = np.array([-2.0, -1.0, 1.0, 2.0]) * delta
    shifts = np.einsum("s,ij->isj", offsets, np.eye(d)).reshape(-1, d)
    shots = np.concatenate([points[:, None, :], points[:, None, :] + shifts], axis=1)
    x, u = shoot(geometry, origin, shots.reshape(-1, d), kind)
    x = x.reshape(m, 1 + 4 * d, d)
    u = u.reshape(m, 1 + 4 * d, d, d)

    def stencil(values: np.ndarray) -> np.ndarray:
        v = values[:, 1:].reshape(m, d, 4, *values.shape[2:])
        return (v[:, :, 0] - 8 * v[:, :, 1] + 8 * v[:, :, 2] - v[:, :, 3]) / (12 * delta)

    jacobian = stencil(x)  # (m, i, k) = ∂x^k/∂y^i
    d_u = stencil(u)  # (m, i, a, b)
    base_x, base_u = x[:, 0], u[:, 0]
    omega = geometry.connection(kind).omega(base_x)
    inner = d_u + np.einsum("mik,mkac,mcb->miab", jacobian, omega, base_u)
    return np.einsum("mac,micb->miab", np.linalg.inv(base_u), inner)


def normal_coordinate_check(
    geometry: GeometrySpec,
    kind: str = "full",
    radii: tuple[float, ...] = DEFAULT_RADII,
    directions: int = 8,
    origin: np.ndarray | None = None,
    seed: int = 0,
) -> NormalCoordinateReport:
    """Measure the first-order normal-coordinate expansion of the connection coefficients."""
    d = geometry.dim
    origin = np.zeros(d) if origin is None else np.asarray(origin, dtype=np.float64)
    riemann = curvature(geometry.connection(kind), origin).riemann
    unit = np.random.default_rng(seed).standard_normal((directions, d))
    unit /= np.linalg.norm(unit, axis=1, keepdims=True)

    residuals = []
    for radius in radii:
        points = radius * unit
        gamma = pulled_back_coefficients(geometry, origin, points, kind)
        expected = -0.5 * np.einsum("ijba,mj->miab", riemann, points)
        residuals.append(float(np.max(np.abs(gamma - expected))))
        log.debug("normal coordinates r=%.4f residual %.3e", radius, residuals[-1])
    report = NormalCoordinateReport(kind, tuple(radii), tuple(residuals))
    log.info(
        "normal coordinates on %s (%s): exact=%s slope=%.3f",
        geometry.name,
        kind,
        report.exact,
        report.slope,
    )
    return report
