"""Built-in example geometries with analytic derivative closures."""

from __future__ import annotations

import itertools
import math
from typing import Callable, Mapping

import numpy as np

from app.core.errors import GeometryError
from app.core.geometry import ChartDomain, ContorsionField, GeometrySpec, MetricField

PresetBuilder = Callable[[Mapping[str, float]], GeometrySpec]

EPSILON_2D = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _levi_civita_symbol(dim: int, axes: tuple[int, ...]) -> np.ndarray:
    """ε-pattern on the given axes (totally antisymmetric, ε_{axes} = 1)."""
    n = len(axes)
    symbol = np.zeros((dim,) * n)
    for perm in itertools.permutations(range(n)):
        inversions = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        symbol[tuple(axes[p] for p in perm)] = -1.0 if inversions % 2 else 1.0
    return symbol


def _conformal_factor(x: np.ndarray, amplitude: float, i: int, j: int) -> tuple[np.ndarray, ...]:
    """φ = A sin(x_i) cos(x_j) together with ∂_i φ and ∂_j φ."""
    phi = amplitude * np.sin(x[..., i]) * np.cos(x[..., j])
    d_i = amplitude * np.cos(x[..., i]) * np.cos(x[..., j])
    d_j = -amplitude * np.sin(x[..., i]) * np.sin(x[..., j])
    return phi, d_i, d_j


def _check_params(name: str, params: Mapping[str, float], allowed: tuple[str, ...]) -> None:
    unknown = sorted(set(params) - set(allowed))
    if unknown:
        raise GeometryError(f"preset '{name}' has no parameter(s) {', '.join(unknown)}")


def flat_torus(params: Mapping[str, float]) -> GeometrySpec:
    _check_params("flat-torus", params, ("dim",))
    dim = int(params.get("dim", 2))
    eye = np.eye(dim)
    metric = MetricField(
        dim,
        lambda x: np.broadcast_to(eye, (*x.shape[:-1], dim, dim)),
        lambda x: np.zeros((*x.shape[:-1], dim, dim, dim)),
    )
    return GeometrySpec(
        "flat-torus", ChartDomain.torus(dim), metric, ContorsionField.zero(dim), dict(params)
    )


def conformal_torus(params: Mapping[str, float]) -> GeometrySpec:
    """g = e^{2φ} δ on the square torus with φ = A sin x1 cos x2."""
    _check_params("conformal-torus", params, ("amplitude",))
    amplitude = float(params.get("amplitude", 0.3))
    eye = np.eye(2)

    def value(x: np.ndarray) -> np.ndarray:
        phi, _, _ = _conformal_factor(x, amplitude, 0, 1)
        return np.exp(2 * phi)[..., None, None] * eye

    def derivative(x: np.ndarray) -> np.ndarray:
        phi, d1, d2 = _conformal_factor(x, amplitude, 0, 1)
        grad = 2 * np.stack([d1, d2], axis=-1) * np.exp(2 * phi)[..., None]
        return grad[..., :, None, None] * eye

    return GeometrySpec(
        "conformal-torus",
        ChartDomain.torus(2),
        MetricField(2, value, derivative),
        ContorsionField.zero(2),
        {"amplitude": amplitude},
    )


def stereographic_sphere(params: Mapping[str, float]) -> GeometrySpec:
    """Unit round sphere in stereographic coordinates, g = 4/(1+|x|²)² δ on all of R²."""
    _check_params("stereographic-sphere", params, ())
    eye = np.eye(2)

    def value(x: np.ndarray) -> np.ndarray:
        factor = 4.0 / (1.0 + np.sum(x**2, axis=-1)) ** 2
        return factor[..., None, None] * eye

    def derivative(x: np.ndarray) -> np.ndarray:
        grad = -16.0 * x / (1.0 + np.sum(x**2, axis=-1, keepdims=True)) ** 3
        return grad[..., :, None, None] * eye

    return GeometrySpec(
        "stereographic-sphere",
        ChartDomain(2, "full-space"),
        MetricField(2, value, derivative),
        ContorsionField.zero(2),
        {},
    )


def torsion_torus(params: Mapping[str, float]) -> GeometrySpec:
    """Flat torus with contorsion K_iab = α_i ε_ab, α = β (sin x2, sin x1)."""
    _check_params("torsion-torus", params, ("strength",))
    beta = float(params.get("strength", 1.0))
    flat = flat_torus({})

    def alpha(x: np.ndarray) -> np.ndarray:
        return beta * np.stack([np.sin(x[..., 1]), np.sin(x[..., 0])], axis=-1)

    def value(x: np.ndarray) -> np.ndarray:
        return alpha(x)[..., :, None, None] * EPSILON_2D

    def derivative(x: np.ndarray) -> np.ndarray:
        zero = np.zeros(x.shape[:-1])
        # d_alpha[..., k, i] = ∂_k α_i
        d_alpha = beta * np.stack(
            [
                np.stack([zero, np.cos(x[..., 0])], axis=-1),
                np.stack([np.cos(x[..., 1]), zero], axis=-1),
            ],
            axis=-2,
        )
        return d_alpha[..., None, None] * EPSILON_2D

    return GeometrySpec(
        "torsion-torus",
        flat.domain,
        flat.metric,
        ContorsionField(2, value, derivative),
        {"strength": beta},
    )


def conformal_4torus(params: Mapping[str, float]) -> GeometrySpec:
    """Product of two conformal tori with constant totally antisymmetric contorsion on e1, e2, e3."""
    _check_params("conformal-4torus", params, ("amplitude", "twist"))
    amplitude = float(params.get("amplitude", 0.3))
    twist = float(params.get("twist", 0.25))
    contorsion = twist * _levi_civita_symbol(4, (0, 1, 2))

    def value(x: np.ndarray) -> np.ndarray:
        phi, _, _ = _conformal_factor(x, amplitude, 0, 1)
        psi, _, _ = _conformal_factor(x, amplitude, 2, 3)
        diag = np.stack([np.exp(2 * phi), np.exp(2 * phi), np.exp(2 * psi), np.exp(2 * psi)], -1)
        return diag[..., :, None] * np.eye(4)

    def derivative(x: np.ndarray) -> np.ndarray:
        phi, p1, p2 = _conformal_factor(x, amplitude, 0, 1)
        psi, q3, q4 = _conformal_factor(x, amplitude, 2, 3)
        zero = np.zeros(x.shape[:-1])
        first = 2 * np.exp(2 * phi)
        second = 2 * np.exp(2 * psi)
        # grad[..., k, a] = ∂_k of the a-th diagonal entry
        grad = np.stack(
            [
                np.stack([first * p1, first * p1, zero, zero], -1),
                np.stack([first * p2, first * p2, zero, zero], -1),
                np.stack([zero, zero, second * q3, second * q3], -1),
                np.stack([zero, zero, second * q4, second * q4], -1),
            ],
            axis=-2,
        )
        return grad[..., :, :, None] * np.eye(4)

    return GeometrySpec(
        "conformal-4torus",
        ChartDomain.torus(4),
        MetricField(4, value, derivative),
        ContorsionField(
            4,
            lambda x: np.broadcast_to(contorsion, (*x.shape[:-1], 4, 4, 4)),
            lambda x: np.zeros((*x.shape[:-1], 4, 4, 4, 4)),
        ),
        {"amplitude": amplitude, "twist": twist},
    )


PRESETS: dict[str, PresetBuilder] = {
    "flat-torus": flat_torus,
    "conformal-torus": conformal_torus,
    "stereographic-sphere": stereographic_sphere,
    "torsion-torus": torsion_torus,
    "conformal-4torus": conformal_4torus,
}


def preset(name: str, params: Mapping[str, float] | None = None) -> GeometrySpec:
    """Build a named example geometry."""
    try:
        builder = PRESETS[name]
    except KeyError:
        raise GeometryError(
            f"unknown preset '{name}' (known: {', '.join(sorted(PRESETS))})"
        ) from None
    return builder(params or {})


def gauss_curvature(name: str, x: np.ndarray, params: Mapping[str, float] | None = None) -> np.ndarray:
    """Analytic Gauss curvature of the two-dimensional Levi-Civita presets."""
    params = params or {}
    x = np.asarray(x, dtype=np.float64)
    if name == "flat-torus" or name == "torsion-torus":
        return np.zeros(x.shape[:-1])
    if name == "stereographic-sphere":
        return np.ones(x.shape[:-1])
    if name == "conformal-torus":
        amplitude = float(params.get("amplitude", 0.3))
        phi, _, _ = _conformal_factor(x, amplitude, 0, 1)
        # Δφ = -2φ for φ = A sin x1 cos x2, and K = -e^{-2φ} Δφ
        return 2.0 * phi * np.exp(-2.0 * phi)
    raise GeometryError(f"no analytic Gauss curvature for preset '{name}'")


def analytic_euler_density(
    name: str, x: np.ndarray, params: Mapping[str, float] | None = None
) -> np.ndarray:
    """Closed-form Pf(-R)√g/(2π) of the two-dimensional presets (general connection)."""
    params = params or {}
    x = np.asarray(x, dtype=np.float64)
    if name == "torsion-torus":
        beta = float(params.get("strength", 1.0))
        return -beta * (np.cos(x[..., 0]) - np.cos(x[..., 1])) / (2 * math.pi)
    if name == "conformal-torus":
        amplitude = float(params.get("amplitude", 0.3))
        phi, _, _ = _conformal_factor(x, amplitude, 0, 1)
        return 2.0 * phi / (2 * math.pi)
    if name == "stereographic-sphere":
        return 4.0 / (1.0 + np.sum(x**2, axis=-1)) ** 2 / (2 * math.pi)
    return gauss_curvature(name, x, params)
