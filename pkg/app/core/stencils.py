"""Finite-difference and spectral derivative helpers."""

from __future__ import annotations

from typing import Callable

import numpy as np

from app.core.errors import GeometryError, GridError

ArrayFn = Callable[[np.ndarray], np.ndarray]

FD4_WEIGHTS = (1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0)
SCHEMES = ("fd4", "spectral")


def central_difference(fn: ArrayFn, x: np.ndarray, step: float) -> np.ndarray:
    """4th-order central differences of a pointwise field.

    Args:
        fn: Field mapping points of shape (..., d) to values of shape (..., *S)
        x: Evaluation points, shape (..., d)
        step: Difference step h

    Returns:
        Array of shape (..., d, *S) whose entry k is ∂_k fn(x)
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    if step <= 0 or np.any(x + step == x):
        raise GeometryError(f"finite-difference step {step} underflows at the evaluation points")
    offsets = np.array([-2.0, -1.0, 1.0, 2.0]) * step
    shifts = np.einsum("s,kj->skj", offsets, np.eye(d))  # (4, d, d)
    lead = x.shape[:-1]
    shifted = x[None, None] + shifts.reshape(4, d, *([1] * len(lead)), d)
    values = fn(shifted.reshape(-1, *lead, d))
    values = values.reshape(4, d, *lead, *values.shape[1 + len(lead) :])
    deriv = (values[0] - 8.0 * values[1] + 8.0 * values[2] - values[3]) / (12.0 * step)
    # move the direction axis behind the point axes
    return np.moveaxis(deriv, 0, len(lead))


def periodic_derivative(u: np.ndarray, axis: int, spacing: float, scheme: str) -> np.ndarray:
    """First derivative of grid data along a periodic axis."""
    if scheme == "fd4":
        return (
            FD4_WEIGHTS[0] * np.roll(u, 2, axis=axis)
            + FD4_WEIGHTS[1] * np.roll(u, 1, axis=axis)
            + FD4_WEIGHTS[3] * np.roll(u, -1, axis=axis)
            + FD4_WEIGHTS[4] * np.roll(u, -2, axis=axis)
        ) / spacing
    if scheme == "spectral":
        n = u.shape[axis]
        length = n * spacing
        k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)
        if n % 2 == 0:
            k[-1] = 0.0
        shape = [1] * u.ndim
        shape[axis] = k.size
        spectrum = np.fft.rfft(u, axis=axis) * (1j * k).reshape(shape)
        return np.fft.irfft(spectrum, n=n, axis=axis)
    raise GridError(f"unknown derivative scheme '{scheme}'")


def derivative_symbol(k: float, spacing: float, scheme: str) -> float:
    """Imaginary part of the discrete symbol of d/dx on the plane wave e^{ikx}."""
    if scheme == "fd4":
        return (8.0 * np.sin(k * spacing) - np.sin(2.0 * k * spacing)) / (6.0 * spacing)
    return k


def lowpass_kernel(n: int, center: int, keep_fraction: float = 2.0 / 3.0) -> np.ndarray:
    """Periodic Dirichlet kernel keeping modes |k| <= keep_fraction * n / 2, centred on a node."""
    mask = np.zeros(n // 2 + 1)
    cutoff = int(np.floor(keep_fraction * n / 2))
    mask[: cutoff + 1] = 1.0
    if n % 2 == 0 and cutoff >= n // 2:
        mask[-1] = 1.0
    kernel = np.fft.irfft(mask, n=n)
    return np.roll(kernel, center)


def fit_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log y against log x."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
