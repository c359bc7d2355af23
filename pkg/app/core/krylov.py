"""Krylov exponential-times-vector for matrix-free generators.

Arnoldi with adaptive time stepping and an adaptive subspace dimension, driven
by the a posteriori error estimate of the augmented Hessenberg exponential.
Several output times are produced from one trajectory by stepping the semigroup
between them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm
from scipy.sparse.linalg import LinearOperator, expm_multiply

from app.core.errors import KrylovError

log = logging.getLogger(__name__)

METHODS = ("arnoldi", "expm_multiply")


@dataclass(frozen=True)
class KrylovResult:
    vectors: list[np.ndarray]
    steps: int
    rejections: int
    subspace: int


def estimate_norm(op: LinearOperator, iterations: int = 30, seed: int = 0) -> float:
    """Power-iteration estimate of the spectral radius of A, padded by 10%."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.shape[1])
    v /= np.linalg.norm(v)
    value = 0.0
    for _ in range(iterations):
        w = op.matvec(v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        value = max(value, norm)
        v = w / norm
    return 1.1 * value


def _initial_step(m: int, anorm: float, tol: float) -> float:
    """Step size whose a priori error bound for dimension m meets ``tol``."""
    log_fact = (m + 1) * math.log((m + 1) / math.e) + 0.5 * math.log(2 * math.pi * (m + 1))
    return math.exp((log_fact + math.log(tol / (4.0 * anorm))) / m) / anorm


def _grow(m: int, limit: int) -> int:
    return min(limit, m + max(2, m // 2))


class _Arnoldi:
    """Arnoldi decomposition of A on the Krylov space of one start vector, extendable in place."""

    def __init__(self, op: LinearOperator, w: np.ndarray, beta: float, capacity: int, anorm: float):
        self.op = op
        self.anorm = anorm
        self.basis = np.zeros((capacity + 1, w.shape[0]))
        self.hess = np.zeros((capacity + 1, capacity))
        self.basis[0] = w / beta
        self.size = 0
        self.happy = False
        self._residuals: dict[int, float] = {}

    def extend(self, m: int) -> None:
        for j in range(self.size, m):
            if self.happy:
                return
            p = self.op.matvec(self.basis[j])
            for i in range(j + 1):
                self.hess[i, j] = self.basis[i] @ p
                p = p - self.hess[i, j] * self.basis[i]
            h_next = float(np.linalg.norm(p))
            self.size = j + 1
            if h_next < 1e-12 * self.anorm:
                self.happy = True
                return
            self.hess[j + 1, j] = h_next
            self.basis[j + 1] = p / h_next

    def augmented(self, m: int) -> np.ndarray:
        aug = np.zeros((m + 2, m + 2))
        aug[: m + 1, :m] = self.hess[: m + 1, :m]
        aug[m + 1, m] = 1.0
        return aug

    def residual_norm(self, m: int) -> float:
        """‖A v_{m+1}‖ for the error estimate."""
        if m not in self._residuals:
            self._residuals[m] = float(np.linalg.norm(self.op.matvec(self.basis[m])))
        return self._residuals[m]


def krylov_exponential(
    op: LinearOperator,
    vector: np.ndarray,
    times: Sequence[float],
    tol: float = 1e-9,
    subspace: int = 30,
    max_subspace: int = 100,
    norm: float | None = None,
    max_rejections: int = 50,
) -> KrylovResult:
    """exp(tA) v for increasing output times, with step and subspace statistics.

    Args:
        op: Generator A
        vector: Start vector v
        times: Output times, sorted increasingly, all > 0
        tol: Relative local error target per unit time
        subspace: Initial Krylov dimension m
        max_subspace: Largest dimension m may grow to (never above the problem size)
        norm: Estimate of ‖A‖; power iteration when omitted
        max_rejections: Rejections tolerated within one step before giving up

    Returns:
        KrylovResult with one vector per output time
    """
    times = [float(t) for t in times]
    if not times or any(t <= 0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise KrylovError("output times must be positive and increasing")
    if subspace < 1 or max_subspace < 1:
        raise KrylovError("Krylov dimensions must be positive")
    n = vector.shape[0]
    anorm = estimate_norm(op) if norm is None else norm
    w = np.array(vector, dtype=np.float64)
    if anorm == 0.0:
        return KrylovResult([w.copy() for _ in times], 0, 0, 0)

    limit = min(max(max_subspace, subspace), n)
    m = min(subspace, limit)
    outputs: list[np.ndarray] = []
    t_now = 0.0
    tau = min(times[0], _initial_step(m, anorm, tol))
    rejections = 0
    steps = 0
    target = 0

    while target < len(times):
        beta = float(np.linalg.norm(w))
        if beta == 0.0:
            outputs.extend(np.zeros_like(w) for _ in times[target:])
            break
        arnoldi = _Arnoldi(op, w, beta, limit, anorm)
        arnoldi.extend(m)

        remaining = times[target] - t_now
        tau = min(tau, remaining)
        tries = 0
        order = 1.0
        while True:
            if arnoldi.happy:
                k = arnoldi.size
                coeffs = beta * expm(tau * arnoldi.hess[:k, :k])[:, 0]
                err_loc = 0.0
                break
            big = expm(tau * arnoldi.augmented(m))
            err1 = abs(beta * big[m, 0])
            err2 = abs(beta * big[m + 1, 0] * arnoldi.residual_norm(m))
            if err1 > 10.0 * err2:
                err_loc, order = err2, 1.0 / m
            elif err1 > err2:
                err_loc, order = err1 * err2 / (err1 - err2), 1.0 / m
            else:
                err_loc, order = err1, 1.0 / (m - 1) if m > 1 else 1.0
            if err_loc <= 1.2 * tau * tol * beta:
                coeffs = beta * big[: m + 1, 0]
                break
            rejections += 1
            tries += 1
            if tries > max_rejections:
                raise KrylovError(
                    f"Krylov exponential rejected {rejections} steps at t = {t_now:.3e}"
                )
            if m < limit:
                m = _grow(m, limit)
                arnoldi.extend(m)
                log.debug("krylov step rejected, subspace -> %d", m)
            else:
                tau = 0.9 * tau * (tau * tol * beta / err_loc) ** order
                log.debug("krylov step rejected, tau -> %.3e", tau)

        size = len(coeffs)
        w = coeffs @ arnoldi.basis[:size]
        t_now += tau
        steps += 1
        if t_now >= times[target] * (1.0 - 1e-12):
            t_now = times[target]
            outputs.append(w.copy())
            target += 1
        if target < len(times):
            remaining = times[target] - t_now
            if arnoldi.happy or err_loc == 0.0:
                tau = remaining
            else:
                tau = min(0.9 * tau * (tau * tol * beta / err_loc) ** order, remaining)
                # many short steps left: a larger subspace buys longer ones
                if m < limit and remaining > 4.0 * tau:
                    m = _grow(m, limit)
                    tau = min(max(tau, _initial_step(m, anorm, tol)), remaining)
                    log.debug("krylov subspace grown to %d", m)

    log.debug(
        "krylov exponential: %d steps, %d rejections, subspace %d, norm %.3e",
        steps,
        rejections,
        m,
        anorm,
    )
    return KrylovResult(outputs, steps, rejections, m)


def expv(
    op: LinearOperator,
    vector: np.ndarray,
    times: Sequence[float],
    tol: float = 1e-9,
    subspace: int = 30,
    max_subspace: int = 100,
    norm: float | None = None,
) -> list[np.ndarray]:
    """exp(tA) v at each of ``times``; see ``krylov_exponential``."""
    return krylov_exponential(op, vector, times, tol, subspace, max_subspace, norm).vectors


def trace_estimate(op: LinearOperator, samples: int = 8, seed: int = 0) -> float:
    """Hutchinson estimate of tr(A) with Rademacher vectors."""
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(samples):
        z = rng.choice([-1.0, 1.0], size=op.shape[1])
        total += float(z @ op.matvec(z))
    return total / samples


def exp_times_vector(
    op: LinearOperator,
    vector: np.ndarray,
    times: Sequence[float],
    method: str = "arnoldi",
    tol: float = 1e-9,
) -> list[np.ndarray]:
    """Dispatch between the adaptive Arnoldi route and scipy's ``expm_multiply``."""
    if method == "arnoldi":
        return expv(op, vector, times, tol=tol)
    if method == "expm_multiply":
        trace = trace_estimate(op)
        return [expm_multiply(op * t, vector, traceA=trace * t) for t in times]
    raise KrylovError(f"unknown exponential method '{method}'")
