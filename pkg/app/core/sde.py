"""Monte Carlo Feynman-Kac engine for the heat semigroup on Λ*.

The stochastic system (Stratonovich, with scaling parameter ε)

    dX^i = ½ ε² b^i(X) dt + ε σ^i_k(X) ∘ dw^k
    de   = e C_i(X) ∘ dX^i
    dM   = -½ ε² M e C(X) e⁻¹ dt

represents the heat kernel as h(t, x, y) = E[M(t) e(t) δ_y(X(t))] with X(0) = x.
X and e are advanced jointly by the Heun predictor-corrector; M by the matrix
exponential of the frozen midpoint coefficient. Driving noise is drawn in fixed
blocks of paths from counter-based generators keyed by (seed, block), so an
ensemble does not depend on how it is batched.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from app.core.bundle import BundleFields
from app.core.errors import SimulationError, StudyError
from app.core.geometry import GeometrySpec, curvature
from app.core.ladder import curvature_pfaffian_permutation, twist_curvature_operator
from app.core.representations import double_rep
from app.core.stencils import central_difference, fit_slope

log = logging.getLogger(__name__)

BLOCK_SIZE = 4096
MIN_BATCHES = 16
DEFAULT_BATCHES = 32
CONDITION_CAP = 1e8


@dataclass(frozen=True, eq=False)
class SdeSpec:
    """Coefficients of the stochastic system for one geometry."""

    geometry: GeometrySpec
    epsilon: float = 1.0
    steps: int = 64
    drift_sign: float = 1.0

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise SimulationError(f"step count must be positive, got {self.steps}")
        if self.epsilon <= 0:
            raise SimulationError(f"epsilon must be positive, got {self.epsilon}")
        if self.drift_sign not in (1.0, -1.0):
            raise SimulationError(f"drift sign must be +1 or -1, got {self.drift_sign}")

    @cached_property
    def bundle(self) -> BundleFields:
        return BundleFields(self.geometry)

    @property
    def dim(self) -> int:
        return self.geometry.dim

    @property
    def fiber(self) -> int:
        return 1 << self.dim

    def with_epsilon(self, epsilon: float) -> SdeSpec:
        return SdeSpec(self.geometry, epsilon, self.steps, self.drift_sign)

    def with_steps(self, steps: int) -> SdeSpec:
        return SdeSpec(self.geometry, self.epsilon, steps, self.drift_sign)

    def diffusion(self, x: np.ndarray) -> np.ndarray:
        return self.bundle.diffusion(x)

    def drift(self, x: np.ndarray) -> np.ndarray:
        return self.bundle.drift(x)

    def coefficients(self, x: np.ndarray) -> np.ndarray:
        return self.bundle.coefficients(x)

    def potential(self, x: np.ndarray) -> np.ndarray:
        return self.bundle.potential(x)

    def stratonovich_drift(self, x: np.ndarray) -> np.ndarray:
        """½ ε² b minus the Itô-Stratonovich correction ½ ε² Σ σ^j_k ∂_j σ^i_k."""
        eps2 = self.epsilon**2
        sigma = self.diffusion(x)
        d_sigma = central_difference(self.diffusion, x, self.geometry.metric.step)
        correction = np.einsum("...jk,...jik->...i", sigma, d_sigma)
        return 0.5 * eps2 * self.drift_sign * self.drift(x) - 0.5 * eps2 * correction

    def diffusion_residual(self, points: np.ndarray) -> float:
        """max |σσᵀ - g⁻¹| at the given points."""
        sigma = self.diffusion(points)
        product = sigma @ np.swapaxes(sigma, -1, -2)
        return float(np.max(np.abs(product - self.geometry.metric.inverse(points))))


def brownian_increments(seed: int, paths: int, steps: int, dim: int, t: float) -> np.ndarray:
    """Increments Δw of shape (steps, paths, dim), variance t/steps.

    Paths are drawn in blocks of ``BLOCK_SIZE``; block j uses a Philox stream keyed
    by (seed, j).
    """
    h = t / steps
    blocks = []
    for start in range(0, paths, BLOCK_SIZE):
        count = min(BLOCK_SIZE, paths - start)
        stream = np.random.SeedSequence(seed, spawn_key=(start // BLOCK_SIZE,))
        rng = np.random.Generator(np.random.Philox(stream))
        blocks.append(rng.standard_normal((steps, BLOCK_SIZE, dim))[:, :count])
    return math.sqrt(h) * np.concatenate(blocks, axis=1)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """End state of simulated paths together with the driving noise."""

    t: float
    step: float
    seed: int
    epsilon: float
    start: np.ndarray
    positions: np.ndarray
    transport: np.ndarray
    functional: np.ndarray
    condition: np.ndarray
    increments: np.ndarray | None = None
    trajectory: np.ndarray | None = None

    @property
    def paths(self) -> int:
        return len(self.positions)

    @property
    def excluded(self) -> np.ndarray:
        return self.condition > CONDITION_CAP

    @property
    def exclusion_rate(self) -> float:
        return float(np.mean(self.excluded))

    @property
    def transport_inverse(self) -> np.ndarray:
        return np.linalg.inv(self.transport)

    @property
    def brownian(self) -> np.ndarray:
        """w(t) at the final time."""
        if self.increments is None:
            raise SimulationError("driving increments were not retained")
        return self.increments.sum(axis=0)


def simulate(
    spec: SdeSpec,
    t: float,
    paths: int,
    seed: int,
    start: np.ndarray | None = None,
    increments: np.ndarray | None = None,
    previous: PathEnsemble | None = None,
    retain_noise: bool = True,
    retain_trajectory: bool = False,
) -> PathEnsemble:
    """Integrate (X, e, M) from X(0) = start over [0, t].

    Args:
        spec: Coefficients, ε, step count and drift sign
        t: Final time
        paths: Number of paths
        seed: Top-level seed of the noise blocks
        start: Initial point; the origin when omitted
        increments: Driving increments (steps, paths, d) to use instead of fresh noise
        previous: Ensemble to continue from (its end state becomes the initial state)
        retain_noise: Keep the increments on the ensemble
        retain_trajectory: Keep every X(t_n)
    """
    if t <= 0:
        raise SimulationError(f"simulation time must be positive, got {t}")
    if paths < 1:
        raise SimulationError(f"path count must be positive, got {paths}")
    d, fiber, steps = spec.dim, spec.fiber, spec.steps
    h = t / steps
    if increments is None:
        increments = brownian_increments(seed, paths, steps, d, t)
    elif increments.shape != (steps, paths, d):
        raise SimulationError(
            f"increments of shape {increments.shape}, expected {(steps, paths, d)}"
        )

    if previous is not None:
        x = previous.positions.copy()
        e = previous.transport.copy()
        m = previous.functional.copy()
        origin = previous.start
    else:
        origin = np.zeros(d) if start is None else np.asarray(start, dtype=np.float64)
        x = np.broadcast_to(origin, (paths, d)).copy()
        e = np.broadcast_to(np.eye(fiber), (paths, fiber, fiber)).copy()
        m = e.copy()
    eps, eps2 = spec.epsilon, spec.epsilon**2
    trajectory = [x.copy()] if retain_trajectory else None

    for n in range(steps):
        dw = increments[n]
        v1 = spec.stratonovich_drift(x) * h + eps * np.einsum("pik,pk->pi", spec.diffusion(x), dw)
        c1 = np.einsum("pijk,pi->pjk", spec.coefficients(x), v1)
        x_pred = x + v1
        e_pred = e + e @ c1
        v2 = spec.stratonovich_drift(x_pred) * h + eps * np.einsum(
            "pik,pk->pi", spec.diffusion(x_pred), dw
        )
        c2 = np.einsum("pijk,pi->pjk", spec.coefficients(x_pred), v2)
        x_new = x + 0.5 * (v1 + v2)
        e_new = e + 0.5 * (e @ c1 + e_pred @ c2)
        x_mid = 0.5 * (x + x_new)
        e_mid = 0.5 * (e + e_new)
        frozen = e_mid @ spec.potential(x_mid) @ np.linalg.inv(e_mid)
        m = m @ expm(-0.5 * eps2 * h * frozen)
        x, e = x_new, e_new
        if trajectory is not None:
            trajectory.append(x.copy())

    condition = np.linalg.cond(e)
    excluded = int(np.sum(condition > CONDITION_CAP))
    if excluded:
        log.warning("%d of %d paths excluded: transport condition number above %.0e",
                    excluded, paths, CONDITION_CAP)
    total_t = t + (previous.t if previous is not None else 0.0)
    if previous is not None and previous.increments is not None and retain_noise:
        increments = np.concatenate([previous.increments, increments], axis=0)
    log.debug("simulated %d paths, %d steps of %.3e on %s", paths, steps, h, spec.geometry.name)
    return PathEnsemble(
        t=total_t,
        step=h,
        seed=seed,
        epsilon=eps,
        start=origin,
        positions=x,
        transport=e,
        functional=m,
        condition=condition,
        increments=increments if retain_noise else None,
        trajectory=np.stack(trajectory) if trajectory is not None else None,
    )


def batch_mean(
    samples: np.ndarray, batches: int = DEFAULT_BATCHES, mask: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error from independent batch means.

    Path i belongs to batch i·B // n. Excluded paths (``mask`` False) are dropped
    from their batch; empty batches are discarded.
    """
    samples = np.asarray(samples)
    n = len(samples)
    if batches < MIN_BATCHES:
        raise SimulationError(f"at least {MIN_BATCHES} batches are required, got {batches}")
    keep = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    index = np.arange(n) * batches // n
    means = []
    for b in range(batches):
        chosen = (index == b) & keep
        if np.any(chosen):
            means.append(samples[chosen].mean(axis=0))
    if len(means) < MIN_BATCHES:
        raise SimulationError(f"only {len(means)} batches survived, need {MIN_BATCHES}")
    stacked = np.stack(means)
    return stacked.mean(axis=0), stacked.std(axis=0, ddof=1) / math.sqrt(len(means))


def mollifier(dx: np.ndarray, bandwidth: float) -> np.ndarray:
    """Gaussian approximation of δ₀ with the given bandwidth."""
    d = dx.shape[-1]
    return np.exp(-np.sum(dx**2, axis=-1) / (2 * bandwidth**2)) / (
        2 * math.pi * bandwidth**2
    ) ** (d / 2)


@dataclass(frozen=True)
class KernelEstimate:
    """Mollified Monte Carlo estimate of the endomorphism-valued heat kernel diagonal."""

    value: np.ndarray
    stderr: np.ndarray
    supertrace: float
    supertrace_stderr: float
    bandwidth: float
    paths: int
    point: np.ndarray
    t: float
    excluded: int = 0

    @property
    def scalar(self) -> float:
        """Trace normalised by the fiber dimension."""
        return float(np.trace(self.value)) / self.value.shape[-1]

    @property
    def scalar_stderr(self) -> float:
        return float(np.sqrt(np.sum(np.diagonal(self.stderr) ** 2))) / self.value.shape[-1]


def _kernel_samples(
    spec: SdeSpec, ensemble: PathEnsemble, x: np.ndarray, bandwidth: float
) -> tuple[np.ndarray, np.ndarray]:
    dx = spec.geometry.domain.minimal_image(ensemble.positions - x)
    weight = mollifier(dx, bandwidth) / spec.geometry.metric.sqrt_det(x)
    endo = ensemble.functional @ ensemble.transport * weight[:, None, None]
    grading = double_rep(spec.dim).grading
    density = np.einsum("paa,a->p", endo, grading) * spec.geometry.metric.sqrt_det(x)
    return endo, density


def _estimate(
    spec: SdeSpec,
    ensemble: PathEnsemble,
    x: np.ndarray,
    bandwidth: float,
    batches: int,
) -> KernelEstimate:
    if bandwidth <= 0:
        raise SimulationError(f"bandwidth must be positive, got {bandwidth}")
    endo, density = _kernel_samples(spec, ensemble, x, bandwidth)
    keep = ~ensemble.excluded
    value, stderr = batch_mean(endo, batches, keep)
    str_value, str_err = batch_mean(density, batches, keep)
    return KernelEstimate(
        value=value,
        stderr=stderr,
        supertrace=float(str_value),
        supertrace_stderr=float(str_err),
        bandwidth=bandwidth,
        paths=ensemble.paths,
        point=np.asarray(x),
        t=ensemble.t,
        excluded=int(np.sum(ensemble.excluded)),
    )


def heat_diag_mc(
    spec: SdeSpec,
    t: float,
    x: np.ndarray,
    bandwidth: float,
    paths: int,
    seed: int,
    batches: int = DEFAULT_BATCHES,
) -> KernelEstimate:
    """E[M(t) e(t) δ_x(X(t))] with δ_x replaced by a Gaussian mollifier."""
    x = np.asarray(x, dtype=np.float64)
    ensemble = simulate(spec, t, paths, seed, start=x, retain_noise=False)
    estimate = _estimate(spec, ensemble, x, bandwidth, batches)
    log.info(
        "heat_diag_mc t=%.3f bw=%.3f n=%d: str %.4e ± %.1e",
        t,
        bandwidth,
        paths,
        estimate.supertrace,
        estimate.supertrace_stderr,
    )
    return estimate


@dataclass(frozen=True)
class ExtrapolatedEstimate:
    """Two-bandwidth Richardson extrapolation (model c₀ + c₁ bw²)."""

    estimates: tuple[KernelEstimate, KernelEstimate]
    supertrace: float
    supertrace_stderr: float


def heat_diag_mc_extrapolated(
    spec: SdeSpec,
    t: float,
    x: np.ndarray,
    bandwidths: tuple[float, float],
    paths: int,
    seed: int,
    batches: int = DEFAULT_BATCHES,
) -> ExtrapolatedEstimate:
    """Supertrace density extrapolated to zero bandwidth from one shared ensemble."""
    x = np.asarray(x, dtype=np.float64)
    ensemble = simulate(spec, t, paths, seed, start=x, retain_noise=False)
    first, second = (_estimate(spec, ensemble, x, bw, batches) for bw in bandwidths)
    s1, s2 = bandwidths[0] ** 2, bandwidths[1] ** 2
    if s1 == s2:
        raise SimulationError("extrapolation needs two distinct bandwidths")
    value = (s2 * first.supertrace - s1 * second.supertrace) / (s2 - s1)
    error = math.hypot(s2 * first.supertrace_stderr, s1 * second.supertrace_stderr) / abs(s2 - s1)
    return ExtrapolatedEstimate((first, second), value, error)


def levy_areas(ensemble: PathEnsemble) -> np.ndarray:
    """Midpoint-rule Stratonovich integrals L_km = ∫ w^k ∘ dw^m, shape (paths, d, d)."""
    if ensemble.increments is None:
        raise SimulationError("driving increments were not retained")
    dw = ensemble.increments
    w = np.cumsum(dw, axis=0)
    before = w - dw
    return np.einsum("spk,spm->pkm", 0.5 * (before + w), dw)


@dataclass(frozen=True)
class OrderStudy:
    """Residuals against a refinement parameter with the fitted log-log slope."""

    parameter: str
    values: tuple[float, ...]
    residuals: tuple[float, ...]
    secondary: tuple[float, ...] = field(default_factory=tuple)

    @property
    def exact(self) -> bool:
        return max(self.residuals) < 1e-12

    @property
    def slope(self) -> float:
        if self.exact:
            return float("nan")
        return fit_slope(np.array(self.values), np.array(self.residuals))

    @property
    def secondary_slope(self) -> float:
        if not self.secondary or max(self.secondary) < 1e-12:
            return float("nan")
        return fit_slope(np.array(self.values), np.array(self.secondary))

    def passed(self, min_slope: float) -> bool:
        return self.exact or self.slope >= min_slope


def _check_study_values(values: Sequence[float], name: str) -> None:
    if len(values) < 4:
        raise StudyError(f"order study needs at least 4 {name} values, got {len(values)}")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise StudyError(f"{name} values must be strictly decreasing")


def epsilon_order_study(
    spec: SdeSpec,
    epsilons: Sequence[float],
    paths: int,
    seed: int,
    start: np.ndarray | None = None,
) -> OrderStudy:
    """Coupled-noise residuals of X^ε(1) - x - εσ(x)w(1) and of e^ε(1) - 1 - C_i(x)ΔX^i."""
    epsilons = [float(e) for e in epsilons]
    _check_study_values(epsilons, "epsilon")
    d = spec.dim
    origin = np.zeros(d) if start is None else np.asarray(start, dtype=np.float64)
    noise = brownian_increments(seed, paths, spec.steps, d, 1.0)
    w1 = noise.sum(axis=0)
    sigma0 = spec.diffusion(origin)
    coeff0 = spec.coefficients(origin)
    identity = np.eye(spec.fiber)
    x_res, e_res = [], []
    for eps in epsilons:
        ens = simulate(spec.with_epsilon(eps), 1.0, paths, seed, origin, noise, retain_noise=False)
        dx = ens.positions - origin
        x_res.append(float(np.mean(np.linalg.norm(dx - eps * w1 @ sigma0.T, axis=-1))))
        linear = np.einsum("ijk,pi->pjk", coeff0, dx)
        e_res.append(float(np.mean(np.max(np.abs(ens.transport - identity - linear), axis=(1, 2)))))
        log.debug("epsilon %.3f: X residual %.3e, e residual %.3e", eps, x_res[-1], e_res[-1])
    if not all(np.isfinite(x_res)) or not all(np.isfinite(e_res)):
        raise StudyError("epsilon study produced non-finite residuals")
    study = OrderStudy("epsilon", tuple(epsilons), tuple(x_res), tuple(e_res))
    log.info("epsilon study on %s: slope %.3f", spec.geometry.name, study.slope)
    return study


def strong_order_study(
    spec: SdeSpec,
    t: float,
    steps: Sequence[int],
    paths: int,
    seed: int,
    start: np.ndarray | None = None,
    reference_factor: int = 4,
) -> OrderStudy:
    """Strong error of X(t) under step halving on one fixed Brownian path set."""
    steps = [int(s) for s in steps]
    finest = steps[-1] * reference_factor
    if any(finest % s for s in steps):
        raise StudyError("step counts must divide the reference step count")
    _check_study_values([t / s for s in steps], "step")
    d = spec.dim
    noise = brownian_increments(seed, paths, finest, d, t)
    reference = simulate(spec.with_steps(finest), t, paths, seed, start, noise, retain_noise=False)
    errors = []
    for s in steps:
        coarse = noise.reshape(s, finest // s, paths, d).sum(axis=1)
        ens = simulate(spec.with_steps(s), t, paths, seed, start, coarse, retain_noise=False)
        errors.append(float(np.mean(np.linalg.norm(ens.positions - reference.positions, axis=-1))))
    study = OrderStudy("step", tuple(t / s for s in steps), tuple(errors))
    log.info("strong order study on %s: slope %.3f", spec.geometry.name, study.slope)
    return study


@dataclass(frozen=True)
class DriftMoment:
    estimate: np.ndarray
    stderr: np.ndarray
    expected: np.ndarray

    def passed(self, slack: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.estimate - self.expected) <= 3 * self.stderr + slack))


def drift_moment_check(
    spec: SdeSpec, t: float, paths: int, seed: int, start: np.ndarray | None = None
) -> DriftMoment:
    """E[X(t) - x] against the first-order prediction ½ ε² b(x) t (Itô drift)."""
    d = spec.dim
    origin = np.zeros(d) if start is None else np.asarray(start, dtype=np.float64)
    ens = simulate(spec, t, paths, seed, origin, retain_noise=False)
    mean, err = batch_mean(ens.positions - origin)
    expected = 0.5 * spec.epsilon**2 * spec.drift_sign * spec.drift(origin) * t
    return DriftMoment(mean, err, expected)


@dataclass(frozen=True, eq=False)
class LadderInputs:
    """Curvature data at the base point feeding the sampled ladder."""

    riemann: np.ndarray
    riemann_3b: np.ndarray
    potential: np.ndarray

    @property
    def dim(self) -> int:
        return self.riemann.shape[-1]

    @classmethod
    def from_geometry(cls, geometry: GeometrySpec, x: np.ndarray | None = None) -> LadderInputs:
        x = np.zeros(geometry.dim) if x is None else np.asarray(x, dtype=np.float64)
        full = curvature(geometry.connection("full"), x).riemann
        three_b = curvature(geometry.connection("3b"), x).riemann
        return cls(full, three_b, BundleFields(geometry).potential(x))

    @classmethod
    def synthetic(cls, riemann: np.ndarray) -> LadderInputs:
        """Torsion-free data: R^{3B} = R and C(0) = s/4 + c(F)."""
        riemann = np.asarray(riemann, dtype=np.float64)
        scalar = np.einsum("abba->", riemann)
        twist = twist_curvature_operator(riemann)
        return cls(riemann, riemann, scalar / 4.0 * np.eye(twist.shape[0]) + twist)


@dataclass(frozen=True)
class LadderMcReport:
    """Sampled supertraces Str(A_m) for m = 0..l with the Pfaffian target."""

    epsilon: float
    means: tuple[float, ...]
    stderrs: tuple[float, ...]
    pfaffian: float

    @property
    def target(self) -> float:
        return self.epsilon ** (2 * (len(self.means) - 1)) * self.pfaffian

    @property
    def scaled_top(self) -> float:
        """Str(A_l)/ε^{2l}."""
        return self.means[-1] / self.epsilon ** (2 * (len(self.means) - 1))

    def passed(self, floor: float = 1e-9) -> bool:
        lower = all(
            abs(m) <= 3 * s + floor for m, s in zip(self.means[1:-1], self.stderrs[1:-1])
        )
        top = abs(self.means[-1] - self.target) <= 3 * self.stderrs[-1] + floor
        return lower and top


def ladder_check_mc(
    inputs: LadderInputs,
    epsilon: float,
    paths: int,
    seed: int,
    steps: int = 64,
    batches: int = DEFAULT_BATCHES,
) -> LadderMcReport:
    """Iterated Stratonovich ladder of the leading-order transport increments.

    Each step contributes ΔC̃ = -½ε² Σ_ij Θ(R_ij) ΔL_ji - ½ε² C(0) Δt, where
    Θ(R_ij) lifts R^{3B}_ij to the spinor factor and R_ij to the dual factor, and
    ΔL_ji are the per-step Lévy-area increments. A_m is the m-fold iterated
    integral of C̃ over [0, 1].
    """
    d = inputs.dim
    rep = double_rep(d)
    half = d // 2
    eps2 = epsilon**2
    # matrices Ω_ij[b, c] = R[i, j, c, b]
    spin_part = rep.spin_action(np.swapaxes(inputs.riemann_3b, -1, -2))
    twist_part = rep.twist_action(np.swapaxes(inputs.riemann, -1, -2))
    theta = spin_part + twist_part  # (i, j, F, F)

    noise = brownian_increments(seed, paths, steps, d, 1.0)
    h = 1.0 / steps
    fiber = rep.size
    ladder = [np.broadcast_to(np.eye(fiber), (paths, fiber, fiber)).copy()]
    ladder += [np.zeros((paths, fiber, fiber)) for _ in range(half)]
    w = np.zeros((paths, d))
    for n in range(steps):
        dw = noise[n]
        w_next = w + dw
        area = np.einsum("pj,pi->pji", 0.5 * (w + w_next), dw)
        delta = -0.5 * eps2 * np.einsum("ijab,pji->pab", theta, area)
        delta -= 0.5 * eps2 * h * inputs.potential
        previous = [y.copy() for y in ladder]
        for m in range(1, half + 1):
            ladder[m] = ladder[m] + 0.5 * (previous[m - 1] + ladder[m - 1]) @ delta
        w = w_next

    means, errs = [], []
    for y in ladder:
        samples = np.einsum("paa,a->p", y, rep.grading)
        mean, err = batch_mean(samples, batches)
        means.append(float(mean))
        errs.append(float(err))
    pf = float(curvature_pfaffian_permutation(inputs.riemann))
    report = LadderMcReport(epsilon, tuple(means), tuple(errs), pf)
    log.info("sampled ladder: %s vs target %.4e", means, report.target)
    return report
