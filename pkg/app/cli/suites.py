"""Verification suites behind the gbcheck subcommands.

Each suite takes a validated ``RunConfig``, runs its checks, writes its CSV
tables into ``config.output`` and returns a ``SuiteReport``.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Callable

import numpy as np

from app.core.clifford import CliffordElement, chirality, clifford_mul, supertrace_berezin
from app.core.export import (
    export_checks_csv,
    export_density_csv,
    export_estimates_csv,
    export_profile_csv,
    export_study_csv,
    generate_export_filename,
)
from app.core.geometry import (
    GeometrySpec,
    curvature,
    dirac_decompose,
    euler_characteristic,
    three_form_coefficients,
    torsion_forms,
)
from app.core.hodge import (
    Grid,
    assemble_dirac,
    grading_anticommutator,
    mckean_singer_grid,
    mckean_singer,
    self_adjointness_residual,
    supertrace_profile,
)
from app.core.ladder import ladder_supertrace, random_curvature
from app.core.models import CheckResult, DensityMap, EstimatorRow, StudyRow, SuiteReport
from app.core.normal_coordinates import normal_coordinate_check
from app.core.pfaffian import SkewMatrix, pfaffian, pfaffian_permutation
from app.core.presets import PRESETS, analytic_euler_density, preset
from app.core.representations import double_rep, supertrace_gamma
from app.core.sde import (
    LadderInputs,
    SdeSpec,
    batch_mean,
    drift_moment_check,
    epsilon_order_study,
    heat_diag_mc,
    heat_diag_mc_extrapolated,
    ladder_check_mc,
    levy_areas,
    simulate,
    strong_order_study,
)
from app.core.weitzenbock import weitzenbock_check
from app.data.config import MCKEAN_SINGER_TIMES, WEITZENBOCK_GRID_POINTS, RunConfig
from app.data.specfile import load_geometry

log = logging.getLogger(__name__)

Suite = Callable[[RunConfig], SuiteReport]


def _geometry(config: RunConfig) -> GeometrySpec:
    return load_geometry(config.geometry or "flat-torus", config.params)


def _write(config: RunConfig, geometry: str | None, kind: str) -> Path:
    return config.output / generate_export_filename(config.command, geometry, kind)


def _finish(config: RunConfig, report: SuiteReport, geometry: str | None) -> SuiteReport:
    export_checks_csv(report, _write(config, geometry, "checks"), config.echo())
    log.info("%s", report.summary)
    return report


def _sample_origin(geometry: GeometrySpec) -> np.ndarray:
    """Base point for pointwise checks: the origin on full space, (1, 2, 1, 2, ...) on tori."""
    if not geometry.domain.periodic:
        return np.zeros(geometry.dim)
    return np.resize(np.array([1.0, 2.0]), geometry.dim)


def verify_algebra(config: RunConfig) -> SuiteReport:
    """Chirality, supertrace routes, Pfaffians and the curvature ladder."""
    report = SuiteReport(config.command)
    rng = np.random.default_rng(config.seed_for("algebra"))
    tol = config.tolerance("algebra")
    samples = config.samples or 1000
    for d in config.dims or (2, 4, 6):
        gamma = chirality(d)
        square = clifford_mul(gamma, gamma)
        one = CliffordElement.scalar(d, 1.0)
        report.add(CheckResult.below(f"chirality squares to 1, d={d}",
                                     float(np.max(np.abs(square.coeffs - one.coeffs))), tol))

        worst = 0.0
        for dual in (False, True):
            for _ in range(samples):
                a = CliffordElement.random(d, rng, dual=dual)
                worst = max(worst, abs(supertrace_gamma(a) - supertrace_berezin(a)))
        report.add(CheckResult.below(f"supertrace gamma = berezin, d={d}", worst, tol))

        rep = double_rep(d)
        worst = 0.0
        for _ in range(min(samples, 50)):
            a = CliffordElement.random(d, rng)
            b = CliffordElement.random(d, rng, dual=True)
            product = rep.supertrace(rep.left(a) @ rep.right(b))
            expected = supertrace_berezin(a) * supertrace_berezin(b)
            worst = max(worst, abs(product - expected) / max(1.0, abs(expected)))
        report.add(CheckResult.below(f"form supertrace factorises, d={d}", worst, tol))

        pf_tol = config.tolerance("pfaffian")
        det_err, route_err = 0.0, 0.0
        for _ in range(min(samples, 200)):
            skew = SkewMatrix.random(d, rng)
            pf = pfaffian(skew)
            det = float(np.linalg.det(skew.matrix))
            det_err = max(det_err, abs(pf**2 - det) / max(1.0, abs(det)))
            route_err = max(route_err, abs(pf - pfaffian_permutation(skew.matrix)))
        report.add(CheckResult.below(f"Pf^2 = det, d={d}", det_err, pf_tol))
        report.add(CheckResult.below(f"Pfaffian routes agree, d={d}", route_err, tol))

        if d <= 4:
            report.extend(_ladder_checks(d, min(samples, 100), rng, config))
    return _finish(config, report, None)


def _ladder_checks(
    d: int, count: int, rng: np.random.Generator, config: RunConfig
) -> list[CheckResult]:
    lower, closure, route = 0.0, 0.0, 0.0
    for _ in range(count):
        result = ladder_supertrace(random_curvature(d, rng))
        lower = max(lower, result.lower_residual)
        closure = max(closure, result.closure_error)
        route = max(route, result.route_error)
    tol = config.tolerance("ladder")
    return [
        CheckResult.below(f"ladder Str(m<l) = 0, d={d}", lower, config.tolerance("algebra")),
        CheckResult.below(f"ladder closes to Pf(-R), d={d}", closure, tol),
        CheckResult.below(f"ladder Pfaffian routes agree, d={d}", route, tol),
    ]


def curvature_tables(config: RunConfig) -> SuiteReport:
    """Pointwise geometric identities plus the normal-coordinate expansion."""
    geometry = _geometry(config)
    report = SuiteReport(config.command)
    rng = np.random.default_rng(config.seed_for("curvature"))
    points = geometry.domain.sample(rng, config.points or 8)
    k = geometry.contorsion(points)

    full = geometry.connection("full")
    report.add(CheckResult.below("metric compatibility (full)",
                                 full.metric_compatibility_residual(points), 1e-8))
    expected = np.einsum("...ijb->...bij", k) - np.einsum("...jib->...bij", k)
    report.add(CheckResult.below("torsion from contorsion",
                                 float(np.max(np.abs(full.torsion(points) - expected))), 1e-8))
    lc = curvature(geometry.connection("levi-civita"), points)
    report.add(CheckResult.below("first Bianchi identity (Levi-Civita)", lc.bianchi_residual, 1e-6))

    a_closed, b_closed = torsion_forms(k)
    worst = 0.0
    for j, x in enumerate(points):
        split = dirac_decompose(geometry.contorsion, x)
        b_coeffs = three_form_coefficients(b_closed[j])
        diff_a = np.max(np.abs(split.a_vector - a_closed[j]))
        diff_b = np.max(np.abs(split.b.coeffs.real - b_coeffs))
        worst = max(worst, float(diff_a), float(diff_b))
    report.add(CheckResult.below("torsion forms match Dirac grade split", worst, 1e-10))

    kind = "levi-civita" if geometry.contorsion.is_zero else "3b"
    normal = normal_coordinate_check(geometry, kind, origin=_sample_origin(geometry),
                                     seed=config.seed_for("normal"))
    report.add(CheckResult.at_least(f"normal coordinates ({kind}) order", normal.slope,
                                    config.tolerance("normal_order"),
                                    "exact" if normal.exact else ""))

    density = DensityMap(points, geometry.euler_density(points), geometry.euler_density(points, "levi-civita"))
    export_density_csv(density, _write(config, geometry.name, "density"), config.echo())
    return _finish(config, report, geometry.name)


EXPECTED_CHI = {"stereographic-sphere": 2.0}


def euler(config: RunConfig) -> SuiteReport:
    """Euler form map, the analytic cross-check and the Euler characteristic."""
    geometry = _geometry(config)
    report = SuiteReport(config.command)
    rng = np.random.default_rng(config.seed_for("euler"))
    points = geometry.domain.sample(rng, config.points or 16)
    density = geometry.euler_density(points)
    reference = None
    if geometry.name in PRESETS and geometry.dim == 2:
        reference = analytic_euler_density(geometry.name, points, geometry.params)
        error = float(np.max(np.abs(density - reference)))
        report.add(CheckResult.below("Euler form matches closed form", error, 1e-6))
    export_density_csv(DensityMap(points, density, reference),
                       _write(config, geometry.name, "density"), config.echo())

    expected = EXPECTED_CHI.get(geometry.name, 0.0)
    for kind in ("full", "levi-civita"):
        chi = euler_characteristic(geometry, kind=kind)
        tolerance = 1e-6 if geometry.domain.periodic else 1e-4
        report.add(CheckResult.below(f"χ = {expected:g} ({kind})", abs(chi - expected), tolerance,
                                     f"χ={chi:.6f}"))
    return _finish(config, report, geometry.name)


def curvature_magnitude(geometry: GeometrySpec, points: np.ndarray, density: np.ndarray) -> np.ndarray:
    """|Pf(-R)| behind an Euler density, i.e. |K_g| on a surface with the Levi-Civita connection."""
    return np.abs(density) * (2 * math.pi) ** (geometry.dim // 2) / geometry.metric.sqrt_det(points)


def _mckean_singer_checks(
    geometry: GeometrySpec, scheme: str, times: tuple[float, ...], tolerance: float, report: SuiteReport
) -> None:
    """Structure of D and t-independence of the global supertrace on the dense grid."""
    dense = assemble_dirac(geometry, mckean_singer_grid(geometry.domain, scheme))
    report.add(CheckResult.below("grading anticommutes with D", grading_anticommutator(dense), 1e-10))
    if geometry.contorsion.is_zero:
        report.add(CheckResult.below("D is W-self-adjoint", self_adjointness_residual(dense), 1e-10))
    values = [mckean_singer(dense, t) for t in times]
    detail = f"N={dense.grid.points}, " + ", ".join(f"{v:.2e}" for v in values)
    report.add(CheckResult.below("McKean-Singer supertrace = 0", max(abs(v) for v in values),
                                 tolerance, detail))
    report.add(CheckResult.below("McKean-Singer t-independence", max(values) - min(values), tolerance))


def heat(config: RunConfig) -> SuiteReport:
    """Local supertrace profile with t → 0 extrapolation and the McKean-Singer check."""
    geometry = _geometry(config)
    report = SuiteReport(config.command)
    scheme = config.derivative or "spectral"
    times = config.times or (0.4, 0.2, 0.1, 0.05)
    grid = Grid(geometry.domain, (config.grid_points or (64,))[-1], scheme)
    op = assemble_dirac(geometry, grid)
    rng = np.random.default_rng(config.seed_for("heat"))
    points = geometry.domain.sample(rng, config.points or 16)
    profile = supertrace_profile(op, times, points)
    export_profile_csv(profile, _write(config, geometry.name, "profile"), config.echo())

    relative, absolute = config.tolerance("relative"), config.tolerance("absolute")
    significant = curvature_magnitude(geometry, profile.points, profile.reference) > 0.05
    allowed = np.where(significant, relative * np.abs(profile.reference), absolute)
    report.add(CheckResult.below("local supertrace = Euler form",
                                 float(np.max(profile.abs_err / allowed)), 1.0 + 1e-12,
                                 f"max abs err {np.max(profile.abs_err):.2e}"))

    if not geometry.contorsion.is_zero:
        lc_form = geometry.euler_density(profile.points, "levi-civita")
        correction = curvature_magnitude(geometry, profile.points, profile.reference - lc_form) >= 0.1
        if np.any(correction):
            gap = np.abs(profile.extrapolated - lc_form)[correction] / allowed[correction]
            report.add(CheckResult.at_least("differs from Levi-Civita Euler form",
                                            float(np.min(gap)), 10.0))

    _mckean_singer_checks(geometry, scheme, MCKEAN_SINGER_TIMES,
                          config.tolerance("mckean_singer"), report)
    return _finish(config, report, geometry.name)


def mckean_singer_suite(config: RunConfig) -> SuiteReport:
    """Global heat supertrace alone, for geometries whose profile grid would exceed the cap."""
    geometry = _geometry(config)
    report = SuiteReport(config.command)
    _mckean_singer_checks(geometry, config.derivative or "spectral",
                          tuple(config.times or MCKEAN_SINGER_TIMES),
                          config.tolerance("mckean_singer"), report)
    return _finish(config, report, geometry.name)


def weitzenbock(config: RunConfig) -> SuiteReport:
    geometry = _geometry(config)
    report = SuiteReport(config.command)
    sizes = config.grid_points or WEITZENBOCK_GRID_POINTS.get(geometry.dim, WEITZENBOCK_GRID_POINTS[4])
    log.info("weitzenbock on %s (d=%d): N = %s", geometry.name, geometry.dim, sizes)
    result = weitzenbock_check(geometry, tuple(sizes), seed=config.seed_for("weitzenbock"),
                               scheme=config.derivative or "fd4")
    residuals = ", ".join(f"{r:.2e}" for r in result.residuals)
    report.add(CheckResult.at_least("Weitzenböck residual order", result.slope,
                                    config.tolerance("weitzenbock_order"), residuals))
    return _finish(config, report, geometry.name)


def _is_flat(geometry: GeometrySpec) -> bool:
    points = geometry.domain.sample(np.random.default_rng(0), 8)
    riemann = curvature(geometry.connection("full"), points).riemann
    return geometry.contorsion.is_zero and float(np.max(np.abs(riemann))) < 1e-12


def monte_carlo(config: RunConfig) -> SuiteReport:
    """Mollified heat diagonals, Lévy areas and path diagnostics."""
    geometry = _geometry(config)
    report = SuiteReport(config.command)
    spec = SdeSpec(geometry, steps=config.steps, drift_sign=config.drift_sign)
    paths = config.paths or 100_000
    x0 = _sample_origin(geometry)
    rows: list[EstimatorRow] = []

    sample = geometry.domain.sample(np.random.default_rng(0), 64)
    report.add(CheckResult.below("σσᵀ = g⁻¹", spec.diffusion_residual(sample), config.tolerance("sigma")))

    if _is_flat(geometry):
        for t in config.times or (0.1, 0.25):
            for bw in config.bandwidths or (0.05,):
                seed = config.seed_for(f"mc-{t}-{bw}")
                est = heat_diag_mc(spec, t, x0, bw, paths, seed)
                oracle = (2 * math.pi * (t + bw**2)) ** (-geometry.dim / 2)
                rows += [EstimatorRow.scalar("heat_diag", est, seed),
                         EstimatorRow.supertrace("str_density", est, seed)]
                report.add(CheckResult.below(f"flat heat diagonal t={t} bw={bw}",
                                             abs(est.scalar - oracle), 3 * est.scalar_stderr + 1e-12))
                report.add(CheckResult.below(f"flat supertrace t={t} bw={bw}", abs(est.supertrace),
                                             3 * est.supertrace_stderr + 1e-12))
    else:
        t = (config.times or (0.1,))[0]
        bandwidths = config.bandwidths if config.bandwidths and len(config.bandwidths) >= 2 else (0.1, 0.05)
        x = _peak_point(geometry)
        seed = config.seed_for("mc-extrapolated")
        est = heat_diag_mc_extrapolated(spec, t, x, (bandwidths[0], bandwidths[1]), paths, seed)
        rows += [EstimatorRow.supertrace(f"str_density_bw{e.bandwidth:g}", e, seed) for e in est.estimates]
        reference = float(geometry.euler_density(x))
        rel = abs(est.supertrace - reference) / abs(reference)
        report.add(CheckResult.below("MC supertrace within 25% of Euler form", rel, 0.25,
                                     f"{est.supertrace:.4e} ± {est.supertrace_stderr:.1e} vs {reference:.4e}"))
        report.add(CheckResult(
            "MC supertrace sign", bool(np.sign(est.supertrace) == np.sign(reference)), est.supertrace
        ))
        exclusion = max(e.excluded for e in est.estimates) / paths
        report.add(CheckResult.below("excluded path rate", exclusion, config.tolerance("exclusion_rate")))

    levy_seed = config.seed_for("levy")
    flat = SdeSpec(preset("flat-torus", {"dim": geometry.dim}), steps=config.steps)
    ensemble = simulate(flat, 1.0, paths, levy_seed, retain_noise=True)
    areas = levy_areas(ensemble)
    for label, values, target in (
        ("Lévy area mean", areas[:, 0, 1], 0.0),
        # midpoint-rule value of E[L_12(1)^2]
        ("Lévy area variance", areas[:, 0, 1] ** 2, 0.5 - 0.25 / config.steps),
        ("Lévy diagonal mean", areas[:, 0, 0], 0.5),
    ):
        mean, err = batch_mean(values)
        report.add(CheckResult.below(label, abs(float(mean) - target), 3 * float(err)))
        rows.append(EstimatorRow(label, 1.0, tuple(ensemble.start), complex(mean), float(err),
                                 paths, 0.0, levy_seed))
    diagonal = np.max(np.abs(areas[:, 0, 0] - 0.5 * ensemble.brownian[:, 0] ** 2))
    report.add(CheckResult.below("Lévy diagonal = w²/2", float(diagonal), 1e-10))

    export_estimates_csv(rows, _write(config, geometry.name, "estimates"), config.echo())
    return _finish(config, report, geometry.name)


def _peak_point(geometry: GeometrySpec) -> np.ndarray:
    """Sample point of largest |Euler form| on a coarse search grid."""
    candidates = geometry.domain.sample(np.random.default_rng(1), 256)
    values = np.abs(geometry.euler_density(candidates))
    return candidates[int(np.argmax(values))]


def orders(config: RunConfig) -> SuiteReport:
    """ε-scaling, strong order and first-moment drift checks."""
    geometry = _geometry(config)
    report = SuiteReport(config.command)
    spec = SdeSpec(geometry, steps=config.steps, drift_sign=config.drift_sign)
    paths = config.paths or 10_000
    x0 = _sample_origin(geometry)

    study = epsilon_order_study(spec, config.epsilons or (0.4, 0.2, 0.1, 0.05), paths,
                                config.seed_for("epsilon"), x0)
    bound = config.tolerance("epsilon_order")
    report.add(CheckResult.at_least("X^ε(1) - εσw(1) order", study.slope, bound,
                                    "exact" if study.exact else ""))
    report.add(CheckResult.at_least("e^ε(1) - 1 - CΔX order", study.secondary_slope, bound))
    export_study_csv(StudyRow.from_study(study), _write(config, geometry.name, "study"), config.echo())

    strong = strong_order_study(spec, 0.25, (4, 8, 16, 32), min(paths, 4096),
                                config.seed_for("strong"), x0)
    report.add(CheckResult.at_least("strong order of X", strong.slope, config.tolerance("strong_order"),
                                    "exact" if strong.exact else ""))
    export_study_csv(StudyRow.from_study(strong), _write(config, geometry.name, "strong"),
                     config.echo(), parameter="step")

    t = 0.05
    moment = drift_moment_check(spec, t, paths, config.seed_for("drift"), x0)
    gap = float(np.max(np.abs(moment.estimate - moment.expected) - 3 * moment.stderr))
    report.add(CheckResult.below("E[X(t) - x] = ½ b t", gap, 4 * t**2))
    return _finish(config, report, geometry.name)


def sphere_curvature(gauss: float = 1.0) -> np.ndarray:
    """Constant-curvature data in d = 2 with R_1212 = -K."""
    r = np.zeros((2, 2, 2, 2))
    r[0, 1, 0, 1] = r[1, 0, 1, 0] = -gauss
    r[1, 0, 0, 1] = r[0, 1, 1, 0] = gauss
    return r


def ladder(config: RunConfig) -> SuiteReport:
    """Algebraic ladder on random curvature and the sampled ladder on Lévy areas."""
    report = SuiteReport(config.command)
    rng = np.random.default_rng(config.seed_for("ladder"))
    for d in config.dims or (2, 4):
        if d <= 4:
            report.extend(_ladder_checks(d, config.samples or 100, rng, config))

    paths = config.paths or 100_000
    eps = (config.epsilons or (0.5,))[0]
    inputs = [("constant curvature d=2", LadderInputs.synthetic(sphere_curvature()))]
    inputs.append(("random curvature d=4", LadderInputs.synthetic(random_curvature(4, rng, pair_symmetric=True))))
    if config.geometry:
        geometry = _geometry(config)
        inputs.append((geometry.name, LadderInputs.from_geometry(geometry, _sample_origin(geometry))))
    for label, data in inputs:
        count = paths if data.dim == 2 else min(paths, 8192)
        result = ladder_check_mc(data, eps, count, config.seed_for(f"ladder-{label}"), config.steps)
        for m, (mean, err) in enumerate(zip(result.means[1:-1], result.stderrs[1:-1]), start=1):
            report.add(CheckResult.below(f"{label}: Str(A_{m}) = 0", abs(mean), 3 * err + 1e-9))
        top = abs(result.means[-1] - result.target)
        report.add(CheckResult.below(f"{label}: Str(A_l) = ε^(2l) Pf(-R)", top,
                                     3 * result.stderrs[-1] + 1e-9,
                                     f"Str/ε^(2l)={result.scaled_top:.6f}, Pf={result.pfaffian:.6f}"))
    return _finish(config, report, None)


SUITES: dict[str, Suite] = {
    "verify-algebra": verify_algebra,
    "curvature": curvature_tables,
    "euler": euler,
    "heat": heat,
    "mckean-singer": mckean_singer_suite,
    "weitzenbock": weitzenbock,
    "mc": monte_carlo,
    "orders": orders,
    "ladder": ladder,
}


def acceptance_runs(config: RunConfig) -> list[RunConfig]:
    """Sub-runs of ``gbcheck all``."""
    quick = config.quick
    runs = [
        config.for_command("verify-algebra"),
        config.for_command("ladder"),
        config.for_command("curvature", geometry="stereographic-sphere"),
        config.for_command("curvature", geometry="torsion-torus"),
        config.for_command("euler", geometry="torsion-torus"),
        config.for_command("euler", geometry="stereographic-sphere"),
        config.for_command("weitzenbock", geometry="conformal-torus",
                           grid_points=(16, 32) if quick else None),
        config.for_command("heat", geometry="conformal-torus",
                           grid_points=(32,) if quick else None),
        config.for_command("heat", geometry="torsion-torus",
                           grid_points=(32,) if quick else None),
        config.for_command("mckean-singer", geometry="flat-torus"),
        config.for_command("mckean-singer", geometry="conformal-4torus"),
        config.for_command("mc", geometry="flat-torus"),
        config.for_command("orders", geometry="conformal-torus"),
        config.for_command("orders", geometry="torsion-torus"),
    ]
    if not quick:
        runs.append(config.for_command("weitzenbock", geometry="conformal-4torus"))
        runs.append(config.for_command("mc", geometry="conformal-torus"))
    return runs
