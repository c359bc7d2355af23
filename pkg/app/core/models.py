"""Result models shared by the verification suites and the CSV exporters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from app.core.sde import KernelEstimate, OrderStudy


@dataclass
class CheckResult:
    """Outcome of a single tolerance check."""

    name: str
    passed: bool
    measured: float
    tolerance: Optional[float] = None
    detail: str = ""

    @classmethod
    def below(cls, name: str, measured: float, tolerance: float, detail: str = "") -> CheckResult:
        """Pass when ``measured`` is finite and strictly below ``tolerance``."""
        ok = math.isfinite(measured) and measured < tolerance
        return cls(name, ok, measured, tolerance, detail)

    @classmethod
    def at_least(cls, name: str, measured: float, bound: float, detail: str = "") -> CheckResult:
        """Pass when ``measured`` is at least ``bound`` (NaN passes: exact result)."""
        ok = math.isnan(measured) or measured >= bound
        return cls(name, ok, measured, bound, detail)

    @property
    def mark(self) -> str:
        return "✓" if self.passed else "✗"

    def line(self) -> str:
        """Human-readable progress line, e.g. ``✓ pfaffian d=4: 3.1e-15 (< 1e-08)``."""
        text = f"{self.mark} {self.name}: {self.measured:.3e}"
        if self.tolerance is not None:
            text += f" (tol {self.tolerance:.1e})"
        if self.detail:
            text += f" [{self.detail}]"
        return text


@dataclass
class SuiteReport:
    """All checks run by one subcommand."""

    command: str
    checks: list[CheckResult] = field(default_factory=list)

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check

    def extend(self, checks: Iterable[CheckResult]) -> None:
        self.checks.extend(checks)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    @property
    def summary(self) -> str:
        ok = len(self.checks) - len(self.failures)
        return f"{self.command}: {ok}/{len(self.checks)} checks passed"


@dataclass
class EstimatorRow:
    """One Monte Carlo estimator value."""

    name: str
    t: float
    x: tuple[float, ...]
    value: complex
    stderr: float
    paths: int
    bandwidth: float
    seed: int

    @classmethod
    def supertrace(cls, name: str, estimate: KernelEstimate, seed: int) -> EstimatorRow:
        return cls(
            name=name,
            t=estimate.t,
            x=tuple(float(v) for v in estimate.point),
            value=complex(estimate.supertrace),
            stderr=estimate.supertrace_stderr,
            paths=estimate.paths,
            bandwidth=estimate.bandwidth,
            seed=seed,
        )

    @classmethod
    def scalar(cls, name: str, estimate: KernelEstimate, seed: int) -> EstimatorRow:
        """Fiber-normalised trace of the endomorphism estimate."""
        return cls(
            name=name,
            t=estimate.t,
            x=tuple(float(v) for v in estimate.point),
            value=complex(estimate.scalar),
            stderr=estimate.scalar_stderr,
            paths=estimate.paths,
            bandwidth=estimate.bandwidth,
            seed=seed,
        )

    def cells(self) -> list[object]:
        return [
            self.name,
            self.t,
            " ".join(f"{v:.6g}" for v in self.x),
            self.value.real,
            self.value.imag,
            self.stderr,
            self.paths,
            self.bandwidth,
            self.seed,
        ]


@dataclass
class StudyRow:
    """One refinement level of an order study."""

    parameter: float
    residual: float
    slope: float

    @classmethod
    def from_study(cls, study: OrderStudy) -> list[StudyRow]:
        slope = study.slope
        return [cls(p, r, slope) for p, r in zip(study.values, study.residuals)]


@dataclass
class DensityMap:
    """Pointwise Euler form density of one connection over chart points."""

    points: np.ndarray
    density: np.ndarray
    reference: Optional[np.ndarray] = None

    def rows(self) -> list[tuple[float, ...]]:
        ref = self.reference if self.reference is not None else np.full(len(self.points), np.nan)
        return [(*x, d, r) for x, d, r in zip(self.points, self.density, ref)]
