"""Run configuration: every knob of a gbcheck invocation, validated up front."""

from __future__ import annotations

import argparse
import zlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np

from app.core.errors import ValidationError
from app.core.hodge import MIN_POINTS, max_dense_dofs, max_dofs, max_section_dofs
from app.core.sde import MIN_BATCHES
from app.core.stencils import SCHEMES

COMMANDS = (
    "verify-algebra",
    "curvature",
    "euler",
    "heat",
    "mckean-singer",
    "weitzenbock",
    "mc",
    "orders",
    "ladder",
    "all",
)
SUPPORTED_DIMS = (2, 4, 6)

# Named tolerances and their defaults.
TOLERANCES: dict[str, float] = {
    "algebra": 1e-10,
    "pfaffian": 1e-8,
    "ladder": 1e-8,
    "weitzenbock_order": 2.0,
    "relative": 0.05,
    "absolute": 0.01,
    "mckean_singer": 1e-5,
    "normal_order": 1.9,
    "epsilon_order": 1.9,
    "strong_order": 0.9,
    "sigma": 1e-10,
    "exclusion_rate": 1e-3,
}

# Heat times of the McKean-Singer checks; they span a factor 20.
MCKEAN_SINGER_TIMES: tuple[float, ...] = (1.0, 0.25, 0.05)

# Per-command defaults for knobs left unset on the command line.
COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "verify-algebra": {"dims": (2, 4, 6), "samples": 1000},
    "curvature": {"geometry": "conformal-torus", "points": 8},
    "euler": {"geometry": "torsion-torus", "points": 16},
    "heat": {
        "geometry": "conformal-torus",
        "grid_points": (64,),
        "times": (0.4, 0.2, 0.1, 0.05),
        "points": 16,
    },
    "mckean-singer": {"geometry": "flat-torus", "times": MCKEAN_SINGER_TIMES},
    "weitzenbock": {"geometry": "conformal-torus", "derivative": "fd4"},
    "mc": {
        "geometry": "flat-torus",
        "times": (0.1, 0.25),
        "paths": 100_000,
        "bandwidths": (0.05,),
    },
    "orders": {"geometry": "conformal-torus", "epsilons": (0.4, 0.2, 0.1, 0.05), "paths": 10_000},
    "ladder": {"dims": (2, 4), "samples": 100, "paths": 100_000, "epsilons": (0.5,)},
    "all": {},
}

# Weitzenböck grid sizes per dimension when --N is not given.
WEITZENBOCK_GRID_POINTS: dict[int, tuple[int, ...]] = {2: (16, 32, 64), 4: (8, 12, 16)}

QUICK_OVERRIDES: dict[str, Any] = {"samples": 50, "paths": 8192, "points": 4}


def component_seed(seed: int, component: str) -> int:
    """Seed of one component, derived from the top-level seed and the component name."""
    sequence = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(component.encode()),))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def parse_list(text: str, kind: type = float) -> tuple[Any, ...]:
    """Comma-separated numbers, e.g. ``0.4,0.2,0.1``."""
    try:
        return tuple(kind(item) for item in text.split(",") if item.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list, got '{text}'") from None


def parse_assignment(text: str) -> tuple[str, float]:
    """``name=value`` pairs for preset parameters and tolerance overrides."""
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected name=value, got '{text}'")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of '{name}' is not a number") from None


@dataclass
class RunConfig:
    """All inputs of one run.

    Knobs left at ``None`` take the defaults of the command (``COMMAND_DEFAULTS``).
    """

    command: str
    geometry: Optional[str] = None
    params: dict[str, float] = field(default_factory=dict)
    dims: Optional[tuple[int, ...]] = None
    grid_points: Optional[tuple[int, ...]] = None
    times: Optional[tuple[float, ...]] = None
    epsilons: Optional[tuple[float, ...]] = None
    paths: Optional[int] = None
    seed: int = 0
    bandwidths: Optional[tuple[float, ...]] = None
    samples: Optional[int] = None
    points: Optional[int] = None
    steps: int = 64
    derivative: Optional[str] = None
    drift_sign: float = 1.0
    tolerances: dict[str, float] = field(default_factory=dict)
    output: Path = Path("gbcheck-out")
    quick: bool = False

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> RunConfig:
        geometry = getattr(args, "spec", None) or getattr(args, "preset", None)
        return cls(
            command=args.command,
            geometry=geometry,
            params=dict(getattr(args, "param", None) or []),
            dims=getattr(args, "d", None),
            grid_points=getattr(args, "N", None),
            times=getattr(args, "t", None),
            epsilons=getattr(args, "eps", None),
            paths=getattr(args, "n", None),
            seed=getattr(args, "seed", 0),
            bandwidths=getattr(args, "bandwidth", None),
            samples=getattr(args, "samples", None),
            points=getattr(args, "points", None),
            steps=getattr(args, "steps", 64),
            derivative=getattr(args, "derivative", None),
            drift_sign=getattr(args, "drift_sign", 1.0),
            tolerances=dict(getattr(args, "tol", None) or []),
            output=Path(getattr(args, "out", "gbcheck-out")),
            quick=getattr(args, "quick", False),
        ).with_defaults()

    def with_defaults(self, command: str | None = None) -> RunConfig:
        """Fill unset knobs from the defaults of ``command`` (own command by default)."""
        defaults = dict(COMMAND_DEFAULTS.get(command or self.command, {}))
        if self.quick:
            defaults.update(QUICK_OVERRIDES)
        updates = {
            name: value
            for name, value in defaults.items()
            if getattr(self, name) is None or (self.quick and name in QUICK_OVERRIDES)
        }
        return replace(self, **updates)

    def for_command(self, command: str, **overrides: Any) -> RunConfig:
        """Sub-run of the acceptance suite: shared knobs carry over, the rest reset."""
        base = RunConfig(
            command=command,
            seed=self.seed,
            steps=self.steps,
            drift_sign=self.drift_sign,
            tolerances=self.tolerances,
            output=self.output,
            quick=self.quick,
            **overrides,
        )
        return base.with_defaults()

    def tolerance(self, name: str) -> float:
        return self.tolerances.get(name, TOLERANCES[name])

    def seed_for(self, component: str) -> int:
        return component_seed(self.seed, component)

    def validate(self) -> None:
        """Raise ``ValidationError`` for the first invalid knob."""
        if self.command not in COMMANDS:
            raise ValidationError("command", f"unknown command '{self.command}'")
        if self.geometry is not None and not self.geometry.strip():
            raise ValidationError("geometry", "empty geometry source")
        for name, value in self.params.items():
            if not np.isfinite(value):
                raise ValidationError("params", f"{name} is not finite")
        if self.dims is not None:
            if not self.dims:
                raise ValidationError("dims", "no dimensions given")
            bad = [d for d in self.dims if d not in SUPPORTED_DIMS]
            if bad:
                raise ValidationError("dims", f"unsupported dimension {bad[0]}")
        if self.grid_points is not None:
            if not self.grid_points or min(self.grid_points) < MIN_POINTS:
                raise ValidationError("grid_points", f"each grid size must be at least {MIN_POINTS}")
            if list(self.grid_points) != sorted(set(self.grid_points)):
                raise ValidationError("grid_points", "grid sizes must be strictly increasing")
        if self.times is not None:
            if not self.times or min(self.times) <= 0:
                raise ValidationError("times", "times must be positive")
            if self.command == "heat" and len(self.times) < 2:
                raise ValidationError("times", "extrapolation needs at least two times")
        if self.epsilons is not None:
            if not self.epsilons or min(self.epsilons) <= 0:
                raise ValidationError("epsilons", "epsilon values must be positive")
            if self.command == "orders":
                if len(self.epsilons) < 4:
                    raise ValidationError("epsilons", "order study needs at least 4 values")
                if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
                    raise ValidationError("epsilons", "epsilon values must be strictly decreasing")
        if self.paths is not None and self.paths < MIN_BATCHES:
            raise ValidationError("paths", f"at least {MIN_BATCHES} paths are required")
        if self.seed < 0:
            raise ValidationError("seed", "seed must be non-negative")
        if self.bandwidths is not None:
            if not self.bandwidths or min(self.bandwidths) <= 0:
                raise ValidationError("bandwidths", "bandwidths must be positive")
        for name in ("samples", "points"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValidationError(name, "must be at least 1")
        if self.steps < 1:
            raise ValidationError("steps", "must be at least 1")
        if self.derivative is not None and self.derivative not in SCHEMES:
            raise ValidationError("derivative", f"must be one of {', '.join(SCHEMES)}")
        if self.drift_sign not in (1.0, -1.0):
            raise ValidationError("drift_sign", "must be +1 or -1")
        for name, value in self.tolerances.items():
            if name not in TOLERANCES:
                raise ValidationError("tolerances", f"unknown tolerance '{name}'")
            if not value > 0:
                raise ValidationError("tolerances", f"{name} must be positive")

    def echo(self) -> dict[str, Any]:
        """Ordered ``key: value`` pairs written into every CSV header."""
        out: dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            # output location is not part of the result
            if value is None or f.name == "output":
                continue
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, dict):
                value = ",".join(f"{k}={v}" for k, v in sorted(value.items()))
            out[f.name] = value
        out["max_dofs"] = max_dofs()
        out["max_dense_dofs"] = max_dense_dofs()
        out["max_section_dofs"] = max_section_dofs()
        return out
