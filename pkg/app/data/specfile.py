"""Geometry spec files and geometry loading.

A spec file is flat ``key = value`` text; ``#`` starts a comment. Values are
expressions in the coordinates or bracketed, comma-separated arrays of them::

    name   = conformal-torus
    dim    = 2
    domain = periodic-box
    sides  = [2*pi, 2*pi]
    g11    = exp(0.6*sin(x1)*cos(x2))
    g22    = exp(0.6*sin(x1)*cos(x2))

Metric entries are ``g<i><j>`` (missing entries default to the identity, ``g<j><i>``
mirrors ``g<i><j>``); contorsion entries ``K<i><a><b>`` are frame components, and
``K<i><b><a>`` is filled in as ``-K<i><a><b>``. Derivative fields are obtained by
symbolic differentiation.
"""

from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Mapping

import numpy as np

from app.core.errors import ExpressionError, GeometryError, ValidationError
from app.core.geometry import DOMAIN_KINDS, ChartDomain, ContorsionField, GeometrySpec, MetricField
from app.core.presets import PRESETS, preset
from app.data.expression import Expression, parse_expression

log = logging.getLogger(__name__)

SPEC_SUFFIX = ".gbc"
SPEC_DIR = Path(__file__).parent / "specs"
CHECK_SAMPLES = 100

_METRIC_KEY = re.compile(r"g([1-9])([1-9])")
_CONTORSION_KEY = re.compile(r"K([1-9])([1-9])([1-9])")
_PLAIN_KEYS = ("name", "dim", "domain", "sides", "radius", "metric")


def split_array(text: str, key: str) -> list[str]:
    """Split ``[a, b, [c, d]]`` into its top-level items."""
    inner = text.strip()
    if not (inner.startswith("[") and inner.endswith("]")):
        raise ValidationError(key, f"expected a bracketed array, got '{text}'")
    inner = inner[1:-1]
    items, depth, start = [], 0, 0
    for pos, char in enumerate(inner):
        if char in "[(":
            depth += 1
        elif char in "])":
            depth -= 1
            if depth < 0:
                raise ValidationError(key, "unbalanced brackets")
        elif char == "," and depth == 0:
            items.append(inner[start:pos].strip())
            start = pos + 1
    if depth:
        raise ValidationError(key, "unbalanced brackets")
    tail = inner[start:].strip()
    if tail:
        items.append(tail)
    return items


def parse_spec_text(text: str) -> dict[str, str]:
    """Raw ``key = value`` pairs in file order."""
    entries: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {number}", f"expected 'key = value', got '{line}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ValidationError(f"line {number}", "empty key or value")
        if key in entries:
            raise ValidationError(key, f"duplicate key on line {number}")
        entries[key] = value
    return entries


def _expression(text: str, key: str, dim: int) -> Expression:
    try:
        return parse_expression(text, dim)
    except ExpressionError as exc:
        raise ValidationError(key, str(exc)) from exc


def _constant(text: str, key: str) -> float:
    expr = _expression(text, key, 0)
    return float(expr(np.zeros(1)))


class SpecFile:
    """Parsed spec file: chart data plus expression fields."""

    def __init__(self, entries: Mapping[str, str], source: str = "<string>") -> None:
        self.source = source
        self.entries = dict(entries)
        unknown = [
            k
            for k in self.entries
            if k not in _PLAIN_KEYS
            and not _METRIC_KEY.fullmatch(k)
            and not _CONTORSION_KEY.fullmatch(k)
        ]
        if unknown:
            raise ValidationError(unknown[0], "unknown key")
        if "dim" not in self.entries:
            raise ValidationError("dim", "missing")
        try:
            self.dim = int(self.entries["dim"])
        except ValueError:
            raise ValidationError("dim", f"not an integer: '{self.entries['dim']}'") from None
        if self.dim < 2 or self.dim % 2 or self.dim > 8:
            raise ValidationError("dim", f"must be even and between 2 and 8, got {self.dim}")
        self.name = self.entries.get("name", Path(source).stem)
        self.domain = self._domain()
        self.metric = self._metric_entries()
        self.contorsion = self._contorsion_entries()

    def _metric_entries(self) -> list[list[Expression]]:
        d = self.dim
        table: list[list[Expression | None]] = [[None] * d for _ in range(d)]
        keys: dict[tuple[int, int], str] = {}
        if "metric" in self.entries:
            rows = split_array(self.entries["metric"], "metric")
            if len(rows) != d:
                raise ValidationError("metric", f"expected {d} rows, got {len(rows)}")
            for i, row in enumerate(rows):
                cells = split_array(row, "metric")
                if len(cells) != d:
                    raise ValidationError("metric", f"row {i + 1} has {len(cells)} entries")
                for j, cell in enumerate(cells):
                    table[i][j] = _expression(cell, "metric", d)
                    keys[i, j] = "metric"
        for key, text in self.entries.items():
            match = _METRIC_KEY.fullmatch(key)
            if match is None:
                continue
            i, j = int(match.group(1)) - 1, int(match.group(2)) - 1
            if i >= d or j >= d:
                raise ValidationError(key, f"index out of range for dim {d}")
            if (i, j) in keys:
                raise ValidationError(key, "metric entry given twice")
            table[i][j] = _expression(text, key, d)
            keys[i, j] = key
        for i in range(d):
            for j in range(d):
                if table[i][j] is None:
                    mirror = table[j][i]
                    table[i][j] = mirror if mirror is not None else Expression.constant(float(i == j))
        for i, j in keys:
            if (j, i) in keys and i < j:
                self._check_symmetric(table[i][j], table[j][i], keys[j, i])
        return [[e for e in row if e is not None] for row in table]

    def _check_symmetric(self, a: Expression, b: Expression, key: str) -> None:
        points = self.domain.sample(np.random.default_rng(0), CHECK_SAMPLES)
        if np.max(np.abs(a(points) - b(points))) > 1e-12:
            raise ValidationError(key, "metric is not symmetric")

    def _contorsion_entries(self) -> dict[tuple[int, int, int], Expression]:
        d = self.dim
        entries: dict[tuple[int, int, int], Expression] = {}
        keys: dict[tuple[int, int, int], str] = {}
        for key, text in self.entries.items():
            match = _CONTORSION_KEY.fullmatch(key)
            if match is None:
                continue
            i, a, b = (int(g) - 1 for g in match.groups())
            if max(i, a, b) >= d:
                raise ValidationError(key, f"index out of range for dim {d}")
            if a == b:
                raise ValidationError(key, "contorsion must be skew in its frame indices")
            entries[i, a, b] = _expression(text, key, d)
            keys[i, a, b] = key
        for i, a, b in keys:
            if (i, b, a) in keys and a < b:
                points = self.domain.sample(np.random.default_rng(0), CHECK_SAMPLES)
                total = entries[i, a, b](points) + entries[i, b, a](points)
                if np.max(np.abs(total)) > 1e-12:
                    raise ValidationError(keys[i, b, a], "contorsion is not skew in its frame indices")
        return entries

    def _domain(self) -> ChartDomain:
        kind = self.entries.get("domain")
        if kind is None:
            log.warning("%s: no domain given, using a periodic box", self.source)
            kind = "periodic-box"
        if kind not in DOMAIN_KINDS:
            raise ValidationError("domain", f"must be one of {', '.join(DOMAIN_KINDS)}")
        try:
            if kind == "full-space":
                radius = self.entries.get("radius")
                return ChartDomain(self.dim, kind, (), _constant(radius, "radius") if radius else None)
            if "sides" not in self.entries:
                log.warning("%s: no sides given, using 2π", self.source)
                return ChartDomain.torus(self.dim)
            sides = split_array(self.entries["sides"], "sides")
            if len(sides) != self.dim:
                raise ValidationError("sides", f"expected {self.dim} side lengths")
            return ChartDomain(self.dim, kind, tuple(_constant(s, "sides") for s in sides))
        except GeometryError as exc:
            raise ValidationError("domain", str(exc)) from exc

    def metric_field(self) -> MetricField:
        d = self.dim
        table = self.metric
        derivatives = [[[table[i][j].derivative(k) for j in range(d)] for i in range(d)] for k in range(d)]

        def value(x: np.ndarray) -> np.ndarray:
            return np.stack([np.stack([e(x) for e in row], -1) for row in table], -2)

        def derivative(x: np.ndarray) -> np.ndarray:
            return np.stack(
                [np.stack([np.stack([e(x) for e in row], -1) for row in k], -2) for k in derivatives],
                -3,
            )

        return MetricField(d, value, derivative)

    def contorsion_field(self) -> ContorsionField:
        d = self.dim
        if not self.contorsion:
            return ContorsionField.zero(d)
        full: dict[tuple[int, int, int], Expression] = {}
        for (i, a, b), expr in self.contorsion.items():
            full[i, a, b] = expr
            if (i, b, a) not in self.contorsion:
                full[i, b, a] = -expr
        index = sorted(full)
        d_exprs = {k: [full[k].derivative(m) for m in range(d)] for k in index}

        def value(x: np.ndarray) -> np.ndarray:
            out = np.zeros((*x.shape[:-1], d, d, d))
            for key in index:
                out[(..., *key)] = full[key](x)
            return out

        def derivative(x: np.ndarray) -> np.ndarray:
            out = np.zeros((*x.shape[:-1], d, d, d, d))
            for key in index:
                for m, expr in enumerate(d_exprs[key]):
                    out[(..., m, *key)] = expr(x)
            return out

        return ContorsionField(d, value, derivative)

    def geometry(self) -> GeometrySpec:
        return GeometrySpec(self.name, self.domain, self.metric_field(), self.contorsion_field(), {})


def load_spec_file(path: Path | str) -> GeometrySpec:
    """Read and validate a spec file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError("geometry", f"cannot read spec file '{path}': {exc}") from exc
    geometry = SpecFile(parse_spec_text(text), str(path)).geometry()
    _validate(geometry)
    return geometry


def load_spec_string(text: str, source: str = "<string>") -> GeometrySpec:
    geometry = SpecFile(parse_spec_text(text), source).geometry()
    _validate(geometry)
    return geometry


def _validate(geometry: GeometrySpec) -> None:
    try:
        geometry.validate(samples=CHECK_SAMPLES)
    except GeometryError as exc:
        raise ValidationError("geometry", str(exc)) from exc
    except ExpressionError as exc:
        raise ValidationError("geometry", str(exc)) from exc


def shipped_spec(name: str) -> Path:
    """Path of the example spec file shipped for a preset."""
    return SPEC_DIR / f"{name}{SPEC_SUFFIX}"


def load_geometry(source: str, params: Mapping[str, float] | None = None) -> GeometrySpec:
    """Preset name or spec file path to a validated geometry."""
    if source in PRESETS:
        try:
            geometry = preset(source, params or {})
        except GeometryError as exc:
            raise ValidationError("params", str(exc)) from exc
        _validate(geometry)
        log.info("loaded preset %s %s", source, dict(geometry.params))
        return geometry
    path = Path(source)
    if not path.exists():
        raise ValidationError(
            "geometry", f"'{source}' is neither a preset ({', '.join(sorted(PRESETS))}) nor a file"
        )
    if params:
        raise ValidationError("params", "preset parameters do not apply to spec files")
    geometry = load_spec_file(path)
    log.info("loaded spec file %s (dim %d)", path, geometry.dim)
    return geometry


def fields_agree(a: GeometrySpec, b: GeometrySpec, samples: int = 100, seed: int = 0) -> float:
    """Largest metric and contorsion discrepancy between two geometries at random points."""
    points = a.domain.sample(np.random.default_rng(seed), samples)
    metric = float(np.max(np.abs(a.metric(points) - b.metric(points))))
    contorsion = float(np.max(np.abs(a.contorsion(points) - b.contorsion(points)), initial=0.0))
    return max(metric, contorsion)
