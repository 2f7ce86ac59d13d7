"""Tabular observation data and its preprocessing steps.

A table holds named observations (rows) measured on named variables
(columns).  Cells are missing, a scalar, or a closed interval when the
source only recorded a range.  Every operation in this module is a pure
transformation: inputs are never mutated and results are safe to share
across threads.

File formats
------------
Tables are CSV (UTF-8, comma separated).  The header row names the
variables; the first column holds the observation label.  Cell syntax:

* empty string          -> missing
* decimal number        -> scalar ("-3" is the scalar minus three)
* ``lo-hi`` / ``lo–hi`` -> interval (ASCII hyphen or en dash; bounds are
  plain decimals, so ``2-3`` is the interval [2, 3])

An optional sidecar metadata file (TOML) declares per-variable kinds and
ratio components, per-observation group labels, the focal observation,
and per-group representative observations::

    [variables.cephalic_index]
    kind = "ratio"
    components = ["max_cranial_breadth", "glabella_occipital_length"]

    [variables.frontal_angle]
    kind = "angle_degrees"

    [groups]
    "Spy I" = "neanderthalensis"

    [focal]
    label = "Nowosiółka"

    [representatives]
    neanderthalensis = "Neandertal"
    sapiens = "Brüx"

Unknown keys anywhere in the metadata file are rejected.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import statistics
from dataclasses import dataclass, replace
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import IO, Iterable, Mapping

from .errors import DataError, MetadataError, TableParseError

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib  # type: ignore[no-redef]


# --------------------------------------------------------------------------
# cells


@dataclass(frozen=True)
class Missing:
    """Absent measurement."""


@dataclass(frozen=True)
class Scalar:
    value: float


@dataclass(frozen=True)
class Interval:
    """Closed interval: the source recorded only a range for the measurement."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"interval bounds out of order: {self.lo} > {self.hi}")


Cell = Missing | Scalar | Interval

MISSING = Missing()

_INTERVAL_RE = re.compile(r"(-?\d+(?:\.\d+)?)\s*[-–]\s*(-?\d+(?:\.\d+)?)")


def parse_cell(text: str) -> Cell:
    """Parse one CSV cell. Raises ValueError on malformed input."""
    s = text.strip()
    if not s:
        return MISSING
    try:
        v = float(s)
    except ValueError:
        pass
    else:
        if not math.isfinite(v):
            raise ValueError(f"non-finite number {s!r}")
        return Scalar(v)
    m = _INTERVAL_RE.fullmatch(s)
    if m is not None:
        lo, hi = float(m.group(1)), float(m.group(2))
        if lo > hi:
            raise ValueError(f"interval bounds out of order in {s!r}")
        return Interval(lo, hi)
    raise ValueError(f"malformed cell {s!r}")


def _fmt_bound(v: float) -> str:
    # interval syntax forbids scientific notation; every float has an exact
    # finite decimal expansion, so fall back to that
    s = repr(v)
    if "e" in s or "E" in s:
        s = format(Decimal(v), "f")
    return s


def format_cell(cell: Cell) -> str:
    """Inverse of parse_cell (up to insignificant whitespace)."""
    if isinstance(cell, Missing):
        return ""
    if isinstance(cell, Scalar):
        return repr(cell.value)
    return f"{_fmt_bound(cell.lo)}-{_fmt_bound(cell.hi)}"


# --------------------------------------------------------------------------
# variables and tables


class VarKind(str, Enum):
    PLAIN = "plain"
    ANGLE_DEGREES = "angle_degrees"
    ANGLE_RADIANS = "angle_radians"
    RATIO = "ratio"


@dataclass(frozen=True)
class VariableMeta:
    """Name and kind of one variable.

    ``components`` names the ingredient variables of a ratio.  They are
    validated against the table at parse time; a later column subset may
    leave them referring to dropped columns, which is fine because only
    subsetting itself consults them.
    """

    name: str
    kind: VarKind = VarKind.PLAIN
    components: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if (self.kind is VarKind.RATIO) != bool(self.components):
            raise ValueError(
                f"variable {self.name!r}: components are required exactly for ratio variables"
            )


@dataclass(frozen=True)
class ObservationTable:
    """Immutable observations-by-variables table.

    ``groups``, ``focal`` and ``representatives`` are optional study
    metadata: group membership per observation label, the focal
    observation of a placement analysis, and one representative
    observation label per group.
    """

    observations: tuple[str, ...]
    variables: tuple[VariableMeta, ...]
    cells: tuple[tuple[Cell, ...], ...]
    groups: Mapping[str, str] | None = None
    focal: str | None = None
    representatives: Mapping[str, str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "cells", tuple(tuple(row) for row in self.cells))
        if self.groups is not None:
            object.__setattr__(self, "groups", dict(self.groups))
        if self.representatives is not None:
            object.__setattr__(self, "representatives", dict(self.representatives))
        if len(set(self.observations)) != len(self.observations):
            raise DataError("duplicate observation labels")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise DataError("duplicate variable names")
        if len(self.cells) != len(self.observations):
            raise DataError(
                f"cell matrix has {len(self.cells)} rows for {len(self.observations)} observations"
            )
        for label, row in zip(self.observations, self.cells):
            if len(row) != len(self.variables):
                raise DataError(
                    f"row {label!r} has {len(row)} cells for {len(self.variables)} variables"
                )
        known = set(self.observations)
        for label in (self.groups or {}):
            if label not in known:
                raise DataError(f"group assigned to unknown observation {label!r}")
        if self.focal is not None and self.focal not in known:
            raise DataError(f"focal observation {self.focal!r} not in table")
        for group, label in (self.representatives or {}).items():
            if label not in known:
                raise DataError(f"representative {label!r} of group {group!r} not in table")

    @property
    def n_observations(self) -> int:
        return len(self.observations)

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def variable_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def variable_index(self, name: str) -> int:
        try:
            return self.variable_names().index(name)
        except ValueError:
            raise DataError(f"unknown variable {name!r}") from None

    def observation_index(self, label: str) -> int:
        try:
            return self.observations.index(label)
        except ValueError:
            raise DataError(f"unknown observation {label!r}") from None

    def row(self, i: int) -> tuple[Cell, ...]:
        return self.cells[i]

    def column(self, j: int) -> tuple[Cell, ...]:
        return tuple(row[j] for row in self.cells)

    def row_values(self, i: int) -> tuple[float | None, ...]:
        """Row as plain numbers, missing as None. Intervals must be resolved first."""
        out: list[float | None] = []
        for v, cell in zip(self.variables, self.cells[i]):
            if isinstance(cell, Interval):
                raise DataError(
                    f"unresolved interval in {self.observations[i]!r} / {v.name!r};"
                    " run resolve_intervals first"
                )
            out.append(cell.value if isinstance(cell, Scalar) else None)
        return tuple(out)


# --------------------------------------------------------------------------
# parsing


@dataclass(frozen=True)
class TableMetadata:
    kinds: Mapping[str, VarKind]
    components: Mapping[str, tuple[str, ...]]
    groups: Mapping[str, str]
    focal: str | None
    representatives: Mapping[str, str]


def parse_metadata(text: str) -> TableMetadata:
    """Parse the sidecar metadata file. Unknown keys are rejected."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise MetadataError(f"metadata is not valid TOML: {e}") from None
    unknown = set(doc) - {"variables", "groups", "focal", "representatives"}
    if unknown:
        raise MetadataError(f"unknown metadata keys: {sorted(unknown)}")

    kinds: dict[str, VarKind] = {}
    components: dict[str, tuple[str, ...]] = {}
    variables = doc.get("variables", {})
    if not isinstance(variables, dict):
        raise MetadataError("[variables] must be a table")
    for name, entry in variables.items():
        if not isinstance(entry, dict):
            raise MetadataError(f"[variables.{name}] must be a table")
        bad = set(entry) - {"kind", "components"}
        if bad:
            raise MetadataError(f"[variables.{name}]: unknown keys {sorted(bad)}")
        kind_text = entry.get("kind", "plain")
        try:
            kind = VarKind(kind_text)
        except ValueError:
            raise MetadataError(
                f"[variables.{name}]: unknown kind {kind_text!r}"
            ) from None
        kinds[name] = kind
        comps = entry.get("components", [])
        if comps and not (isinstance(comps, list) and all(isinstance(c, str) for c in comps)):
            raise MetadataError(f"[variables.{name}]: components must be a list of names")
        if (kind is VarKind.RATIO) != bool(comps):
            raise MetadataError(
                f"[variables.{name}]: components are required exactly for ratio variables"
            )
        if comps:
            components[name] = tuple(comps)

    groups = doc.get("groups", {})
    if not (isinstance(groups, dict) and all(isinstance(g, str) for g in groups.values())):
        raise MetadataError("[groups] must map observation labels to group names")

    focal = None
    focal_entry = doc.get("focal", {})
    if focal_entry:
        bad = set(focal_entry) - {"label"}
        if bad:
            raise MetadataError(f"[focal]: unknown keys {sorted(bad)}")
        focal = focal_entry.get("label")
        if not isinstance(focal, str):
            raise MetadataError("[focal].label must be a string")

    reps = doc.get("representatives", {})
    if not (isinstance(reps, dict) and all(isinstance(v, str) for v in reps.values())):
        raise MetadataError("[representatives] must map group names to observation labels")

    return TableMetadata(
        kinds=kinds, components=components, groups=dict(groups), focal=focal,
        representatives=dict(reps),
    )


def parse_table(source: str | IO[str], metadata: TableMetadata | None = None) -> ObservationTable:
    """Parse a CSV table (text or open stream), merging optional metadata.

    Errors carry 1-based row/column coordinates of the offending cell.
    """
    stream = io.StringIO(source) if isinstance(source, str) else source
    rows = [row for row in csv.reader(stream) if row]
    if not rows:
        raise TableParseError("empty table", row=1)
    header = rows[0]
    if len(header) < 2:
        raise TableParseError("header must name at least one variable", row=1)
    var_names = [h.strip() for h in header[1:]]
    seen_vars: set[str] = set()
    for c, name in enumerate(var_names, start=2):
        if not name:
            raise TableParseError("empty variable name", row=1, column=c)
        if name in seen_vars:
            raise TableParseError(f"duplicate variable {name!r}", row=1, column=c)
        seen_vars.add(name)

    labels: list[str] = []
    cells: list[tuple[Cell, ...]] = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise TableParseError(
                f"expected {len(header)} fields, found {len(row)}", row=r
            )
        label = row[0].strip()
        if not label:
            raise TableParseError("empty observation label", row=r, column=1)
        if label in labels:
            raise TableParseError(f"duplicate label {label!r}", row=r, column=1)
        parsed: list[Cell] = []
        for c, text in enumerate(row[1:], start=2):
            try:
                parsed.append(parse_cell(text))
            except ValueError as e:
                raise TableParseError(str(e), row=r, column=c) from None
        labels.append(label)
        cells.append(tuple(parsed))

    md = metadata or TableMetadata({}, {}, {}, None, {})
    for name in md.kinds:
        if name not in seen_vars:
            raise MetadataError(f"metadata declares unknown variable {name!r}")
    for name, comps in md.components.items():
        missing = [c for c in comps if c not in seen_vars]
        if missing:
            raise MetadataError(
                f"ratio {name!r} references unknown components {missing}"
            )
    for label in md.groups:
        if label not in labels:
            raise MetadataError(f"group assigned to unknown observation {label!r}")
    if md.focal is not None and md.focal not in labels:
        raise MetadataError(f"focal observation {md.focal!r} not in table")
    for group, label in md.representatives.items():
        if label not in labels:
            raise MetadataError(f"representative {label!r} of group {group!r} not in table")
        assigned = md.groups.get(label)
        if assigned is not None and assigned != group:
            raise MetadataError(
                f"representative {label!r} belongs to group {assigned!r}, not {group!r}"
            )

    variables = tuple(
        VariableMeta(
            name,
            kind=md.kinds.get(name, VarKind.PLAIN),
            components=md.components.get(name, ()),
        )
        for name in var_names
    )
    return ObservationTable(
        observations=tuple(labels),
        variables=variables,
        cells=tuple(cells),
        groups=dict(md.groups) or None,
        focal=md.focal,
        representatives=dict(md.representatives) or None,
    )


def format_table(t: ObservationTable) -> str:
    """Serialize to CSV; parse_table(format_table(t)) reproduces t."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["label", *t.variable_names()])
    for label, row in zip(t.observations, t.cells):
        writer.writerow([label, *(format_cell(c) for c in row)])
    return out.getvalue()


def format_metadata(t: ObservationTable) -> str:
    """Sidecar metadata as TOML; together with format_table this captures
    the whole table, so parsing both back reproduces it exactly."""
    esc = json.dumps  # valid TOML basic strings
    lines: list[str] = []
    for v in t.variables:
        if v.kind is VarKind.PLAIN:
            continue
        lines.append(f"[variables.{esc(v.name)}]")
        lines.append(f"kind = {esc(v.kind.value)}")
        if v.components:
            lines.append("components = [" + ", ".join(esc(c) for c in v.components) + "]")
        lines.append("")
    if t.groups:
        lines.append("[groups]")
        lines.extend(f"{esc(k)} = {esc(v)}" for k, v in t.groups.items())
        lines.append("")
    if t.focal is not None:
        lines.extend(["[focal]", f"label = {esc(t.focal)}", ""])
    if t.representatives:
        lines.append("[representatives]")
        lines.extend(f"{esc(k)} = {esc(v)}" for k, v in t.representatives.items())
        lines.append("")
    return "\n".join(lines)


def read_table(csv_path: str | Path, meta_path: str | Path | None = None) -> ObservationTable:
    """Load a table from disk, with optional sidecar metadata."""
    metadata = None
    if meta_path is not None:
        metadata = parse_metadata(Path(meta_path).read_text(encoding="utf-8"))
    text = Path(csv_path).read_text(encoding="utf-8-sig")
    return parse_table(text, metadata)


def write_table(t: ObservationTable, path: str | Path, meta_path: str | Path | None = None) -> None:
    Path(path).write_text(format_table(t), encoding="utf-8")
    if meta_path is not None:
        Path(meta_path).write_text(format_metadata(t), encoding="utf-8")


# --------------------------------------------------------------------------
# transforms


def resolve_intervals(t: ObservationTable) -> ObservationTable:
    """Replace every interval cell by its midpoint scalar. Idempotent."""

    def res(c: Cell) -> Cell:
        return Scalar((c.lo + c.hi) / 2.0) if isinstance(c, Interval) else c

    return replace(t, cells=tuple(tuple(res(c) for c in row) for row in t.cells))


def angles_to_radians(t: ObservationTable) -> ObservationTable:
    """Convert angle-degree columns to radians. Idempotent: converted
    columns are re-kinded so a second pass leaves them alone."""
    factor = math.pi / 180.0
    cols = {j for j, v in enumerate(t.variables) if v.kind is VarKind.ANGLE_DEGREES}
    if not cols:
        return t

    def conv(c: Cell) -> Cell:
        if isinstance(c, Scalar):
            return Scalar(c.value * factor)
        if isinstance(c, Interval):
            return Interval(c.lo * factor, c.hi * factor)
        return c

    variables = tuple(
        replace(v, kind=VarKind.ANGLE_RADIANS) if j in cols else v
        for j, v in enumerate(t.variables)
    )
    cells = tuple(
        tuple(conv(c) if j in cols else c for j, c in enumerate(row)) for row in t.cells
    )
    return replace(t, variables=variables, cells=cells)


VARIABLE_MODES = ("all", "drop_ratios", "drop_ratio_components")


def subset_variables(
    t: ObservationTable,
    mode: str = "all",
    keep: Iterable[str] | None = None,
) -> ObservationTable:
    """Drop columns by ratio handling mode, then intersect with ``keep``.

    ``drop_ratios`` removes ratio variables; ``drop_ratio_components``
    removes every variable named as a component of some ratio.
    """
    if mode not in VARIABLE_MODES:
        raise ValueError(f"unknown variable mode {mode!r}; expected one of {VARIABLE_MODES}")
    names = t.variable_names()
    if keep is not None:
        keep = tuple(keep)
        unknown = [k for k in keep if k not in names]
        if unknown:
            raise DataError(f"unknown variable name(s) in keep list: {unknown}")

    if mode == "drop_ratios":
        kept = [v for v in t.variables if v.kind is not VarKind.RATIO]
    elif mode == "drop_ratio_components":
        comps = {c for v in t.variables if v.kind is VarKind.RATIO for c in v.components}
        kept = [v for v in t.variables if v.name not in comps]
    else:
        kept = list(t.variables)
    if keep is not None:
        keep_set = set(keep)
        kept = [v for v in kept if v.name in keep_set]

    idx = [names.index(v.name) for v in kept]
    cells = tuple(tuple(row[j] for j in idx) for row in t.cells)
    return replace(t, variables=tuple(kept), cells=cells)


def missingness(t: ObservationTable) -> dict[str, Fraction]:
    """Per-observation fraction of missing cells, as exact rationals."""
    if t.n_variables == 0:
        raise DataError("missingness is undefined for a table with no variables")
    return {
        label: Fraction(sum(isinstance(c, Missing) for c in row), t.n_variables)
        for label, row in zip(t.observations, t.cells)
    }


def overall_missingness(t: ObservationTable) -> Fraction:
    """Fraction of missing cells over the whole table."""
    if t.n_variables == 0 or t.n_observations == 0:
        raise DataError("overall missingness is undefined for an empty table")
    total = sum(sum(isinstance(c, Missing) for c in row) for row in t.cells)
    return Fraction(total, t.n_observations * t.n_variables)


def filter_by_missingness(t: ObservationTable, threshold: float) -> ObservationTable:
    """Drop observations whose missingness is strictly above ``threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    frac = missingness(t)
    kept = [i for i, label in enumerate(t.observations) if frac[label] <= threshold]
    if not kept:
        raise DataError("missingness filter removed every observation")
    labels = tuple(t.observations[i] for i in kept)
    survivors = set(labels)
    groups = {k: v for k, v in (t.groups or {}).items() if k in survivors} or None
    reps = {g: l for g, l in (t.representatives or {}).items() if l in survivors} or None
    focal = t.focal if t.focal in survivors else None
    return ObservationTable(
        observations=labels,
        variables=t.variables,
        cells=tuple(t.cells[i] for i in kept),
        groups=groups,
        focal=focal,
        representatives=reps,
    )


# --------------------------------------------------------------------------
# resolved tables and normalization

TRANSFORM_RESOLVED = "intervals_resolved"
TRANSFORM_NORMALIZED = "normalized"
TRANSFORM_RADIANS = "radians"


@dataclass(frozen=True)
class ResolvedTable:
    """Interval-free table plus provenance of the transforms applied.

    ``degenerate_columns`` names columns that were centred but not scaled
    during normalization (zero variance or fewer than two observed values).
    """

    table: ObservationTable
    transforms: frozenset[str]
    degenerate_columns: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "transforms", frozenset(self.transforms))
        object.__setattr__(self, "degenerate_columns", tuple(self.degenerate_columns))
        for label, row in zip(self.table.observations, self.table.cells):
            for v, c in zip(self.table.variables, row):
                if isinstance(c, Interval):
                    raise DataError(
                        f"resolved table still has an interval at {label!r} / {v.name!r}"
                    )

    @property
    def normalized(self) -> bool:
        return TRANSFORM_NORMALIZED in self.transforms

    @property
    def observations(self) -> tuple[str, ...]:
        return self.table.observations

    @property
    def variables(self) -> tuple[VariableMeta, ...]:
        return self.table.variables

    def row_values(self, i: int) -> tuple[float | None, ...]:
        return self.table.row_values(i)


def _base_transforms(t: ObservationTable) -> set[str]:
    flags = {TRANSFORM_RESOLVED}
    if any(v.kind is VarKind.ANGLE_RADIANS for v in t.variables):
        flags.add(TRANSFORM_RADIANS)
    return flags


def as_resolved(t: ObservationTable) -> ResolvedTable:
    """Wrap an interval-free table without normalizing it."""
    return ResolvedTable(table=t, transforms=frozenset(_base_transforms(t)))


def normalize(t: ObservationTable) -> ResolvedTable:
    """Centre each column and divide by its sample standard deviation.

    Statistics use the non-missing entries only (n-1 denominator).
    Columns with zero variance or fewer than two observed values are
    centred but left unscaled, and flagged in the result's provenance.
    Intervals must already be resolved.
    """
    rows: list[list[float | None]] = [list(t.row_values(i)) for i in range(t.n_observations)]
    degenerate: list[str] = []
    for j, v in enumerate(t.variables):
        present = [row[j] for row in rows if row[j] is not None]
        if not present:
            degenerate.append(v.name)
            continue
        mean = statistics.fmean(present)
        sd = statistics.stdev(present) if len(present) >= 2 else 0.0
        if sd == 0.0:
            degenerate.append(v.name)
            for row in rows:
                if row[j] is not None:
                    row[j] = row[j] - mean
        else:
            for row in rows:
                if row[j] is not None:
                    row[j] = (row[j] - mean) / sd
    cells = tuple(
        tuple(MISSING if x is None else Scalar(x) for x in row) for row in rows
    )
    table = replace(t, cells=cells)
    transforms = _base_transforms(table) | {TRANSFORM_NORMALIZED}
    return ResolvedTable(
        table=table, transforms=frozenset(transforms), degenerate_columns=tuple(degenerate)
    )
