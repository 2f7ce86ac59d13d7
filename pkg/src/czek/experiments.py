"""Cartesian grids of analysis setups over the full pipeline.

A setup fixes the distance, variable handling, angle unit, missingness
filter, normalization and seriation seed.  Each setup runs the pipeline

    subset -> angle convert -> resolve intervals -> missingness filter
           -> (normalize?) -> distance matrix -> seriation
           -> focal placement classification

and the runner collects one report per setup.  A setup that fails records
its error instead of aborting the grid.  Reports are a pure function of
(table, setup), so rerunning a grid reproduces them bit for bit.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Mapping, Sequence

from . import dataset
from .dataset import ObservationTable
from .diagram import DEFAULT_PROBS, classify, quantile_breaks, render_svg, render_text
from .distance import (
    DEFAULT_REGISTRY,
    DistanceContext,
    DistanceRegistry,
    compute_matrix,
    format_matrix,
)
from .errors import CzekError, DataError, GridConfigError
from .seriation import seriate

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib  # type: ignore[no-redef]


ANGLE_UNITS = ("degrees", "radians")

CATEGORIES = (
    "interior_own_group",
    "boundary",
    "singleton",
    "grouped_with_other",
    "interior_other_group",
    "mixed",
)


@dataclass(frozen=True)
class SetupSpec:
    """One cell of the experiment grid."""

    distance: str
    variable_mode: str = "all"
    variable_set: str = "full"
    angle_unit: str = "degrees"
    missingness_filter: float | None = None
    normalize: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.variable_mode not in dataset.VARIABLE_MODES:
            raise ValueError(f"unknown variable mode {self.variable_mode!r}")
        if self.angle_unit not in ANGLE_UNITS:
            raise ValueError(f"unknown angle unit {self.angle_unit!r}")
        if self.missingness_filter is not None and not 0.0 <= self.missingness_filter <= 1.0:
            raise ValueError(f"missingness filter must be in [0, 1]: {self.missingness_filter}")

    def canonical_encoding(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_encoding().encode()).hexdigest()[:12]


@dataclass(frozen=True)
class SetupAxes:
    """Axis values whose cartesian product forms the grid.

    ``keep_lists`` holds named variable subsets referenced by the
    ``variable_sets`` axis; the name ``full`` is reserved for using every
    column.
    """

    distances: tuple[str, ...]
    variable_modes: tuple[str, ...] = ("all",)
    variable_sets: tuple[str, ...] = ("full",)
    angle_units: tuple[str, ...] = ("degrees",)
    missingness_filters: tuple[float | None, ...] = (None,)
    normalize: tuple[bool, ...] = (False,)
    seed: int = 0
    keep_lists: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "keep_lists", dict(self.keep_lists))
        for name in (
            "distances", "variable_modes", "variable_sets", "angle_units",
            "missingness_filters", "normalize",
        ):
            axis = tuple(getattr(self, name))
            object.__setattr__(self, name, axis)
            if not axis:
                raise GridConfigError(f"axis {name} is empty")
            if len(set(axis)) != len(axis):
                raise GridConfigError(f"axis {name} has duplicate entries")
        for name in self.variable_sets:
            if name != "full" and name not in self.keep_lists:
                raise GridConfigError(f"variable set {name!r} has no keep list")


@dataclass(frozen=True)
class GridExpansion:
    setups: tuple[SetupSpec, ...]
    pruned: tuple[tuple[SetupSpec, str], ...]

    @property
    def full_size(self) -> int:
        return len(self.setups) + len(self.pruned)


def expand_grid(axes: SetupAxes, registry: DistanceRegistry = DEFAULT_REGISTRY) -> GridExpansion:
    """Enumerate the cartesian product in deterministic axis order.

    Two kinds of combinations are pruned, each with a recorded reason:
    distances that require raw measurements paired with normalize=true,
    and the radians variant of normalized setups when a degrees variant
    exists (standardization divides out any linear unit change, so those
    two setups would produce identical matrices).
    """
    setups: list[SetupSpec] = []
    pruned: list[tuple[SetupSpec, str]] = []
    both_units = len(axes.angle_units) > 1
    for dist, mode, vset, unit, mfilter, norm in itertools.product(
        axes.distances, axes.variable_modes, axes.variable_sets,
        axes.angle_units, axes.missingness_filters, axes.normalize,
    ):
        f = registry.get(dist)
        spec = SetupSpec(
            distance=dist, variable_mode=mode, variable_set=vset, angle_unit=unit,
            missingness_filter=mfilter, normalize=norm, seed=axes.seed,
        )
        if norm and f.requires_normalization_off:
            pruned.append((spec, f"distance {dist!r} requires unnormalized variables"))
        elif norm and unit == "radians" and both_units:
            pruned.append(
                (spec, "angle unit has no effect after normalization; degrees variant kept")
            )
        else:
            setups.append(spec)
    return GridExpansion(setups=tuple(setups), pruned=tuple(pruned))


# --------------------------------------------------------------------------
# placement classification


@dataclass(frozen=True)
class NeighborContext:
    """Raw surroundings of the focal observation, for re-adjudication.

    ``labels`` and ``groups`` cover seriation positions focal-2 .. focal+2
    (None where the sequence ends); ``run_length`` is the size of the
    maximal contiguous own-group run containing the focal observation.
    """

    labels: tuple[str | None, ...]
    groups: tuple[str | None, ...]
    run_length: int


def classify_placement(
    order: Sequence[str],
    groups: Mapping[str, str],
    focal: str,
) -> str:
    """Classify where the focal observation sits relative to its group.

    With ``own`` the focal's group and ``run`` the maximal contiguous
    own-group block containing it, the rules are applied in order:

    1. mixed, when a position flanking the run exists but has no group
       label (the surroundings cannot be judged);
    2. run of length 1 walled in by other-group members on both sides:
       interior_other_group when every existing position within distance
       two is other-group and both immediate neighbors exist, singleton
       otherwise;
    3. run of length at most 3 walled in on both sides (the focal sits in
       a small island, at most two companions, inside foreign territory):
       grouped_with_other;
    4. every existing immediate neighbor own-group: interior_own_group;
    5. one neighbor own-group, one other-group: boundary.

    Positions at either end of the arrangement are judged by their single
    existing neighbor.  The rules are symmetric under reversal of the
    arrangement.  They are this library's own reconstruction of placement
    categories that historically were assigned by eye, which is why the
    raw neighbor context is always reported alongside the category.
    """
    order = list(order)
    if focal not in order:
        raise DataError(f"focal observation {focal!r} is not in the arrangement")
    own = groups.get(focal)
    if own is None:
        raise DataError(f"focal observation {focal!r} has no group")
    if len(set(groups.values())) < 2:
        raise DataError("placement classification needs at least two groups")

    n = len(order)
    f = order.index(focal)

    def exists(k: int) -> bool:
        return 0 <= k < n

    def grp(k: int) -> str | None:
        return groups.get(order[k]) if exists(k) else None

    lo = f
    while lo > 0 and grp(lo - 1) == own:
        lo -= 1
    hi = f
    while hi < n - 1 and grp(hi + 1) == own:
        hi += 1
    run_len = hi - lo + 1

    # run flanks: None means the arrangement simply ends there
    if (exists(lo - 1) and grp(lo - 1) is None) or (exists(hi + 1) and grp(hi + 1) is None):
        return "mixed"
    island = exists(lo - 1) and exists(hi + 1)  # other-group on both sides

    neighbors = [grp(k) for k in (f - 1, f + 1) if exists(k)]
    if not neighbors:
        return "mixed"
    if all(g is not None and g != own for g in neighbors):
        # run_len == 1 here: any own-group neighbor would extend the run
        window = [grp(k) for k in (f - 2, f - 1, f + 1, f + 2) if exists(k)]
        deep = (
            exists(f - 1)
            and exists(f + 1)
            and all(g is not None and g != own for g in window)
        )
        return "interior_other_group" if deep else "singleton"
    if island and run_len <= 3:
        return "grouped_with_other"
    if all(g == own for g in neighbors):
        return "interior_own_group"
    return "boundary"


def neighbor_context(
    order: Sequence[str],
    groups: Mapping[str, str],
    focal: str,
) -> NeighborContext:
    order = list(order)
    own = groups.get(focal)
    n = len(order)
    f = order.index(focal)
    window = range(f - 2, f + 3)
    labels = tuple(order[k] if 0 <= k < n else None for k in window)
    grps = tuple(groups.get(order[k]) if 0 <= k < n else None for k in window)
    lo = f
    while lo > 0 and groups.get(order[lo - 1]) == own:
        lo -= 1
    hi = f
    while hi < n - 1 and groups.get(order[hi + 1]) == own:
        hi += 1
    return NeighborContext(labels=labels, groups=grps, run_length=hi - lo + 1)


# --------------------------------------------------------------------------
# running setups


@dataclass(frozen=True)
class PlacementReport:
    """Outcome of one setup: arrangement, objective and focal placement."""

    setup_id: str
    setup_hash: str
    spec: SetupSpec
    focal: str | None = None
    category: str | None = None
    order_labels: tuple[str, ...] | None = None
    objective: float | None = None
    n_observations: int | None = None
    context: NeighborContext | None = None
    error: str | None = None


def _build_context(rt: dataset.ResolvedTable, tie_tolerance: float = 0.0) -> DistanceContext:
    """Reference vectors from the representative observations, when the
    table names exactly two and both survived preprocessing."""
    reps = rt.table.representatives or {}
    if len(reps) != 2:
        return DistanceContext(tie_tolerance=tie_tolerance)
    labels = [reps[g] for g in sorted(reps)]
    rows = [rt.row_values(rt.table.observation_index(lbl)) for lbl in labels]
    return DistanceContext(
        reference_a=rows[0], reference_b=rows[1], tie_tolerance=tie_tolerance
    )


def run_setup(
    table: ObservationTable,
    spec: SetupSpec,
    setup_id: str = "setup-001",
    registry: DistanceRegistry = DEFAULT_REGISTRY,
    keep_lists: Mapping[str, Sequence[str]] | None = None,
    out_dir: str | Path | None = None,
    probs: Sequence[float] = DEFAULT_PROBS,
    tie_tolerance: float = 0.0,
) -> PlacementReport:
    """Run the full pipeline for one setup.

    Artifacts (matrix.csv, diagram.txt, diagram.svg) are written under
    ``out_dir`` when given.  Any pipeline error is captured in the report
    instead of propagating.
    """
    digest = spec.digest()
    try:
        f = registry.get(spec.distance)
        keep = None
        if spec.variable_set != "full":
            if not keep_lists or spec.variable_set not in keep_lists:
                raise GridConfigError(f"variable set {spec.variable_set!r} has no keep list")
            keep = keep_lists[spec.variable_set]
        t = dataset.subset_variables(table, spec.variable_mode, keep)
        if spec.angle_unit == "radians":
            t = dataset.angles_to_radians(t)
        t = dataset.resolve_intervals(t)
        if spec.missingness_filter is not None:
            t = dataset.filter_by_missingness(t, spec.missingness_filter)
        rt = dataset.normalize(t) if spec.normalize else dataset.as_resolved(t)
        ctx = _build_context(rt, tie_tolerance)
        m = compute_matrix(rt, f, ctx)
        result = seriate(m, method="auto", seed=spec.seed)
        order_labels = result.permutation.apply_to(m.labels)

        if table.focal is None:
            raise DataError("table declares no focal observation")
        category = classify_placement(order_labels, table.groups or {}, table.focal)
        context = neighbor_context(order_labels, table.groups or {}, table.focal)

        if out_dir is not None:
            subdir = Path(out_dir) / digest
            subdir.mkdir(parents=True, exist_ok=True)
            (subdir / "matrix.csv").write_text(format_matrix(m), encoding="utf-8")
            d = classify(
                m, result.permutation, quantile_breaks(m, probs),
                method=result.method, objective=result.objective,
            )
            (subdir / "diagram.txt").write_text(render_text(d), encoding="utf-8")
            (subdir / "diagram.svg").write_text(render_svg(d), encoding="utf-8")

        return PlacementReport(
            setup_id=setup_id,
            setup_hash=digest,
            spec=spec,
            focal=table.focal,
            category=category,
            order_labels=order_labels,
            objective=result.objective,
            n_observations=m.n,
            context=context,
        )
    except CzekError as e:
        return PlacementReport(
            setup_id=setup_id, setup_hash=digest, spec=spec, focal=table.focal,
            error=str(e),
        )


def run_grid(
    table: ObservationTable,
    axes: SetupAxes,
    registry: DistanceRegistry = DEFAULT_REGISTRY,
    out_dir: str | Path | None = None,
    workers: int = 1,
    probs: Sequence[float] = DEFAULT_PROBS,
) -> tuple[GridExpansion, list[PlacementReport]]:
    """Expand and run a grid; report order follows expansion order
    regardless of completion order."""
    expansion = expand_grid(axes, registry)

    def job(item: tuple[int, SetupSpec]) -> PlacementReport:
        i, spec = item
        return run_setup(
            table, spec, setup_id=f"setup-{i + 1:03d}", registry=registry,
            keep_lists=axes.keep_lists, out_dir=out_dir, probs=probs,
        )

    items = list(enumerate(expansion.setups))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(job, items))
    else:
        reports = [job(item) for item in items]
    return expansion, reports


# --------------------------------------------------------------------------
# reporting


_CSV_COLUMNS = (
    "setup_id", "setup_hash", "distance", "variable_mode", "variable_set",
    "angle_unit", "missingness_filter", "normalize", "seed", "n_observations",
    "objective", "category", "focal", "run_length", "left_label", "left_group",
    "right_label", "right_group", "order", "error",
)


def _report_row(r: PlacementReport) -> dict[str, str]:
    ctx = r.context
    return {
        "setup_id": r.setup_id,
        "setup_hash": r.setup_hash,
        "distance": r.spec.distance,
        "variable_mode": r.spec.variable_mode,
        "variable_set": r.spec.variable_set,
        "angle_unit": r.spec.angle_unit,
        "missingness_filter": "" if r.spec.missingness_filter is None else repr(r.spec.missingness_filter),
        "normalize": str(r.spec.normalize).lower(),
        "seed": str(r.spec.seed),
        "n_observations": "" if r.n_observations is None else str(r.n_observations),
        "objective": "" if r.objective is None else repr(r.objective),
        "category": r.category or "",
        "focal": r.focal or "",
        "run_length": "" if ctx is None else str(ctx.run_length),
        "left_label": (ctx.labels[1] or "") if ctx else "",
        "left_group": (ctx.groups[1] or "") if ctx else "",
        "right_label": (ctx.labels[3] or "") if ctx else "",
        "right_group": (ctx.groups[3] or "") if ctx else "",
        "order": "|".join(r.order_labels) if r.order_labels else "",
        "error": r.error or "",
    }


def summarize(reports: Sequence[PlacementReport]) -> dict:
    by_category = {c: 0 for c in CATEGORIES}
    errors = 0
    for r in reports:
        if r.error is not None:
            errors += 1
        elif r.category is not None:
            by_category[r.category] += 1
    classified = sum(by_category.values())
    return {
        "total": len(reports),
        "classified": classified,
        "errors": errors,
        "by_category": by_category,
        "focal_not_interior_own_group": classified - by_category["interior_own_group"],
    }


def emit_report(reports: Sequence[PlacementReport], format: str = "csv") -> str:
    """Consolidated grid report: plain CSV rows, or JSON with a summary."""
    if format == "csv":
        out = io.StringIO()
        writer = csv.DictWriter(out, fieldnames=_CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in reports:
            writer.writerow(_report_row(r))
        return out.getvalue()
    if format == "json":
        doc = {
            "setups": [
                {
                    **_report_row(r),
                    "objective": r.objective,
                    "missingness_filter": r.spec.missingness_filter,
                    "normalize": r.spec.normalize,
                    "seed": r.spec.seed,
                    "n_observations": r.n_observations,
                    "order": list(r.order_labels) if r.order_labels else None,
                    "context": None if r.context is None else {
                        "labels": list(r.context.labels),
                        "groups": list(r.context.groups),
                        "run_length": r.context.run_length,
                    },
                    "category": r.category,
                    "error": r.error,
                }
                for r in reports
            ],
            "summary": summarize(reports),
        }
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    raise ValueError(f"unknown report format {format!r}; expected csv or json")


# --------------------------------------------------------------------------
# grid config files


def parse_grid_config(text: str) -> SetupAxes:
    """Parse a grid config (TOML): an [axes] table, an optional
    [keep_lists] table of named variable subsets, and a top-level seed."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise GridConfigError(f"grid config is not valid TOML: {e}") from None
    unknown = set(doc) - {"axes", "keep_lists", "seed"}
    if unknown:
        raise GridConfigError(f"unknown grid config keys: {sorted(unknown)}")
    axes_doc = doc.get("axes")
    if not isinstance(axes_doc, dict):
        raise GridConfigError("grid config needs an [axes] table")
    known_axes = {
        "distances", "variable_modes", "variable_sets", "angle_units",
        "missingness_filters", "normalize",
    }
    unknown = set(axes_doc) - known_axes
    if unknown:
        raise GridConfigError(f"unknown axes: {sorted(unknown)}")
    if "distances" not in axes_doc:
        raise GridConfigError("[axes] must list distances")

    def listify(key: str, default: list) -> list:
        val = axes_doc.get(key, default)
        if not isinstance(val, list):
            raise GridConfigError(f"[axes].{key} must be a list")
        return val

    filters: list[float | None] = []
    for v in listify("missingness_filters", [None]):
        if v is None or (isinstance(v, str) and v.lower() == "none"):
            filters.append(None)
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            filters.append(float(v))
        else:
            raise GridConfigError(f"bad missingness filter {v!r}: number or \"none\"")

    keep_lists = {}
    for name, names in doc.get("keep_lists", {}).items():
        if not (isinstance(names, list) and all(isinstance(x, str) for x in names)):
            raise GridConfigError(f"[keep_lists].{name} must be a list of variable names")
        keep_lists[name] = tuple(names)

    seed = doc.get("seed", 0)
    if not isinstance(seed, int):
        raise GridConfigError("seed must be an integer")

    return SetupAxes(
        distances=tuple(listify("distances", [])),
        variable_modes=tuple(listify("variable_modes", ["all"])),
        variable_sets=tuple(listify("variable_sets", ["full"])),
        angle_units=tuple(listify("angle_units", ["degrees"])),
        missingness_filters=tuple(filters),
        normalize=tuple(listify("normalize", [False])),
        seed=seed,
        keep_lists=keep_lists,
    )


def read_grid_config(path: str | Path) -> SetupAxes:
    return parse_grid_config(Path(path).read_text(encoding="utf-8"))
