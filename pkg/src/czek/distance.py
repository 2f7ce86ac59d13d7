"""Distance functions and symmetric distance matrices over incomplete data.

Missing values are handled pairwise-complete: a distance between two
observations uses only the coordinates observed in both, and every
built-in averages over that shared coordinate count so values stay
comparable across pairs with different coverage.

Distance functions must be pure and symmetric.  compute_matrix evaluates
each unordered pair exactly once and mirrors the result, so the output
never depends on evaluation order.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dataset import ResolvedTable
from .errors import DataError, DisjointSupportError

Vector = Sequence["float | None"]


@dataclass(frozen=True)
class DistanceContext:
    """Extra inputs a distance function may consult.

    ``reference_a`` and ``reference_b`` are the measurement vectors of two
    fixed representative observations (one per group being contrasted).
    ``tie_tolerance`` widens the band in which a value counts as equally
    close to both references.
    """

    reference_a: tuple[float | None, ...] | None = None
    reference_b: tuple[float | None, ...] | None = None
    tie_tolerance: float = 0.0

    def __post_init__(self):
        if self.reference_a is not None:
            object.__setattr__(self, "reference_a", tuple(self.reference_a))
        if self.reference_b is not None:
            object.__setattr__(self, "reference_b", tuple(self.reference_b))
        if self.tie_tolerance < 0:
            raise ValueError("tie_tolerance must be nonnegative")


EMPTY_CONTEXT = DistanceContext()


def dd_distance(x: Vector, y: Vector, ctx: DistanceContext = EMPTY_CONTEXT) -> float:
    """Mean absolute coordinate difference over commonly observed indices."""
    total = 0.0
    used = 0
    for a, b in zip(x, y, strict=True):
        if a is None or b is None:
            continue
        total += abs(a - b)
        used += 1
    if used == 0:
        raise DisjointSupportError("no commonly observed variable")
    return total / used


def sq_euclidean(x: Vector, y: Vector, ctx: DistanceContext = EMPTY_CONTEXT) -> float:
    """Mean squared coordinate difference over commonly observed indices.

    Note this is the squared Euclidean distance divided by the shared
    coordinate count, not the raw sum, for comparability across pairs
    with different coverage.
    """
    total = 0.0
    used = 0
    for a, b in zip(x, y, strict=True):
        if a is None or b is None:
            continue
        total += (a - b) ** 2
        used += 1
    if used == 0:
        raise DisjointSupportError("no commonly observed variable")
    return total / used


def _closeness_code(z: float, r1: float, r2: float, tol: float) -> int:
    d1 = abs(z - r1)
    d2 = abs(z - r2)
    if d1 < d2 - tol:
        return -1
    if d1 > d2 + tol:
        return 1
    return 0


def stolyhwo_distance(x: Vector, y: Vector, ctx: DistanceContext = EMPTY_CONTEXT) -> float:
    """Reference-pair coding distance, in [0, 1].

    Each coordinate of an observation is coded -1, 0 or +1 by whether it
    lies closer to the first reference, equally close (within the tie
    tolerance) or closer to the second.  The distance between two
    observations is the mean absolute code difference, halved, so opposite
    codes contribute 1 and a code against in-between contributes 1/2.

    Coordinates are used only where both observations and both references
    are observed.  The exact coding rules of the historical table this
    mimics are not documented anywhere; this is a reconstruction from its
    prose description.
    """
    v1, v2 = ctx.reference_a, ctx.reference_b
    if v1 is None or v2 is None:
        raise DataError("reference-pair distance requires both reference vectors")
    tol = ctx.tie_tolerance
    total = 0
    used = 0
    for a, b, r1, r2 in zip(x, y, v1, v2, strict=True):
        if a is None or b is None or r1 is None or r2 is None:
            continue
        total += abs(_closeness_code(a, r1, r2, tol) - _closeness_code(b, r1, r2, tol))
        used += 1
    if used == 0:
        raise DisjointSupportError("no commonly observed variable (references included)")
    return total / (2.0 * used)


# --------------------------------------------------------------------------
# registry


@dataclass(frozen=True)
class DistanceFunction:
    """A named, registrable distance.

    ``requires_normalization_off`` marks distances whose semantics break
    on standardized columns (the reference-pair coding works on raw
    measurements only).
    """

    name: str
    func: Callable[[Vector, Vector, DistanceContext], float]
    requires_normalization_off: bool = False

    def __call__(self, x: Vector, y: Vector, ctx: DistanceContext = EMPTY_CONTEXT) -> float:
        return self.func(x, y, ctx)


DD = DistanceFunction("dd", dd_distance)
SQ_EUCLIDEAN = DistanceFunction("sq_euclidean", sq_euclidean)
STOLYHWO = DistanceFunction("stolyhwo", stolyhwo_distance, requires_normalization_off=True)


class DistanceRegistry:
    """Name-to-function registry; built-ins are pre-registered."""

    def __init__(self, include_builtins: bool = True):
        self._functions: dict[str, DistanceFunction] = {}
        if include_builtins:
            for f in (DD, SQ_EUCLIDEAN, STOLYHWO):
                self.register(f)

    def register(self, f: DistanceFunction) -> DistanceFunction:
        if f.name in self._functions:
            raise ValueError(f"distance {f.name!r} is already registered")
        self._functions[f.name] = f
        return f

    def get(self, name: str) -> DistanceFunction:
        try:
            return self._functions[name]
        except KeyError:
            raise DataError(
                f"unknown distance {name!r}; available: {', '.join(self.names())}"
            ) from None

    def names(self) -> tuple[str, ...]:
        return tuple(self._functions)


DEFAULT_REGISTRY = DistanceRegistry()


def register_distance(f: DistanceFunction) -> DistanceFunction:
    """Register in the default registry used by the CLI and grid runner."""
    return DEFAULT_REGISTRY.register(f)


def get_distance(name: str) -> DistanceFunction:
    return DEFAULT_REGISTRY.get(name)


def distance_names() -> tuple[str, ...]:
    return DEFAULT_REGISTRY.names()


# --------------------------------------------------------------------------
# matrices


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric nonnegative matrix with zero diagonal, indexed by labels.

    ``pair_counts[i, j]`` records how many coordinates were observed in
    both observations i and j (the diagonal holds the variable count).
    """

    labels: tuple[str, ...]
    values: np.ndarray
    distance_name: str = ""
    pair_counts: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        values = np.asarray(self.values, dtype=float)
        n = len(self.labels)
        if values.shape != (n, n):
            raise DataError(f"matrix shape {values.shape} does not match {n} labels")
        if len(set(self.labels)) != n:
            raise DataError("duplicate labels in distance matrix")
        if not np.isfinite(values).all():
            raise DataError("distance matrix has non-finite entries")
        if (values < 0).any():
            raise DataError("distance matrix has negative entries")
        if np.diagonal(values).any():
            raise DataError("distance matrix diagonal must be zero")
        if not np.array_equal(values, values.T):
            raise DataError("distance matrix must be symmetric")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        if self.pair_counts is not None:
            counts = np.asarray(self.pair_counts, dtype=int).copy()
            if counts.shape != (n, n):
                raise DataError("pair_counts shape does not match labels")
            counts.flags.writeable = False
            object.__setattr__(self, "pair_counts", counts)

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DataError(f"unknown label {label!r}") from None

    def reordered(self, order: Sequence[int]) -> "DistanceMatrix":
        idx = list(order)
        return DistanceMatrix(
            labels=tuple(self.labels[i] for i in idx),
            values=self.values[np.ix_(idx, idx)],
            distance_name=self.distance_name,
            pair_counts=None if self.pair_counts is None else self.pair_counts[np.ix_(idx, idx)],
        )


def compute_matrix(
    t: ResolvedTable,
    f: DistanceFunction,
    ctx: DistanceContext = EMPTY_CONTEXT,
) -> DistanceMatrix:
    """Evaluate ``f`` on every unordered pair of observations.

    Each pair is evaluated once and mirrored, so the result is identical
    no matter how pairs would be scheduled.  A pair with no commonly
    observed variable aborts the computation, naming the pair.
    """
    labels = t.observations
    n = len(labels)
    if n < 2:
        raise DataError("distance matrix needs at least two observations")
    if f.requires_normalization_off and t.normalized:
        raise DataError(
            f"distance {f.name!r} works on raw measurements; disable normalization"
        )
    vectors = [t.row_values(i) for i in range(n)]
    values = np.zeros((n, n))
    counts = np.zeros((n, n), dtype=int)
    np.fill_diagonal(counts, len(t.variables))
    for i in range(n):
        for j in range(i + 1, n):
            try:
                d = float(f(vectors[i], vectors[j], ctx))
            except DisjointSupportError as e:
                raise DisjointSupportError(
                    f"pair ({labels[i]!r}, {labels[j]!r}): {e}"
                ) from None
            if not np.isfinite(d) or d < 0:
                raise DataError(
                    f"distance {f.name!r} returned {d!r} for pair ({labels[i]!r}, {labels[j]!r})"
                )
            values[i, j] = values[j, i] = d
            shared = sum(
                a is not None and b is not None for a, b in zip(vectors[i], vectors[j])
            )
            counts[i, j] = counts[j, i] = shared
    return DistanceMatrix(
        labels=labels, values=values, distance_name=f.name, pair_counts=counts
    )


# --------------------------------------------------------------------------
# CSV interchange


def format_matrix(m: DistanceMatrix) -> str:
    """Full square matrix as CSV.  The corner cell carries the distance
    name so the interchange round-trips it (plain "label" when unnamed)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow([m.distance_name or "label", *m.labels])
    for label, row in zip(m.labels, m.values):
        writer.writerow([label, *(repr(float(v)) for v in row)])
    return out.getvalue()


def parse_matrix(text: str) -> DistanceMatrix:
    rows = [row for row in csv.reader(io.StringIO(text)) if row]
    if not rows:
        raise DataError("empty matrix file")
    corner = rows[0][0].strip()
    distance_name = "" if corner in ("", "label") else corner
    labels = tuple(h.strip() for h in rows[0][1:])
    n = len(labels)
    if len(rows) != n + 1:
        raise DataError(f"matrix file has {len(rows) - 1} rows for {n} columns")
    values = np.zeros((n, n))
    for i, row in enumerate(rows[1:]):
        if len(row) != n + 1:
            raise DataError(f"matrix row {i + 2} has {len(row)} fields, expected {n + 1}")
        if row[0].strip() != labels[i]:
            raise DataError(
                f"matrix row label {row[0].strip()!r} does not match column {labels[i]!r}"
            )
        try:
            values[i] = [float(v) for v in row[1:]]
        except ValueError as e:
            raise DataError(f"matrix row {i + 2}: {e}") from None
    return DistanceMatrix(labels=labels, values=values, distance_name=distance_name)


def read_matrix(path: str | Path) -> DistanceMatrix:
    return parse_matrix(Path(path).read_text(encoding="utf-8-sig"))


def write_matrix(m: DistanceMatrix, path: str | Path) -> None:
    Path(path).write_text(format_matrix(m), encoding="utf-8")


# --------------------------------------------------------------------------
# matrix comparison


@dataclass(frozen=True)
class MatrixComparison:
    """Cellwise relative differences of a candidate against a reference."""

    n_cells: int
    bin_edges: tuple[float, ...]
    histogram: tuple[int, ...]
    fraction_below: float
    threshold: float
    worst: tuple[tuple[str, str, float], ...]
    excluded: tuple[tuple[str, str], ...]

    def lines(self) -> list[str]:
        out = [f"cells compared: {self.n_cells}"]
        lo = 0.0
        for edge, count in zip(self.bin_edges, self.histogram):
            out.append(f"  [{lo * 100:5.1f}%, {edge * 100:5.1f}%): {count}")
            lo = edge
        out.append(f"  [{lo * 100:5.1f}%,   inf): {self.histogram[-1]}")
        out.append(
            f"cells below {self.threshold * 100:.0f}% relative difference:"
            f" {self.fraction_below * 100:.1f}%"
        )
        if self.excluded:
            pairs = ", ".join(f"{a} / {b}" for a, b in self.excluded)
            out.append(f"excluded pairs: {pairs}")
        if self.worst:
            out.append("largest differences:")
            for a, b, d in self.worst:
                out.append(f"  {a} / {b}: {d * 100:.2f}%")
        return out


def compare_matrices(
    candidate: DistanceMatrix,
    reference: DistanceMatrix,
    exclude: Sequence[tuple[str, str]] = (),
    threshold: float = 0.04,
    bin_edges: tuple[float, ...] = (0.01, 0.02, 0.04, 0.08),
) -> MatrixComparison:
    """Compare off-diagonal cells of two matrices over the same labels.

    The relative difference of a pair is |candidate - reference| divided
    by the reference value (a zero reference with nonzero candidate counts
    as the top bin).  ``exclude`` removes known-bad cells from the tally.
    """
    if set(candidate.labels) != set(reference.labels):
        raise DataError("matrices are over different label sets")
    order = [candidate.index(lbl) for lbl in reference.labels]
    cand = candidate.values[np.ix_(order, order)]
    ref = reference.values
    skip = {frozenset(p) for p in exclude}
    for p in skip:
        for lbl in p:
            if lbl not in reference.labels:
                raise DataError(f"excluded pair names unknown label {lbl!r}")

    n = reference.n
    diffs: list[tuple[str, str, float]] = []
    excluded: list[tuple[str, str]] = []
    for i in range(n):
        for j in range(i + 1, n):
            a, b = reference.labels[i], reference.labels[j]
            if frozenset((a, b)) in skip:
                excluded.append((a, b))
                continue
            if ref[i, j] == 0.0:
                rel = 0.0 if cand[i, j] == 0.0 else float("inf")
            else:
                rel = abs(cand[i, j] - ref[i, j]) / ref[i, j]
            diffs.append((a, b, rel))
    if not diffs:
        raise DataError("no cells left to compare")

    hist = [0] * (len(bin_edges) + 1)
    for _, _, rel in diffs:
        for k, edge in enumerate(bin_edges):
            if rel < edge:
                hist[k] += 1
                break
        else:
            hist[-1] += 1
    below = sum(rel < threshold for _, _, rel in diffs) / len(diffs)
    worst = tuple(sorted(diffs, key=lambda d: -d[2])[:5])
    return MatrixComparison(
        n_cells=len(diffs),
        bin_edges=tuple(bin_edges),
        histogram=tuple(hist),
        fraction_below=below,
        threshold=threshold,
        worst=worst,
        excluded=tuple(excluded),
    )
