"""Symbol-class binning and monochrome rendering of seriated matrices.

Distances are grouped into k ordered classes by k-1 strictly increasing
breakpoints; class 0 (the smallest distances) draws the largest symbol.
A value's class is the count of breakpoints strictly below it, so a value
exactly on a breakpoint falls in the lower, larger-symbol class.

Both renderers are pure functions of the diagram and style: equal inputs
produce byte-identical output.
"""

from __future__ import annotations

import bisect
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distance import DistanceMatrix
from .errors import DataError
from .seriation import Permutation

DEFAULT_PROBS = (0.25, 0.5, 0.75)

# largest symbol first; the blank draws nothing
_DEFAULT_GLYPHS = {
    1: ("@",),
    2: ("@", " "),
    3: ("@", "o", " "),
    4: ("@", "o", ".", " "),
    5: ("@", "O", "o", ".", " "),
}


def default_glyphs(k: int) -> tuple[str, ...]:
    try:
        return _DEFAULT_GLYPHS[k]
    except KeyError:
        raise ValueError(
            f"no default glyph set for {k} classes; supply a custom one (1..5 supported)"
        ) from None


@dataclass(frozen=True)
class SymbolClassification:
    """Breakpoints and the glyph drawn for each resulting class."""

    breakpoints: tuple[float, ...]
    glyphs: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "glyphs", tuple(self.glyphs))
        if any(b >= c for b, c in zip(self.breakpoints, self.breakpoints[1:])):
            raise ValueError(f"breakpoints must be strictly increasing: {self.breakpoints}")
        if len(self.glyphs) != len(self.breakpoints) + 1:
            raise ValueError(
                f"{len(self.breakpoints)} breakpoints need {len(self.breakpoints) + 1} glyphs,"
                f" got {len(self.glyphs)}"
            )
        if any(len(g) != 1 for g in self.glyphs):
            raise ValueError("each glyph must be a single character")

    @property
    def n_classes(self) -> int:
        return len(self.glyphs)

    def class_of(self, value: float) -> int:
        """Count of breakpoints strictly below the value."""
        return bisect.bisect_left(self.breakpoints, value)

    @classmethod
    def with_default_glyphs(cls, breakpoints: Sequence[float]) -> "SymbolClassification":
        bp = tuple(breakpoints)
        return cls(bp, default_glyphs(len(bp) + 1))


def quantile_breaks(
    m: DistanceMatrix,
    probs: Sequence[float] = DEFAULT_PROBS,
    glyphs: Sequence[str] | None = None,
) -> SymbolClassification:
    """Classification with breakpoints at empirical quantiles of the
    off-diagonal distances (linear interpolation).

    Duplicate quantiles collapse into fewer classes with a warning; a
    matrix whose off-diagonal values are all equal collapses to a single
    class.
    """
    probs = tuple(probs)
    if not probs or any(not 0.0 < p < 1.0 for p in probs):
        raise ValueError(f"probs must lie strictly inside (0, 1): {probs}")
    if any(p >= q for p, q in zip(probs, probs[1:])):
        raise ValueError(f"probs must be strictly increasing: {probs}")
    values = m.values[np.triu_indices(m.n, k=1)]
    if values.size == 0:
        raise DataError("need at least one off-diagonal entry to classify")

    if np.all(values == values[0]):
        warnings.warn("all off-diagonal distances are equal; single-class diagram")
        breakpoints: tuple[float, ...] = ()
    else:
        raw = [float(q) for q in np.quantile(values, probs)]
        breakpoints = tuple(sorted(set(raw)))
        if len(breakpoints) < len(raw):
            warnings.warn(
                f"duplicate quantiles collapsed {len(raw) + 1} classes into {len(breakpoints) + 1}"
            )
    if glyphs is None:
        return SymbolClassification.with_default_glyphs(breakpoints)
    return SymbolClassification(breakpoints, tuple(glyphs)[: len(breakpoints) + 1])


@dataclass(frozen=True)
class Diagram:
    """Seriated class matrix ready for rendering."""

    labels: tuple[str, ...]
    classes: tuple[tuple[int, ...], ...]
    classification: SymbolClassification
    distance_name: str = ""
    method: str = ""
    objective: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "classes", tuple(tuple(row) for row in self.classes))
        n = len(self.labels)
        if len(self.classes) != n or any(len(row) != n for row in self.classes):
            raise ValueError("class matrix does not match label count")
        k = self.classification.n_classes
        for i, row in enumerate(self.classes):
            if row[i] != 0:
                raise ValueError("diagonal must be class 0")
            for j, c in enumerate(row):
                if not 0 <= c < k:
                    raise ValueError(f"class {c} out of range at ({i}, {j})")
                if c != self.classes[j][i]:
                    raise ValueError("class matrix must be symmetric")

    @property
    def n(self) -> int:
        return len(self.labels)


def classify(
    m: DistanceMatrix,
    p: Permutation,
    c: SymbolClassification,
    method: str = "",
    objective: float | None = None,
) -> Diagram:
    """Bin the permuted matrix into symbol classes.

    The diagonal is forced to class 0: a self-distance of zero belongs in
    the largest-symbol class even under a degenerate classification.
    """
    if len(p) != m.n:
        raise ValueError(f"permutation of size {len(p)} for a matrix of size {m.n}")
    order = p.order
    classes = tuple(
        tuple(
            0 if i == j else c.class_of(float(m.values[order[i], order[j]]))
            for j in range(m.n)
        )
        for i in range(m.n)
    )
    return Diagram(
        labels=p.apply_to(m.labels),
        classes=classes,
        classification=c,
        distance_name=m.distance_name,
        method=method,
        objective=objective,
    )


def render_text(d: Diagram) -> str:
    """Fixed-width character grid: vertical column labels on top, row
    labels on the left, one glyph per cell."""
    glyphs = d.classification.glyphs
    width = max(len(lbl) for lbl in d.labels)
    header_h = max(len(lbl) for lbl in d.labels)
    lines = []
    for r in range(header_h):
        chars = (lbl[r] if r < len(lbl) else " " for lbl in d.labels)
        lines.append((" " * (width + 1) + " ".join(chars)).rstrip())
    for lbl, row in zip(d.labels, d.classes):
        cells = " ".join(glyphs[c] for c in row)
        lines.append(f"{lbl:<{width}} {cells}".rstrip())
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class DiagramStyle:
    cell: float = 18.0
    font_size: float = 11.0
    pad: float = 6.0
    max_radius_frac: float = 0.42  # of cell size
    font_family: str = "monospace"


def _radii(k: int, r_max: float) -> list[float]:
    # strictly decreasing with class index; the last class of a multi-class
    # diagram draws nothing
    if k == 1:
        return [r_max]
    return [r_max * (k - 1 - i) / (k - 1) for i in range(k)]


def _fmt(x: float) -> str:
    return format(round(x, 3), "g")


def render_svg(d: Diagram, style: DiagramStyle = DiagramStyle()) -> str:
    """Self-contained SVG 1.1 document: one filled circle per cell, radius
    decreasing with class index, labels on both axes."""
    n = d.n
    cell = style.cell
    label_w = max(len(lbl) for lbl in d.labels) * style.font_size * 0.62
    left = style.pad * 2 + label_w
    top = style.pad * 2 + label_w
    width = left + n * cell + style.pad
    height = top + n * cell + style.pad
    radii = _radii(d.classification.n_classes, cell * style.max_radius_frac)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}">',
        f"<desc>distance={d.distance_name} method={d.method} "
        f"objective={'' if d.objective is None else _fmt(d.objective)}</desc>",
        f'<rect width="{_fmt(width)}" height="{_fmt(height)}" fill="white"/>',
        f'<rect x="{_fmt(left)}" y="{_fmt(top)}" width="{_fmt(n * cell)}" '
        f'height="{_fmt(n * cell)}" fill="none" stroke="#999999" stroke-width="0.5"/>',
    ]
    font = f'font-family="{style.font_family}" font-size="{_fmt(style.font_size)}"'
    for i, lbl in enumerate(d.labels):
        y = top + (i + 0.5) * cell
        parts.append(
            f'<text x="{_fmt(left - style.pad)}" y="{_fmt(y + style.font_size * 0.35)}" '
            f'text-anchor="end" {font}>{_escape(lbl)}</text>'
        )
    for j, lbl in enumerate(d.labels):
        x = top - style.pad
        cx = left + (j + 0.5) * cell
        parts.append(
            f'<text x="{_fmt(cx)}" y="{_fmt(x)}" text-anchor="start" {font} '
            f'transform="rotate(-90 {_fmt(cx)} {_fmt(x)})" '
            f'dy="{_fmt(style.font_size * 0.35)}">{_escape(lbl)}</text>'
        )
    for i in range(n):
        for j in range(n):
            r = radii[d.classes[i][j]]
            if r <= 0:
                continue
            cx = left + (j + 0.5) * cell
            cy = top + (i + 0.5) * cell
            parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(r)}" fill="black"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
