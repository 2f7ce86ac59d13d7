"""Command line interface.

Subcommands compose through files: `distance` writes the matrix CSV that
`seriate` reads, `seriate` writes the permutation JSON that `diagram`
reads, and `pipeline` chains all stages in one go.  Machine-readable
output goes to files, human-readable summaries to stdout, diagnostics to
stderr.

Exit codes: 0 success, 2 usage error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, dataset, experiments
from .dataset import ObservationTable, ResolvedTable
from .diagram import DEFAULT_PROBS, DiagramStyle, classify, quantile_breaks, render_svg, render_text
from .distance import (
    DEFAULT_REGISTRY,
    DistanceContext,
    DistanceMatrix,
    compare_matrices,
    compute_matrix,
    read_matrix,
    write_matrix,
)
from .errors import CzekError, DataError
from .seriation import EXACT_LIMIT, METHODS, Permutation, SeriationResult, path_length, seriate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _table_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--table", required=True, help="observation CSV file")
    p.add_argument("--meta", help="sidecar metadata TOML file")


def _setup_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--distance", default="dd", help="distance name (default: dd)")
    p.add_argument(
        "--variable-mode", default="all", choices=dataset.VARIABLE_MODES,
        help="ratio-variable handling",
    )
    p.add_argument("--keep", help="comma separated variable names to keep")
    p.add_argument(
        "--angle-unit", default="degrees", choices=experiments.ANGLE_UNITS,
        help="unit for angle variables",
    )
    p.add_argument(
        "--missingness-filter", type=float, default=None, metavar="FRACTION",
        help="drop observations with missingness above this fraction",
    )
    p.add_argument(
        "--normalize", action=argparse.BooleanOptionalAction, default=False,
        help="centre and scale each column",
    )
    p.add_argument("--ref-a", help="first reference observation label")
    p.add_argument("--ref-b", help="second reference observation label")
    p.add_argument("--tie-tolerance", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)


def _load_table(args: argparse.Namespace) -> ObservationTable:
    return dataset.read_table(args.table, args.meta)


def _preprocess(table: ObservationTable, args: argparse.Namespace) -> ResolvedTable:
    keep = [k.strip() for k in args.keep.split(",")] if args.keep else None
    t = dataset.subset_variables(table, args.variable_mode, keep)
    if args.angle_unit == "radians":
        t = dataset.angles_to_radians(t)
    t = dataset.resolve_intervals(t)
    if args.missingness_filter is not None:
        t = dataset.filter_by_missingness(t, args.missingness_filter)
    return dataset.normalize(t) if args.normalize else dataset.as_resolved(t)


def _context(rt: ResolvedTable, args: argparse.Namespace) -> DistanceContext:
    if args.ref_a or args.ref_b:
        if not (args.ref_a and args.ref_b):
            raise DataError("--ref-a and --ref-b must be given together")
        rows = [
            rt.row_values(rt.table.observation_index(lbl))
            for lbl in (args.ref_a, args.ref_b)
        ]
        return DistanceContext(
            reference_a=rows[0], reference_b=rows[1], tie_tolerance=args.tie_tolerance
        )
    return experiments._build_context(rt, args.tie_tolerance)


def _pct(frac) -> str:
    return f"{float(frac) * 100:.1f}"


# --------------------------------------------------------------------------
# subcommands


def cmd_inspect(args: argparse.Namespace) -> int:
    table = _load_table(args)
    kinds: dict[str, int] = {}
    for v in table.variables:
        kinds[v.kind.value] = kinds.get(v.kind.value, 0) + 1
    kind_text = ", ".join(f"{k} {v}" for k, v in sorted(kinds.items()))
    print(f"observations: {table.n_observations}")
    print(f"variables: {table.n_variables} ({kind_text})")
    if table.groups:
        counts: dict[str, int] = {}
        for g in table.groups.values():
            counts[g] = counts.get(g, 0) + 1
        text = ", ".join(f"{g} {n}" for g, n in sorted(counts.items()))
        print(f"groups: {text}")
    if table.focal:
        print(f"focal: {table.focal}")
    frac = dataset.missingness(table)
    width = max(len(lbl) for lbl in table.observations)
    print("missingness per observation (%):")
    for lbl in table.observations:
        print(f"  {lbl:<{width}} {_pct(frac[lbl]):>5}")
    print(f"overall missingness: {_pct(dataset.overall_missingness(table))}%")
    return EXIT_OK


def cmd_distance(args: argparse.Namespace) -> int:
    table = _load_table(args)
    rt = _preprocess(table, args)
    f = DEFAULT_REGISTRY.get(args.distance)
    m = compute_matrix(rt, f, _context(rt, args))
    write_matrix(m, args.out)
    off = m.values[[i for i in range(m.n) for _ in range(m.n - 1)],
                   [j for i in range(m.n) for j in range(m.n) if j != i]]
    print(f"distance: {m.distance_name}")
    print(f"observations: {m.n}, variables: {len(rt.variables)}")
    print(f"off-diagonal range: {off.min():.6g} .. {off.max():.6g}")
    if m.pair_counts is not None:
        shared = m.pair_counts[[i for i in range(m.n) for j in range(i + 1, m.n)],
                               [j for i in range(m.n) for j in range(i + 1, m.n)]]
        print(f"shared variables per pair: {shared.min()} .. {shared.max()}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _write_seriation(m: DistanceMatrix, result: SeriationResult, args) -> None:
    doc = {
        "labels": list(m.labels),
        "order": list(result.permutation.order),
        "objective": result.objective,
        "method": result.method,
        "seed": result.seed,
        "iterations": result.iterations,
    }
    if args.out_perm:
        Path(args.out_perm).write_text(
            json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        print(f"wrote {args.out_perm}")
    if args.out_matrix:
        write_matrix(m.reordered(result.permutation.order), args.out_matrix)
        print(f"wrote {args.out_matrix}")


def cmd_seriate(args: argparse.Namespace) -> int:
    m = read_matrix(args.matrix)
    method = {"2opt": "two_opt"}.get(args.method, args.method)
    result = seriate(m, method=method, seed=args.seed, exact_limit=args.exact_limit)
    print(f"method: {result.method}")
    print(f"objective: {result.objective!r}")
    print(f"order: {' '.join(m.labels[k] for k in result.permutation.order)}")
    _write_seriation(m, result, args)
    return EXIT_OK


def _read_permutation(path: str, m: DistanceMatrix) -> tuple[Permutation, str]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if list(doc.get("labels", [])) != list(m.labels):
        raise DataError("permutation file labels do not match the matrix")
    return Permutation(tuple(doc["order"])), doc.get("method", "")


def cmd_diagram(args: argparse.Namespace) -> int:
    m = read_matrix(args.matrix)
    if args.order:
        perm, method = _read_permutation(args.order, m)
    else:
        perm, method = Permutation.identity(m.n), ""
    if args.probs:
        probs = tuple(float(p) for p in args.probs.split(","))
    else:
        k = args.classes
        probs = tuple(i / k for i in range(1, k))
    glyphs = tuple(args.glyphs) if args.glyphs else None
    c = quantile_breaks(m, probs, glyphs)
    d = classify(m, perm, c, method=method, objective=path_length(perm, m))
    fmt = args.format or ("svg" if args.out.endswith(".svg") else "txt")
    text = render_svg(d, DiagramStyle()) if fmt == "svg" else render_text(d)
    Path(args.out).write_text(text, encoding="utf-8")
    print(f"classes: {c.n_classes}, breakpoints: {[round(b, 6) for b in c.breakpoints]}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    table = _load_table(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rt = _preprocess(table, args)
    f = DEFAULT_REGISTRY.get(args.distance)
    m = compute_matrix(rt, f, _context(rt, args))
    write_matrix(m, out / "matrix.csv")

    method = {"2opt": "two_opt"}.get(args.method, args.method)
    result = seriate(m, method=method, seed=args.seed, exact_limit=args.exact_limit)
    doc = {
        "labels": list(m.labels),
        "order": list(result.permutation.order),
        "objective": result.objective,
        "method": result.method,
        "seed": result.seed,
        "iterations": result.iterations,
    }
    (out / "perm.json").write_text(
        json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )

    if args.probs:
        probs = tuple(float(p) for p in args.probs.split(","))
    else:
        probs = DEFAULT_PROBS
    c = quantile_breaks(m, probs)
    d = classify(m, result.permutation, c, method=result.method, objective=result.objective)
    (out / "diagram.txt").write_text(render_text(d), encoding="utf-8")
    (out / "diagram.svg").write_text(render_svg(d), encoding="utf-8")

    print(f"distance: {m.distance_name}, observations: {m.n}")
    print(f"seriation: {result.method}, objective {result.objective!r}")
    print(f"order: {' '.join(m.labels[k] for k in result.permutation.order)}")
    if table.focal and table.groups:
        order_labels = result.permutation.apply_to(m.labels)
        if table.focal in order_labels:
            category = experiments.classify_placement(order_labels, table.groups, table.focal)
            print(f"placement of {table.focal}: {category}")
    print(f"wrote matrix.csv, perm.json, diagram.txt, diagram.svg under {out}")
    return EXIT_OK


def cmd_grid(args: argparse.Namespace) -> int:
    table = _load_table(args)
    axes = experiments.read_grid_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    expansion, reports = experiments.run_grid(
        table, axes, out_dir=out, workers=args.workers
    )
    (out / "report.csv").write_text(
        experiments.emit_report(reports, "csv"), encoding="utf-8"
    )
    (out / "report.json").write_text(
        experiments.emit_report(reports, "json"), encoding="utf-8"
    )
    summary = experiments.summarize(reports)
    print(f"full grid size: {expansion.full_size}")
    print(f"runnable setups: {len(expansion.setups)}, pruned: {len(expansion.pruned)}")
    for spec, reason in expansion.pruned[:3]:
        print(f"  pruned e.g. {spec.digest()}: {reason}")
    print(f"completed: {summary['classified']}, errors: {summary['errors']}")
    print("categories:")
    for cat in experiments.CATEGORIES:
        print(f"  {cat}: {summary['by_category'][cat]}")
    print(
        f"focal not interior to its own group: "
        f"{summary['focal_not_interior_own_group']} of {summary['classified']}"
    )
    print("note: categories come from fixed adjacency rules; judging the same")
    print("arrangements by eye can tally differently")
    print(f"wrote report.csv, report.json and per-setup artifacts under {out}")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    cand = read_matrix(args.candidate)
    ref = read_matrix(args.reference)
    exclude = [tuple(pair) for pair in (args.exclude or [])]
    cmp = compare_matrices(cand, ref, exclude=exclude, threshold=args.threshold)
    for line in cmp.lines():
        print(line)
    if args.out:
        doc = {
            "n_cells": cmp.n_cells,
            "bin_edges": list(cmp.bin_edges),
            "histogram": list(cmp.histogram),
            "fraction_below": cmp.fraction_below,
            "threshold": cmp.threshold,
            "worst": [list(w) for w in cmp.worst],
            "excluded": [list(e) for e in cmp.excluded],
        }
        Path(args.out).write_text(
            json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
        print(f"wrote {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="czek",
        description="Distance diagrams: distances over incomplete tables, "
        "Hamiltonian-path seriation, monochrome rendering, experiment grids.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="summarize a table: dimensions, missingness, groups")
    _table_args(p)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("distance", help="compute a distance matrix")
    _table_args(p)
    _setup_args(p)
    p.add_argument("--out", required=True, help="output matrix CSV")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("seriate", help="order a distance matrix")
    p.add_argument("--matrix", required=True, help="matrix CSV")
    p.add_argument("--method", default="auto", choices=[*METHODS, "2opt"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact-limit", type=int, default=EXACT_LIMIT,
                   help="largest size the exact solver accepts")
    p.add_argument("--out-perm", help="output permutation JSON")
    p.add_argument("--out-matrix", help="output reordered matrix CSV")
    p.set_defaults(func=cmd_seriate)

    p = sub.add_parser("diagram", help="render a seriated matrix")
    p.add_argument("--matrix", required=True, help="matrix CSV")
    p.add_argument("--order", help="permutation JSON (default: given order)")
    p.add_argument("--classes", type=int, default=4, help="number of symbol classes")
    p.add_argument("--probs", help="explicit quantile breakpoints, e.g. 0.25,0.5,0.75")
    p.add_argument("--glyphs", help="custom glyph string, largest symbol first")
    p.add_argument("--out", required=True, help="output file (.txt or .svg)")
    p.add_argument("--format", choices=("txt", "svg"), help="override format")
    p.set_defaults(func=cmd_diagram)

    p = sub.add_parser("pipeline", help="run table -> matrix -> seriation -> diagram")
    _table_args(p)
    _setup_args(p)
    p.add_argument("--method", default="auto", choices=[*METHODS, "2opt"])
    p.add_argument("--exact-limit", type=int, default=EXACT_LIMIT,
                   help="largest size the exact solver accepts")
    p.add_argument("--probs", help="quantile breakpoints for the diagram")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("grid", help="run a configured grid of setups")
    p.add_argument("--config", required=True, help="grid TOML config")
    _table_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("compare", help="cellwise relative difference of two matrices")
    p.add_argument("--candidate", required=True, help="matrix CSV to evaluate")
    p.add_argument("--reference", required=True, help="matrix CSV to compare against")
    p.add_argument(
        "--exclude", nargs=2, action="append", metavar=("LABEL_A", "LABEL_B"),
        help="known-bad cell to skip (repeatable)",
    )
    p.add_argument("--threshold", type=float, default=0.04)
    p.add_argument("--out", help="optional JSON report path")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (CzekError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
