"""Czekanowski-style distance diagrams.

Pluggable distance matrices over incomplete tabular data, seriation by
Hamiltonian-path-length minimization, symbol-class binning, monochrome
diagram rendering, and a configuration-grid experiment harness.
"""

__version__ = "0.1.0"

from .dataset import (
    MISSING,
    Cell,
    Interval,
    Missing,
    ObservationTable,
    ResolvedTable,
    Scalar,
    VariableMeta,
    VarKind,
    angles_to_radians,
    as_resolved,
    filter_by_missingness,
    format_metadata,
    format_table,
    missingness,
    normalize,
    overall_missingness,
    parse_metadata,
    parse_table,
    read_table,
    resolve_intervals,
    subset_variables,
    write_table,
)
from .diagram import (
    DEFAULT_PROBS,
    Diagram,
    DiagramStyle,
    SymbolClassification,
    classify,
    quantile_breaks,
    render_svg,
    render_text,
)
from .distance import (
    DistanceContext,
    DistanceFunction,
    DistanceMatrix,
    DistanceRegistry,
    compare_matrices,
    compute_matrix,
    dd_distance,
    distance_names,
    get_distance,
    read_matrix,
    register_distance,
    sq_euclidean,
    stolyhwo_distance,
    write_matrix,
)
from .errors import (
    CzekError,
    DataError,
    DisjointSupportError,
    GridConfigError,
    MetadataError,
    SolverError,
    TableParseError,
)
from .experiments import (
    GridExpansion,
    PlacementReport,
    SetupAxes,
    SetupSpec,
    classify_placement,
    emit_report,
    expand_grid,
    read_grid_config,
    run_grid,
    run_setup,
    summarize,
)
from .seriation import (
    AnnealSchedule,
    Permutation,
    SeriationResult,
    path_length,
    seriate,
    solve_anneal,
    solve_exact,
    solve_two_opt,
)
