from __future__ import annotations

import csv
import io
import json

import pytest
from hypothesis import given, strategies as st

from czek.dataset import parse_metadata, parse_table
from czek.errors import DataError, GridConfigError
from czek.experiments import (
    CATEGORIES,
    GridExpansion,
    PlacementReport,
    SetupAxes,
    SetupSpec,
    classify_placement,
    emit_report,
    expand_grid,
    neighbor_context,
    parse_grid_config,
    run_grid,
    run_setup,
    summarize,
)

# --------------------------------------------------------------------------
# setup specs and grid expansion


def test_spec_validation():
    with pytest.raises(ValueError):
        SetupSpec(distance="dd", variable_mode="bogus")
    with pytest.raises(ValueError):
        SetupSpec(distance="dd", angle_unit="gradians")
    with pytest.raises(ValueError):
        SetupSpec(distance="dd", missingness_filter=1.5)


def test_spec_digest_is_stable():
    a = SetupSpec(distance="dd", normalize=True, seed=7)
    b = SetupSpec(distance="dd", normalize=True, seed=7)
    assert a.digest() == b.digest()
    assert a.digest() != SetupSpec(distance="dd", normalize=False, seed=7).digest()


def test_single_axis_product():
    axes = SetupAxes(
        distances=("dd", "sq_euclidean", "stolyhwo"),
        angle_units=("degrees", "radians"),
    )
    e = expand_grid(axes)
    assert len(e.setups) == 6
    assert e.pruned == ()
    assert e.full_size == 6


def test_stolyhwo_normalize_pruned():
    axes = SetupAxes(distances=("stolyhwo",), normalize=(True, False))
    e = expand_grid(axes)
    assert len(e.setups) == 1
    assert len(e.pruned) == 1
    spec, reason = e.pruned[0]
    assert spec.normalize is True
    assert "unnormalized" in reason


def test_normalized_radians_pruned_only_with_both_units():
    axes = SetupAxes(
        distances=("dd",), angle_units=("degrees", "radians"), normalize=(True, False)
    )
    e = expand_grid(axes)
    assert e.full_size == 4
    assert len(e.setups) == 3
    assert e.pruned[0][0].angle_unit == "radians"
    assert "normalization" in e.pruned[0][1]

    only_radians = SetupAxes(distances=("dd",), angle_units=("radians",), normalize=(True,))
    assert expand_grid(only_radians).pruned == ()


def test_expansion_deterministic_and_duplicate_free():
    axes = SetupAxes(
        distances=("dd", "stolyhwo"),
        variable_modes=("all", "drop_ratios"),
        normalize=(False, True),
    )
    e1 = expand_grid(axes)
    e2 = expand_grid(axes)
    assert e1 == e2
    encodings = [s.canonical_encoding() for s in e1.setups]
    assert len(set(encodings)) == len(encodings)
    assert len(e1.setups) + len(e1.pruned) == 8


def test_unknown_distance_rejected():
    with pytest.raises(DataError, match="unknown distance"):
        expand_grid(SetupAxes(distances=("nope",)))


def test_empty_axis_rejected():
    with pytest.raises(GridConfigError, match="empty"):
        SetupAxes(distances=())


def test_variable_set_needs_keep_list():
    with pytest.raises(GridConfigError, match="keep list"):
        SetupAxes(distances=("dd",), variable_sets=("subset",))


# --------------------------------------------------------------------------
# placement classification


GROUPS = {
    "S1": "sap", "S2": "sap", "S3": "sap", "S4": "sap",
    "N1": "nea", "N2": "nea", "N3": "nea", "N4": "nea",
    "F": "sap",
    "K": "sap", "B": "sap",
    "X": "ungrouped_placeholder",
}
GROUPS.pop("X")


def test_interior_own_group():
    assert classify_placement(["S1", "S2", "F", "S3", "S4"], GROUPS, "F") == "interior_own_group"


def test_boundary():
    assert classify_placement(["S1", "S2", "S3", "F", "N1", "N2"], GROUPS, "F") == "boundary"


def test_singleton():
    assert classify_placement(["S1", "S2", "N1", "F", "N2", "N3"], GROUPS, "F") == "singleton"


def test_singleton_at_edge():
    assert classify_placement(["F", "N1", "N2", "S1"], GROUPS, "F") == "singleton"


def test_interior_other_group():
    order = ["S1", "N1", "N2", "F", "N3", "N4"]
    assert classify_placement(order, GROUPS, "F") == "interior_other_group"


def test_grouped_with_other_two_companions():
    order = ["N1", "K", "F", "B", "N2", "S1"]
    assert classify_placement(order, GROUPS, "F") == "grouped_with_other"


def test_grouped_with_other_one_companion():
    order = ["S1", "N1", "F", "B", "N2"]
    assert classify_placement(order, GROUPS, "F") == "grouped_with_other"


def test_large_island_is_not_grouped():
    # four own-group members walled in: the focal in the middle is interior
    order = ["N1", "S1", "F", "S2", "S3", "N2"]
    assert classify_placement(order, GROUPS, "F") == "interior_own_group"
    # and on the island's border it is a boundary case
    order = ["N1", "F", "S1", "S2", "S3", "N2"]
    assert classify_placement(order, GROUPS, "F") == "boundary"


def test_edge_neighbor_own_group():
    assert classify_placement(["F", "S1", "N1"], GROUPS, "F") == "interior_own_group"


def test_unlabeled_neighbor_is_mixed():
    groups = dict(GROUPS)
    order = ["S1", "U", "F", "N1"]
    assert classify_placement(order, groups, "F") == "mixed"


def test_focal_missing_or_unlabeled():
    with pytest.raises(DataError):
        classify_placement(["S1", "N1"], GROUPS, "F")
    with pytest.raises(DataError):
        classify_placement(["S1", "U", "N1"], GROUPS, "U")


def test_single_group_rejected():
    groups = {"A": "g", "B": "g", "C": "g"}
    with pytest.raises(DataError):
        classify_placement(["A", "B", "C"], groups, "B")


@given(st.data())
def test_placement_reversal_invariance(data):
    n = data.draw(st.integers(4, 10))
    member_groups = data.draw(
        st.lists(st.sampled_from(["sap", "nea"]), min_size=n, max_size=n)
    )
    if len(set(member_groups)) < 2:
        member_groups[0] = "sap"
        member_groups[-1] = "nea"
    labels = [f"m{i}" for i in range(n)]
    groups = dict(zip(labels, member_groups))
    focal = data.draw(st.sampled_from(labels))
    forward = classify_placement(labels, groups, focal)
    backward = classify_placement(labels[::-1], groups, focal)
    assert forward == backward


def test_neighbor_context_window():
    ctx = neighbor_context(["S1", "S2", "F", "N1", "N2"], GROUPS, "F")
    assert ctx.labels == ("S1", "S2", "F", "N1", "N2")
    assert ctx.groups == ("sap", "sap", "sap", "nea", "nea")
    assert ctx.run_length == 3


# --------------------------------------------------------------------------
# running setups


def test_run_setup_filter_leaves_nine(skull_table):
    spec = SetupSpec(distance="dd", missingness_filter=0.5)
    report = run_setup(skull_table, spec)
    assert report.error is None
    assert report.n_observations == 9
    assert report.category in CATEGORIES


def test_run_setup_deterministic(skull_table):
    spec = SetupSpec(distance="sq_euclidean", normalize=True, seed=3)
    assert run_setup(skull_table, spec) == run_setup(skull_table, spec)


def test_run_setup_writes_artifacts(skull_table, tmp_path):
    spec = SetupSpec(distance="dd")
    report = run_setup(skull_table, spec, out_dir=tmp_path)
    sub = tmp_path / report.setup_hash
    assert (sub / "matrix.csv").exists()
    assert (sub / "diagram.txt").exists()
    assert (sub / "diagram.svg").exists()


def test_run_setup_records_errors(skull_table):
    # drop the representatives so the reference-pair distance cannot run
    bare = type(skull_table)(
        observations=skull_table.observations,
        variables=skull_table.variables,
        cells=skull_table.cells,
        groups=skull_table.groups,
        focal=skull_table.focal,
        representatives=None,
    )
    report = run_setup(bare, SetupSpec(distance="stolyhwo"))
    assert report.error is not None
    assert report.category is None


def test_run_setup_interior_when_surrounded(skull_table):
    spec = SetupSpec(distance="dd", normalize=True)
    report = run_setup(skull_table, spec)
    assert report.error is None
    assert report.context is not None
    # rule check: both immediate neighbors in the focal's group implies
    # interior (unless it sits in a small walled-in island)
    left, right = report.context.groups[1], report.context.groups[3]
    own = (skull_table.groups or {})[report.focal]
    if left == own and right == own and report.context.run_length > 3:
        assert report.category == "interior_own_group"


def test_run_grid_workers_and_order(skull_table):
    axes = SetupAxes(distances=("dd", "sq_euclidean"), normalize=(False, True), seed=1)
    e1, serial = run_grid(skull_table, axes, workers=1)
    e2, parallel = run_grid(skull_table, axes, workers=3)
    assert e1 == e2
    assert serial == parallel
    assert [r.setup_id for r in serial] == [f"setup-{i + 1:03d}" for i in range(len(serial))]


# --------------------------------------------------------------------------
# reports


def fake_report(i: int, category: str) -> PlacementReport:
    spec = SetupSpec(distance="dd", seed=i)
    return PlacementReport(
        setup_id=f"setup-{i:03d}",
        setup_hash=spec.digest(),
        spec=spec,
        focal="F",
        category=category,
        order_labels=("A", "F", "B"),
        objective=float(i),
        n_observations=3,
        context=None,
    )


def test_empty_report_is_header_only():
    text = emit_report([], "csv")
    lines = text.splitlines()
    assert len(lines) == 1
    assert lines[0].startswith("setup_id,")


def test_summary_counts_sum_to_total():
    reports = [fake_report(i, CATEGORIES[i % 3]) for i in range(7)]
    s = summarize(reports)
    assert sum(s["by_category"].values()) == len(reports)
    assert s["total"] == 7


def test_report_hand_tally():
    cats = [
        "boundary", "singleton", "boundary",
        "interior_own_group", "grouped_with_other", "boundary",
    ]
    reports = [fake_report(i, c) for i, c in enumerate(cats)]
    s = summarize(reports)
    assert s["by_category"]["boundary"] == 3
    assert s["by_category"]["singleton"] == 1
    assert s["by_category"]["interior_own_group"] == 1
    assert s["by_category"]["grouped_with_other"] == 1
    assert s["focal_not_interior_own_group"] == 5

    doc = json.loads(emit_report(reports, "json"))
    assert doc["summary"]["by_category"] == s["by_category"]
    assert len(doc["setups"]) == 6

    rows = list(csv.DictReader(io.StringIO(emit_report(reports, "csv"))))
    assert len(rows) == 6
    assert rows[0]["category"] == "boundary"
    assert rows[0]["distance"] == "dd"


def test_report_formats_deterministic():
    reports = [fake_report(i, "boundary") for i in range(3)]
    assert emit_report(reports, "csv") == emit_report(reports, "csv")
    assert emit_report(reports, "json") == emit_report(reports, "json")
    with pytest.raises(ValueError):
        emit_report(reports, "yaml")


# --------------------------------------------------------------------------
# grid config files


def test_parse_grid_config_round_trip(data_dir):
    axes = parse_grid_config((data_dir / "grid.toml").read_text(encoding="utf-8"))
    assert axes.distances == ("dd", "sq_euclidean", "stolyhwo")
    assert axes.missingness_filters == (None, 0.5)
    assert "classic27" in axes.keep_lists
    e = expand_grid(axes)
    assert e.full_size == 144
    assert len(e.setups) == 96


def test_grid_config_unknown_axis():
    with pytest.raises(GridConfigError, match="unknown axes"):
        parse_grid_config('[axes]\ndistances = ["dd"]\ncolors = ["red"]\n')


def test_grid_config_unknown_key():
    with pytest.raises(GridConfigError, match="unknown grid config keys"):
        parse_grid_config('[axes]\ndistances = ["dd"]\n\n[extra]\nx = 1\n')


def test_grid_config_bad_filter():
    with pytest.raises(GridConfigError, match="missingness"):
        parse_grid_config('[axes]\ndistances = ["dd"]\nmissingness_filters = ["half"]\n')


def test_grid_config_requires_distances():
    with pytest.raises(GridConfigError, match="distances"):
        parse_grid_config("[axes]\nnormalize = [true]\n")


# --------------------------------------------------------------------------
# pipeline on a table wide enough for keep lists to matter


def test_keep_list_narrows_table():
    md = parse_metadata(
        '[variables.R]\nkind = "ratio"\ncomponents = ["A", "B"]\n'
        '\n[groups]\nx = "g1"\ny = "g2"\nz = "g1"\n\n[focal]\nlabel = "z"\n'
    )
    t = parse_table(
        "label,A,B,C,D,R\nx,1,2,3,4,50\ny,4,5,6,7,80\nz,2,3,4,5,66\n", md
    )
    axes = SetupAxes(
        distances=("dd",),
        variable_sets=("full", "narrow"),
        keep_lists={"narrow": ("A", "C")},
    )
    _, reports = run_grid(t, axes)
    assert all(r.error is None for r in reports)
    assert reports[0].spec.variable_set == "full"
    assert reports[1].spec.variable_set == "narrow"
