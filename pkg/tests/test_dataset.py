from __future__ import annotations

import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from czek.dataset import (
    MISSING,
    Interval,
    Missing,
    ObservationTable,
    Scalar,
    VariableMeta,
    VarKind,
    angles_to_radians,
    as_resolved,
    filter_by_missingness,
    format_cell,
    format_table,
    missingness,
    normalize,
    overall_missingness,
    parse_cell,
    parse_metadata,
    parse_table,
    resolve_intervals,
    subset_variables,
)
from czek.errors import DataError, MetadataError, TableParseError

from .conftest import make_table


# --------------------------------------------------------------------------
# cell parsing


def test_empty_cell_is_missing():
    assert parse_cell("") == MISSING
    assert parse_cell("   ") == MISSING


def test_interval_cell():
    assert parse_cell("10-12") == Interval(10.0, 12.0)


def test_en_dash_interval():
    assert parse_cell("10–12") == Interval(10.0, 12.0)


def test_leading_minus_is_scalar():
    assert parse_cell("-3") == Scalar(-3.0)


def test_negative_interval_bounds():
    assert parse_cell("-5--3") == Interval(-5.0, -3.0)


def test_scientific_notation_scalar():
    assert parse_cell("1e-3") == Scalar(0.001)


@pytest.mark.parametrize("bad", ["abc", "1..2", "nan", "inf", "3-", "3-2"])
def test_malformed_cells(bad):
    with pytest.raises(ValueError):
        parse_cell(bad)


@given(st.floats(allow_nan=False, allow_infinity=False, min_value=-1e6, max_value=1e6))
def test_cell_round_trip_scalar(x):
    assert parse_cell(format_cell(Scalar(x))) == Scalar(x)


def test_cell_round_trip_interval():
    for lo, hi in [(10.0, 12.0), (-2.5, 0.0), (3.0, 3.0), (1e-7, 2e-7)]:
        cell = Interval(lo, hi)
        assert parse_cell(format_cell(cell)) == cell


# --------------------------------------------------------------------------
# table parsing


CSV = """label,a,b,c
one,1,2-4,
two,-1,5,6.5
"""


def test_parse_basic():
    t = parse_table(CSV)
    assert t.observations == ("one", "two")
    assert t.variable_names() == ("a", "b", "c")
    assert t.cells[0] == (Scalar(1.0), Interval(2.0, 4.0), MISSING)
    assert t.cells[1] == (Scalar(-1.0), Scalar(5.0), Scalar(6.5))


def test_parse_fixture_dimensions(skull_table):
    assert skull_table.n_observations == 13
    assert skull_table.n_variables == 27


def test_duplicate_label_coordinates():
    with pytest.raises(TableParseError, match=r"row 3"):
        parse_table("label,a\nx,1\nx,2\n")


def test_ragged_row():
    with pytest.raises(TableParseError, match=r"row 2"):
        parse_table("label,a,b\nx,1\n")


def test_malformed_number_coordinates():
    with pytest.raises(TableParseError, match=r"row 2, column 3"):
        parse_table("label,a,b\nx,1,oops\n")


def test_interval_out_of_order():
    with pytest.raises(TableParseError, match=r"out of order"):
        parse_table("label,a\nx,5-3\n")


def test_empty_table():
    with pytest.raises(TableParseError):
        parse_table("")


def test_round_trip_fixture(skull_table):
    again = parse_table(format_table(skull_table))
    assert again.observations == skull_table.observations
    assert again.cells == skull_table.cells


def test_full_round_trip_with_metadata(skull_table):
    from czek.dataset import format_metadata

    md = parse_metadata(format_metadata(skull_table))
    again = parse_table(format_table(skull_table), md)
    assert again == skull_table


cells_st = st.one_of(
    st.just(MISSING),
    st.builds(Scalar, st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)),
    st.tuples(
        st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
        st.floats(min_value=0, max_value=10, allow_nan=False),
    ).map(lambda p: Interval(p[0], p[0] + p[1])),
)


@given(
    st.lists(st.lists(cells_st, min_size=3, max_size=3), min_size=1, max_size=5)
)
def test_round_trip_random_tables(rows):
    t = ObservationTable(
        observations=tuple(f"r{i}" for i in range(len(rows))),
        variables=tuple(VariableMeta(f"c{j}") for j in range(3)),
        cells=tuple(tuple(row) for row in rows),
    )
    assert parse_table(format_table(t)).cells == t.cells


# --------------------------------------------------------------------------
# metadata


def test_metadata_unknown_top_key():
    with pytest.raises(MetadataError, match="unknown metadata keys"):
        parse_metadata("[something]\nx = 1\n")


def test_metadata_unknown_variable_key():
    with pytest.raises(MetadataError, match="unknown keys"):
        parse_metadata('[variables.a]\nkind = "plain"\ncolor = "red"\n')


def test_metadata_ratio_needs_components():
    with pytest.raises(MetadataError, match="components"):
        parse_metadata('[variables.a]\nkind = "ratio"\n')


def test_metadata_unknown_variable_rejected_on_merge():
    md = parse_metadata('[variables.zz]\nkind = "plain"\n')
    with pytest.raises(MetadataError, match="unknown variable"):
        parse_table("label,a\nx,1\n", md)


def test_metadata_representative_group_mismatch():
    md = parse_metadata('[groups]\nx = "g1"\ny = "g2"\n\n[representatives]\ng1 = "y"\n')
    with pytest.raises(MetadataError, match="belongs to group"):
        parse_table("label,a\nx,1\ny,2\n", md)


def test_fixture_metadata(skull_table):
    kinds = {v.name: v.kind for v in skull_table.variables}
    assert kinds["frontal_angle"] is VarKind.ANGLE_DEGREES
    assert kinds["cephalic_index"] is VarKind.RATIO
    assert skull_table.groups["Neandertal"] == "neanderthalensis"
    assert skull_table.focal == "Nowosiółka"


# --------------------------------------------------------------------------
# interval resolution


def test_resolve_midpoint():
    t = parse_table("label,a\nx,10-12\n")
    assert resolve_intervals(t).cells[0][0] == Scalar(11.0)


def test_resolve_identity_on_scalar():
    t = parse_table("label,a\nx,5\n")
    assert resolve_intervals(t).cells[0][0] == Scalar(5.0)


def test_resolve_degenerate_interval():
    t = parse_table("label,a\nx,3-3\n")
    assert resolve_intervals(t).cells[0][0] == Scalar(3.0)


def test_resolve_idempotent(skull_table):
    once = resolve_intervals(skull_table)
    assert resolve_intervals(once) == once
    assert once.observations == skull_table.observations
    assert once.variable_names() == skull_table.variable_names()


# --------------------------------------------------------------------------
# angle conversion


def angle_table():
    md = parse_metadata('[variables.ang]\nkind = "angle_degrees"\n')
    return parse_table("label,ang,plain\nx,180,90\ny,90,45\n", md)


def test_degrees_to_radians():
    t = angles_to_radians(angle_table())
    assert math.isclose(t.cells[0][0].value, math.pi, abs_tol=1e-12)
    assert t.cells[0][1] == Scalar(90.0)
    assert t.variables[0].kind is VarKind.ANGLE_RADIANS


def test_angle_conversion_idempotent():
    once = angles_to_radians(angle_table())
    assert angles_to_radians(once) == once


def test_angle_conversion_covers_intervals():
    md = parse_metadata('[variables.ang]\nkind = "angle_degrees"\n')
    t = angles_to_radians(parse_table("label,ang\nx,90-180\n", md))
    cell = t.cells[0][0]
    assert math.isclose(cell.lo, math.pi / 2, abs_tol=1e-12)
    assert math.isclose(cell.hi, math.pi, abs_tol=1e-12)


# --------------------------------------------------------------------------
# variable subsets


def ratio_table():
    md = parse_metadata(
        '[variables.R]\nkind = "ratio"\ncomponents = ["A", "B"]\n'
    )
    return parse_table("label,A,B,C,R\nx,1,2,3,50\ny,4,5,6,80\n", md)


def test_subset_identity():
    t = ratio_table()
    assert subset_variables(t, "all") == t


def test_drop_ratios():
    t = subset_variables(ratio_table(), "drop_ratios")
    assert t.variable_names() == ("A", "B", "C")


def test_drop_ratio_components():
    t = subset_variables(ratio_table(), "drop_ratio_components")
    assert t.variable_names() == ("C", "R")


def test_keep_intersects_after_mode():
    t = subset_variables(ratio_table(), "drop_ratios", keep=["A", "C", "R"])
    assert t.variable_names() == ("A", "C")


def test_unknown_keep_name():
    with pytest.raises(DataError, match="unknown variable"):
        subset_variables(ratio_table(), "all", keep=["nope"])


# --------------------------------------------------------------------------
# missingness


def test_missingness_fixture_fractions(skull_table):
    frac = missingness(skull_table)
    assert frac["Neandertal"] == 0
    assert frac["Spy I"] == Fraction(2, 27)
    assert frac["Egisheim"] == Fraction(18, 27)
    assert overall_missingness(skull_table) == Fraction(105, 351)


def test_missingness_invariant_under_permutations(skull_table):
    frac = missingness(skull_table)
    rev_rows = ObservationTable(
        observations=skull_table.observations[::-1],
        variables=skull_table.variables,
        cells=skull_table.cells[::-1],
    )
    assert missingness(rev_rows) == frac
    perm_cols = subset_variables(
        skull_table, "all", keep=list(skull_table.variable_names())
    )
    assert missingness(perm_cols) == frac


def test_missingness_zero_variables():
    t = make_table([[1.0], [2.0]])
    empty = subset_variables(t, "all", keep=[])
    with pytest.raises(DataError):
        missingness(empty)


def test_filter_fixture(skull_table):
    kept = filter_by_missingness(skull_table, 0.5)
    gone = {"Krapina D", "Galey Hill", "Brunn", "Egisheim"}
    assert set(skull_table.observations) - set(kept.observations) == gone
    assert kept.observations == tuple(
        lbl for lbl in skull_table.observations if lbl not in gone
    )


def test_filter_identity_at_one(skull_table):
    assert filter_by_missingness(skull_table, 1.0).observations == skull_table.observations


def test_filter_identity_on_complete_table():
    t = make_table([[1, 2], [3, 4]])
    assert filter_by_missingness(t, 0.0) == t


def test_filter_all_removed():
    t = make_table([[None, None], [None, 1]])
    with pytest.raises(DataError, match="every observation"):
        filter_by_missingness(t, 0.1)


# --------------------------------------------------------------------------
# normalization


def column(rt, j):
    vals = []
    for i in range(rt.table.n_observations):
        vals.append(rt.row_values(i)[j])
    return vals


def test_normalize_simple_column():
    rt = normalize(make_table([[1.0], [2.0], [3.0]]))
    assert column(rt, 0) == [-1.0, 0.0, 1.0]
    assert rt.normalized
    assert rt.degenerate_columns == ()


def test_normalize_constant_column_flagged():
    rt = normalize(make_table([[5.0], [5.0], [5.0]]))
    assert column(rt, 0) == [0.0, 0.0, 0.0]
    assert rt.degenerate_columns == ("v0",)


def test_normalize_with_missing():
    # two observed values: mean 2, sample sd sqrt(2)
    rt = normalize(make_table([[1.0], [None], [3.0]]))
    vals = column(rt, 0)
    assert vals[1] is None
    assert math.isclose(vals[0], -1.0 / math.sqrt(2.0), rel_tol=1e-12)
    assert math.isclose(vals[2], 1.0 / math.sqrt(2.0), rel_tol=1e-12)


def test_normalized_columns_standardized(skull_table):
    rt = normalize(resolve_intervals(skull_table))
    for j, v in enumerate(rt.table.variables):
        if v.name in rt.degenerate_columns:
            continue
        vals = [x for x in column(rt, j) if x is not None]
        mean = sum(vals) / len(vals)
        sd = math.sqrt(sum((x - mean) ** 2 for x in vals) / (len(vals) - 1))
        assert abs(mean) < 1e-9
        assert abs(sd - 1.0) < 1e-9


def test_normalize_requires_resolved(skull_table):
    with pytest.raises(DataError, match="interval"):
        normalize(skull_table)


def test_normalize_preserves_missing_pattern(skull_table):
    resolved = resolve_intervals(skull_table)
    assert missingness(normalize(resolved).table) == missingness(resolved)


def test_as_resolved_rejects_intervals(skull_table):
    with pytest.raises(DataError, match="interval"):
        as_resolved(skull_table)


def test_transforms_provenance(skull_table):
    rt = as_resolved(resolve_intervals(angles_to_radians(skull_table)))
    assert "radians" in rt.transforms
    assert not rt.normalized
