import pytest

from rleseg import (
    Scheme,
    SegmentKind,
    ValidationError,
    build_layout,
    feasibility_report,
    make_config,
    max_feasible_n,
    vocab_breakdown,
)


def test_lac_breakdown():
    b = vocab_breakdown(Scheme.LAC, 80, 2)
    assert b.size_of(SegmentKind.START) == 6400
    assert b.size_of(SegmentKind.LAC) == 160
    assert b.total == 6560


def test_tac_binary_n14_breakdown():
    b = vocab_breakdown(Scheme.TAC, 80, 1, frames=14)
    assert b.total == 6400 + 80 + (2**14 - 1) == 22863
    assert b.total < 32000


def test_ltac_multiclass_breakdowns():
    assert vocab_breakdown(Scheme.LTAC, 80, 2, frames=5).total == 6400 + 80 * (3**5 - 1) == 25760
    assert vocab_breakdown(Scheme.LTAC, 80, 2, frames=6).total == 6400 + 80 * (3**6 - 1) == 64640


def test_breakdown_matches_enumerated_layout_ids():
    for scheme, size, c, n in [
        (Scheme.TAC, 5, 2, 3),
        (Scheme.LTAC, 4, 1, 2),
        (Scheme.FLAT_3DC, 4, 2, 3),
        (Scheme.LAC, 6, 3, 1),
        (Scheme.BAC, 6, 2, 1),
    ]:
        b = vocab_breakdown(scheme, size, c, frames=n)
        layout = build_layout(make_config(scheme, size, c, frames=n))
        # brute force: count ids claimed by each segment
        per_kind = {}
        for token_id in range(layout.total):
            kind, _ = layout.kind_of(token_id)
            per_kind[kind] = per_kind.get(kind, 0) + 1
        assert per_kind == dict(b.segments)
        assert b.total == sum(per_kind.values())


@pytest.mark.parametrize(
    "scheme,size,c,expected",
    [
        (Scheme.TAC, 80, 1, 14),
        (Scheme.TAC, 80, 2, 9),
        (Scheme.TAC, 160, 1, 12),
        (Scheme.LTAC, 80, 1, 8),
        (Scheme.LTAC, 80, 2, 5),
        (Scheme.FLAT_3DC, 80, 1, 4),
    ],
)
def test_documented_feasibility_limits(scheme, size, c, expected):
    assert max_feasible_n(scheme, size, c, v_limit=32000) == expected


def test_flat_3dc_boundary_convention():
    # five frames of 80x80 starts alone already reach the strict limit
    assert 5 * 6400 >= 32000
    assert max_feasible_n(Scheme.FLAT_3DC, 80, 1, v_limit=32000) == 4


def test_tac_160_multiclass_discrepancy_flag():
    rep = feasibility_report(Scheme.TAC, 160, 2)
    assert rep.computed_n == 7
    assert rep.v_at_computed == 160 * 160 + 160 + (3**7 - 1) == 27946
    assert rep.reference_n == 6
    assert rep.discrepancy
    assert rep.note


def test_matching_reference_has_no_flag():
    rep = feasibility_report(Scheme.TAC, 80, 1)
    assert rep.computed_n == 14 and rep.reference_n == 14 and not rep.discrepancy


def test_monotone_in_classes_and_size():
    for scheme in (Scheme.TAC, Scheme.LTAC):
        ns_by_c = [max_feasible_n(scheme, 80, c) for c in (1, 2, 3, 4)]
        assert ns_by_c == sorted(ns_by_c, reverse=True)
        ns_by_s = [max_feasible_n(scheme, s, 2) for s in (16, 40, 80, 120, 160)]
        assert ns_by_s == sorted(ns_by_s, reverse=True)


def test_no_feasible_n_returns_zero():
    assert max_feasible_n(Scheme.TAC, 80, 1, v_limit=100) == 0


def test_static_scheme_rejected():
    with pytest.raises(ValidationError):
        max_feasible_n(Scheme.LAC, 80, 2)


def test_specials_shift_the_budget():
    base = vocab_breakdown(Scheme.TAC, 80, 2, frames=9).total
    with_specials = vocab_breakdown(Scheme.TAC, 80, 2, frames=9, specials=10).total
    assert with_specials == base + 10
