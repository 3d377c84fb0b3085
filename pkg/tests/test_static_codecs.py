import dataclasses

import numpy as np
import pytest

from conftest import random_mask
from rleseg import (
    FlattenOrder,
    LabelMask,
    ParseError,
    Scheme,
    SchemeConfig,
    SegmentKind,
    StartMode,
    TokenSequence,
    ValidationError,
    decode_split_stream,
    decode_static,
    encode_split_stream,
    encode_static,
    make_sequence,
)

EXAMPLE = LabelMask(np.array([[0, 1, 1, 0, 1], [1, 0, 0, 1, 1]]), 1)

ALL_STATIC = [
    Scheme.NAIVE_BIN,
    Scheme.NAIVE_MC,
    Scheme.LAC,
    Scheme.BAC,
    Scheme.BAC_LAC,
    Scheme.DIFF_BIN,
    Scheme.DIFF_MC,
]


def cfg_for(scheme, mask, **kw):
    return SchemeConfig(scheme, mask.height, mask.width, mask.num_classes, **kw)


def test_naive_bin_token_values():
    cfg = cfg_for(Scheme.NAIVE_BIN, EXAMPLE)
    seq = encode_static(EXAMPLE, cfg)
    layout = seq.layout
    start = layout.segment(SegmentKind.START).offset
    length = layout.segment(SegmentKind.LENGTH).offset
    assert seq.to_list() == [start + 1, length + 1, start + 4, length + 1, start + 8, length + 1]


def test_lac_token_values():
    cfg = cfg_for(Scheme.LAC, EXAMPLE)
    seq = encode_static(EXAMPLE, cfg)
    lac = seq.layout.segment(SegmentKind.LAC).offset
    ml = cfg.effective_max_len
    lac_value = (1 - 1) * ml + (2 - 1)
    assert seq.to_list() == [1, lac + lac_value, 4, lac + lac_value, 8, lac + lac_value]


def test_empty_mask_payloads_per_scheme():
    empty = LabelMask(np.zeros((2, 5), dtype=int), 1)
    for scheme in (Scheme.NAIVE_BIN, Scheme.LAC, Scheme.DIFF_BIN):
        assert len(encode_static(empty, cfg_for(scheme, empty))) == 0
    # coverage schemes spell out the background; with an unbounded run
    # length the whole mask is a single pair
    cfg = cfg_for(Scheme.BAC, empty, max_len=10)
    seq = encode_static(empty, cfg)
    layout = seq.layout
    assert seq.to_list() == [
        layout.id_of(SegmentKind.LENGTH, 9),
        layout.id_of(SegmentKind.CLASS, 0),
    ]
    assert decode_static(seq).same_as(empty)


def test_bac_prefix_sum_decode_example():
    cfg = SchemeConfig(Scheme.BAC, 2, 5, 1, max_len=10)
    layout = encode_static(LabelMask(np.zeros((2, 5), dtype=int), 1), cfg).layout
    ids = [
        layout.id_of(SegmentKind.LENGTH, 5),  # 6 background pixels
        layout.id_of(SegmentKind.CLASS, 0),
        layout.id_of(SegmentKind.LENGTH, 3),  # 4 pixels of class 1
        layout.id_of(SegmentKind.CLASS, 1),
    ]
    mask = decode_static(make_sequence(ids, cfg))
    assert mask.labels.reshape(-1).tolist() == [0] * 6 + [1] * 4


def test_round_trip_all_schemes_variants():
    rng = np.random.default_rng(0)
    for scheme in ALL_STATIC:
        c = 1 if scheme.binary_only else int(rng.integers(2, 5))
        for _ in range(30):
            h, w = int(rng.integers(2, 24)), int(rng.integers(2, 24))
            mask = random_mask(rng, h, w, c)
            cfg = SchemeConfig(scheme, h, w, c)
            assert decode_static(encode_static(mask, cfg)).same_as(mask), scheme


def test_round_trip_column_major_and_specials():
    rng = np.random.default_rng(1)
    for scheme in ALL_STATIC:
        c = 1 if scheme.binary_only else 3
        mask = random_mask(rng, 11, 7, c)
        cfg = SchemeConfig(scheme, 11, 7, c, flatten_order=FlattenOrder.COLUMN_MAJOR, specials=2)
        assert decode_static(encode_static(mask, cfg)).same_as(mask), scheme


def test_round_trip_2d_starts():
    rng = np.random.default_rng(2)
    for scheme in (Scheme.NAIVE_BIN, Scheme.NAIVE_MC, Scheme.LAC):
        c = 1 if scheme.binary_only else 2
        mask = random_mask(rng, 9, 14, c)
        cfg = SchemeConfig(scheme, 9, 14, c, start_mode=StartMode.TWO_D)
        assert decode_static(encode_static(mask, cfg)).same_as(mask), scheme


def test_tokens_per_run_counts():
    rng = np.random.default_rng(3)
    mask = random_mask(rng, 10, 10, 3)
    cfgs = {
        Scheme.NAIVE_MC: 3,
        Scheme.LAC: 2,
    }
    runs = None
    for scheme, per_run in cfgs.items():
        seq = encode_static(mask, cfg_for(scheme, mask))
        assert len(seq) % per_run == 0
        n = len(seq) // per_run
        runs = n if runs is None else runs
        assert n == runs
    two_d = SchemeConfig(Scheme.NAIVE_MC, 10, 10, 3, start_mode=StartMode.TWO_D)
    assert len(encode_static(mask, two_d)) == 4 * runs
    bin_mask = LabelMask((mask.labels > 0).astype(int), 1)
    two_d_bin = SchemeConfig(Scheme.NAIVE_BIN, 10, 10, 1, start_mode=StartMode.TWO_D)
    seq = encode_static(bin_mask, two_d_bin)
    assert len(seq) % 3 == 0


def test_naive_is_exactly_1_5x_lac():
    rng = np.random.default_rng(4)
    for _ in range(50):
        mask = random_mask(rng, int(rng.integers(2, 30)), int(rng.integers(2, 30)), 4)
        naive = encode_static(mask, cfg_for(Scheme.NAIVE_MC, mask))
        lac = encode_static(mask, cfg_for(Scheme.LAC, mask))
        assert 2 * len(naive) == 3 * len(lac)


def test_run_splitting_under_max_len():
    mask = LabelMask(np.ones((1, 20), dtype=int), 1)
    cfg = SchemeConfig(Scheme.NAIVE_BIN, 1, 20, 1, max_len=8)
    seq = encode_static(mask, cfg)
    assert len(seq) == 6  # three pieces of 8 + 8 + 4
    assert decode_static(seq).same_as(mask)


def test_order_invariance_for_absolute_start_schemes():
    rng = np.random.default_rng(5)
    for scheme in (Scheme.NAIVE_BIN, Scheme.NAIVE_MC, Scheme.LAC):
        c = 1 if scheme.binary_only else 3
        mask = random_mask(rng, 12, 9, c)
        base = cfg_for(scheme, mask)
        canonical = decode_static(encode_static(mask, base))
        for seed in range(4):
            cfg = dataclasses.replace(base, run_order="shuffled", shuffle_seed=seed)
            assert decode_static(encode_static(mask, cfg)).same_as(canonical)


def test_bac_order_dependence_negative():
    rng = np.random.default_rng(6)
    mismatched = 0
    for seed in range(6):
        mask = random_mask(rng, 10, 10, 2)
        cfg = SchemeConfig(Scheme.BAC, 10, 10, 2, run_order="shuffled", shuffle_seed=seed)
        decoded = decode_static(encode_static(mask, cfg))
        mismatched += int(not decoded.same_as(mask))
    assert mismatched > 0


def test_diff_order_dependence_strict_parse_error():
    rng = np.random.default_rng(7)
    mask = random_mask(rng, 10, 10, 1)
    cfg = SchemeConfig(Scheme.DIFF_BIN, 10, 10, 1, run_order="shuffled", shuffle_seed=3)
    seq = encode_static(mask, cfg)
    with pytest.raises(ParseError):
        decode_static(seq)


def test_strict_parse_errors():
    mask = EXAMPLE
    cfg = cfg_for(Scheme.NAIVE_BIN, mask)
    seq = encode_static(mask, cfg)
    # truncated group
    broken = TokenSequence(seq.ids[:-1], cfg, seq.layout)
    with pytest.raises(ParseError) as err:
        decode_static(broken)
    assert err.value.position == 4
    # wrong segment at a length position
    ids = seq.ids.copy()
    ids[1] = 0  # a start id where a length is required
    with pytest.raises(ParseError) as err:
        decode_static(TokenSequence(ids, cfg, seq.layout))
    assert err.value.position == 1
    # overlapping runs
    start = seq.layout.segment(SegmentKind.START).offset
    length = seq.layout.segment(SegmentKind.LENGTH).offset
    overlap = make_sequence([start + 0, length + 2, start + 1, length + 0], cfg)
    with pytest.raises(ValidationError):
        decode_static(overlap)
    # BAC coverage mismatch
    bcfg = cfg_for(Scheme.BAC, mask, max_len=10)
    blayout = encode_static(mask, bcfg).layout
    bad = make_sequence([blayout.id_of(SegmentKind.LENGTH, 0), blayout.id_of(SegmentKind.CLASS, 1)], bcfg)
    with pytest.raises(ParseError):
        decode_static(bad)
    # DIFF non-monotonic
    dcfg = cfg_for(Scheme.DIFF_BIN, mask)
    dlayout = encode_static(mask, dcfg).layout
    nonmono = make_sequence([5, 5], dcfg)
    with pytest.raises(ParseError):
        decode_static(nonmono)


def test_lenient_decoding_repairs():
    rng = np.random.default_rng(8)
    mask = random_mask(rng, 8, 8, 2)
    cfg = cfg_for(Scheme.NAIVE_MC, mask)
    seq = encode_static(mask, cfg)
    v = seq.layout.total
    # stray ids everywhere still decode to a valid mask
    noisy_ids = seq.ids.copy()
    noisy_ids[::3] = v - 1
    noisy = TokenSequence(noisy_ids, cfg, seq.layout)
    out = decode_static(noisy, mode="lenient")
    assert out.height == 8 and int(out.labels.max()) <= 2
    # trailing fragment dropped
    frag = TokenSequence(seq.ids[: len(seq) - 1], cfg, seq.layout)
    out2 = decode_static(frag, mode="lenient")
    assert out2.height == 8
    # empty payload decodes to all background
    assert decode_static(make_sequence([], cfg), mode="lenient").labels.max() == 0
    assert decode_static(make_sequence([], cfg)).labels.max() == 0


def test_lenient_snaps_to_nearest_legal_value():
    cfg = SchemeConfig(Scheme.NAIVE_BIN, 2, 5, 1)
    layout = encode_static(EXAMPLE, cfg).layout
    # length id one past the segment end snaps back to the largest length
    start = layout.segment(SegmentKind.START)
    too_big = start.size + layout.segment(SegmentKind.LENGTH).size  # past the vocab end is rejected by TokenSequence
    ids = [start.offset + 0, start.offset + 1]  # a start where a length belongs
    out = decode_static(make_sequence(ids, cfg), mode="lenient")
    # nearest legal length id is the smallest length token
    assert out.labels.reshape(-1).tolist()[0:2] == [1, 1] or out.labels.reshape(-1).tolist()[0] == 1


def test_split_stream_examples():
    one_run = LabelMask(np.array([[0, 1, 1, 0]]), 1)
    cfg = SchemeConfig(Scheme.SPLIT_STREAM, 1, 4, 1, start_mode=StartMode.TWO_D)
    streams = encode_split_stream(one_run, cfg)
    assert streams.num_runs == 1
    assert all(len(s) == 1 for s in streams.streams().values())
    assert decode_split_stream(streams).same_as(one_run)

    empty = LabelMask(np.zeros((1, 4), dtype=int), 1)
    assert encode_split_stream(empty, cfg).num_runs == 0

    rng = np.random.default_rng(9)
    mask = random_mask(rng, 12, 10, 3)
    cfg3 = SchemeConfig(Scheme.SPLIT_STREAM, 12, 10, 3, start_mode=StartMode.TWO_D)
    st = encode_split_stream(mask, cfg3)
    assert decode_split_stream(st).same_as(mask)
    sizes = {name: st.layouts[name].total for name in st.layouts}
    assert sizes == {"sy": 12, "sx": 10, "len": 10, "cls": 3}


def test_split_stream_rejects_via_encode_static():
    cfg = SchemeConfig(Scheme.SPLIT_STREAM, 2, 2, 1, start_mode=StartMode.TWO_D)
    with pytest.raises(ValidationError):
        encode_static(LabelMask(np.zeros((2, 2), dtype=int), 1), cfg)


def test_label_budget_enforced():
    mask = LabelMask(np.array([[2]]), 2)
    cfg = SchemeConfig(Scheme.NAIVE_BIN, 1, 1, 2)
    with pytest.raises(ValidationError):
        encode_static(mask, cfg)
    small = SchemeConfig(Scheme.NAIVE_MC, 1, 1, 1)
    with pytest.raises(ValidationError):
        encode_static(mask, small)
