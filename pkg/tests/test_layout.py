"""Swizzled layout simulator tests: addressing, traces, conflict counting."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpjoin import (
    AccessTrace,
    ArgumentError,
    SlotAddress,
    count_conflicts,
    ldmatrix_trace,
    store_trace,
    swizzle_address,
)


# ── swizzle address formula ──────────────────────────────────────────────


def test_swizzle_point_one_is_identity():
    assert swizzle_address(1, 3) == SlotAddress(row=0, slot=3)


def test_swizzle_point_two_moves_one_over():
    assert swizzle_address(2, 0) == SlotAddress(row=1, slot=1)


def test_swizzle_point_nine_wraps_back_to_identity():
    assert swizzle_address(9, 3) == SlotAddress(row=8, slot=3)


def test_swizzle_argument_errors():
    with pytest.raises(ArgumentError):
        swizzle_address(1, 8)
    with pytest.raises(ArgumentError):
        swizzle_address(1, -1)
    with pytest.raises(ArgumentError):
        swizzle_address(0, 0)


@given(st.integers(1, 4096))
def test_swizzle_permutes_slots_within_each_row(i):
    addrs = [swizzle_address(i, s) for s in range(8)]
    assert all(a.row == i - 1 for a in addrs)
    assert sorted(a.slot for a in addrs) == list(range(8))


def test_swizzle_is_global_bijection():
    seen = set()
    for i in range(1, 257):
        for s in range(8):
            a = swizzle_address(i, s)
            seen.add((a.row, a.slot))
    assert len(seen) == 256 * 8


@given(st.integers(1, 4096), st.integers(0, 7))
def test_swizzle_xor_is_an_involution(i, s):
    # A load that re-applies the same XOR recovers the stored slice index.
    stored = swizzle_address(i, s)
    assert stored.slot ^ ((i - 1) % 8) == s


# ── store trace ──────────────────────────────────────────────────────────


def test_store_trace_swizzled_phases_are_permutations():
    trace = store_trace(first_point=1, layout="swizzled")
    assert len(trace.phases) == 8
    for phase in trace.phases:
        assert sorted(addr.slot for _, addr in phase) == list(range(8))


def test_store_trace_row_major_phase_hits_one_slot():
    trace = store_trace(first_point=1, layout="row_major")
    for s, phase in enumerate(trace.phases):
        assert [addr.slot for _, addr in phase] == [s] * 8
        assert [addr.row for _, addr in phase] == list(range(8))


def test_store_trace_periodicity_mod_8():
    a = store_trace(first_point=1, layout="swizzled")
    b = store_trace(first_point=9, layout="swizzled")
    for pa, pb in zip(a.phases, b.phases):
        assert [addr.slot for _, addr in pa] == [addr.slot for _, addr in pb]


def test_store_trace_lane_is_point_offset():
    trace = store_trace(first_point=5, layout="row_major")
    for s, phase in enumerate(trace.phases):
        for lane, addr in phase:
            assert addr.row == (5 + lane) - 1
            assert addr.slot == s


# ── ldmatrix trace ───────────────────────────────────────────────────────


def test_ldmatrix_swizzled_is_conflict_free():
    report = count_conflicts(ldmatrix_trace(first_point=1, k_offset=0, layout="swizzled"))
    assert report.per_phase == (1, 1, 1, 1)
    assert report.conflict_free


def test_ldmatrix_row_major_is_eight_way_conflicted():
    report = count_conflicts(ldmatrix_trace(first_point=1, k_offset=0, layout="row_major"))
    assert report.per_phase == (8, 8, 8, 8)
    assert report.max_degree == 8


def test_ldmatrix_phase_structure():
    trace = ldmatrix_trace(first_point=17, k_offset=2, layout="row_major")
    # phase 0: points 17..24 slice 2; phase 1: 25..32 slice 2;
    # phase 2: 17..24 slice 3; phase 3: 25..32 slice 3
    expect = [(17, 2), (25, 2), (17, 3), (25, 3)]
    for phase, (base, s) in zip(trace.phases, expect):
        for lane, addr in phase:
            assert addr.row == (base + lane) - 1
            assert addr.slot == s


def test_ldmatrix_translation_invariance():
    base = count_conflicts(ldmatrix_trace(1, 0, "swizzled")).per_phase
    for first in (17, 33, 49, 65, 113):
        assert count_conflicts(ldmatrix_trace(first, 0, "swizzled")).per_phase == base


def test_ldmatrix_k_offset_validation():
    with pytest.raises(ArgumentError):
        ldmatrix_trace(1, 7, "swizzled")  # slice pair would run past slot 7
    with pytest.raises(ArgumentError):
        ldmatrix_trace(1, -1, "swizzled")


def test_trace_layout_validation():
    with pytest.raises(ArgumentError):
        store_trace(1, "diagonal")
    with pytest.raises(ArgumentError):
        ldmatrix_trace(0, 0, "swizzled")


# ── conflict counting ────────────────────────────────────────────────────


def _phase_of_slots(slots, rows=None):
    rows = rows if rows is not None else range(len(slots))
    return tuple((lane, SlotAddress(row=r, slot=s)) for lane, (r, s) in enumerate(zip(rows, slots)))


def test_count_conflicts_all_distinct():
    trace = AccessTrace((_phase_of_slots([0, 1, 2, 3, 4, 5, 6, 7]),))
    assert count_conflicts(trace).per_phase == (1,)


def test_count_conflicts_all_same():
    trace = AccessTrace((_phase_of_slots([5] * 8),))
    assert count_conflicts(trace).per_phase == (8,)


def test_count_conflicts_pairs():
    trace = AccessTrace((_phase_of_slots([0, 0, 1, 1, 2, 2, 3, 3]),))
    assert count_conflicts(trace).per_phase == (2,)


def test_count_conflicts_rows_do_not_disambiguate():
    # same slot in different rows still conflicts
    trace = AccessTrace((_phase_of_slots([4] * 8, rows=range(8)),))
    assert count_conflicts(trace).per_phase == (8,)


def test_access_trace_requires_eight_lanes():
    with pytest.raises(ArgumentError):
        AccessTrace((_phase_of_slots([0, 1, 2]),))
