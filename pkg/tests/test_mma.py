"""Multiply-accumulate contract tests against exact rational-arithmetic oracles."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpjoin import ArgumentError, FragmentAcc, FragmentP, FragmentQ, add_rz, combine_distance, mma

from _oracles import rz_add, rz_dot

f32 = np.float32

finite_f32 = st.floats(width=32, allow_nan=False, allow_infinity=False)


# ── add_rz: the round-toward-zero primitive ─────────────────────────────


@given(finite_f32, finite_f32)
def test_add_rz_matches_exact_oracle(a, b):
    got = float(add_rz(f32(a), f32(b)))
    want = rz_add(float(f32(a)), float(f32(b)))
    assert f32(got) == f32(want) or (np.isinf(want) and np.isinf(got))


def test_add_rz_truncates_where_nearest_would_round_up():
    # exact sum 1 + 1.5 * 2**-24 lies above 1.0; nearest-even goes up, RZ stays.
    a, b = f32(1.0), f32(3 * 2.0**-25)
    assert float(f32(1.0) + b) == 1.0 + 2.0**-23  # numpy RN rounds up
    assert float(add_rz(a, b)) == 1.0
    assert float(add_rz(-a, -b)) == -1.0


def test_add_rz_vectorized_matches_scalar():
    rng = np.random.default_rng(11)
    a = (rng.random(256, dtype=np.float32) - 0.5) * rng.choice(
        [2.0**-30, 1.0, 2.0**20], size=256
    ).astype(np.float32)
    b = (rng.random(256, dtype=np.float32) - 0.5).astype(np.float32)
    out = add_rz(a, b)
    for k in range(256):
        assert out[k] == add_rz(a[k], b[k])


def test_add_rz_saturates_instead_of_overflowing():
    big = f32(3.4e38)
    out = add_rz(big, big)
    assert np.isfinite(out)
    assert out == np.finfo(np.float32).max


# ── fragments ────────────────────────────────────────────────────────────


def test_fragment_shape_validation():
    with pytest.raises(ArgumentError):
        FragmentP(np.zeros((8, 16), np.float16))
    with pytest.raises(ArgumentError):
        FragmentQ(np.zeros((8, 16), np.float16))
    with pytest.raises(ArgumentError):
        FragmentAcc(np.zeros((16, 16), np.float32))


def test_fragment_rejects_non_finite():
    bad = np.zeros((16, 16), np.float16)
    bad[3, 5] = np.inf
    with pytest.raises(ArgumentError):
        FragmentP(bad)


# ── mma ──────────────────────────────────────────────────────────────────


def test_mma_all_zero():
    out = mma(FragmentP.zeros(), FragmentQ.zeros(), FragmentAcc.zeros())
    assert np.array_equal(out.data, np.zeros((16, 8), np.float32))


def test_mma_identity_reproduces_q():
    rng = np.random.default_rng(5)
    q = FragmentQ((rng.random((16, 8)) - 0.5).astype(np.float16))
    p = FragmentP(np.eye(16, dtype=np.float16))
    out = mma(p, q, FragmentAcc.zeros())
    assert np.array_equal(out.data, q.data.astype(np.float32))


def test_mma_equals_integer_matmul_for_small_integers():
    rng = np.random.default_rng(7)
    p = rng.integers(-8, 9, size=(16, 16))
    q = rng.integers(-8, 9, size=(16, 8))
    out = mma(
        FragmentP(p.astype(np.float16)),
        FragmentQ(q.astype(np.float16)),
        FragmentAcc.zeros(),
    )
    assert np.array_equal(out.data, (p @ q).astype(np.float32))


def test_mma_integer_exactness_up_to_181():
    rng = np.random.default_rng(13)
    p = rng.integers(-181, 182, size=(16, 16))
    q = rng.integers(-181, 182, size=(16, 8))
    out = mma(
        FragmentP(p.astype(np.float16)),
        FragmentQ(q.astype(np.float16)),
        FragmentAcc.zeros(),
    )
    assert np.array_equal(out.data, (p @ q).astype(np.float32))


def test_mma_matches_sequential_rz_oracle():
    rng = np.random.default_rng(21)
    p = (rng.random((16, 16)) - 0.5).astype(np.float16)
    q = (rng.random((16, 8)) - 0.5).astype(np.float16)
    out = mma(FragmentP(p), FragmentQ(q), FragmentAcc.zeros())
    for r in range(16):
        for c in range(8):
            want = rz_dot(p[r, :].astype(np.float64), q[:, c].astype(np.float64))
            assert out.data[r, c] == f32(want), (r, c)


def test_mma_chaining_is_one_ordered_32_term_sum():
    # mma(p, q, mma(p0, q0, 0)) must equal the RZ accumulation of the p0
    # slice's 16 terms followed by the p slice's 16 terms, per output cell.
    rng = np.random.default_rng(22)
    p0 = (rng.random((16, 16)) - 0.5).astype(np.float16)
    q0 = (rng.random((16, 8)) - 0.5).astype(np.float16)
    p1 = (rng.random((16, 16)) - 0.5).astype(np.float16)
    q1 = (rng.random((16, 8)) - 0.5).astype(np.float16)
    chained = mma(FragmentP(p1), FragmentQ(q1), mma(FragmentP(p0), FragmentQ(q0), FragmentAcc.zeros()))
    for r in range(16):
        for c in range(8):
            ps = np.concatenate([p0[r, :], p1[r, :]]).astype(np.float64)
            qs = np.concatenate([q0[:, c], q1[:, c]]).astype(np.float64)
            assert chained.data[r, c] == f32(rz_dot(ps, qs)), (r, c)


def test_mma_never_overflows_from_finite_fragments():
    # RZ saturates at max finite, so chaining maximal fragments stays finite.
    p = FragmentP(np.full((16, 16), 65504.0, np.float16))
    q = FragmentQ(np.full((16, 8), 65504.0, np.float16))
    acc = FragmentAcc.zeros()
    for _ in range(50):
        acc = mma(p, q, acc)
    assert np.isfinite(acc.data).all()


# ── combine_distance ─────────────────────────────────────────────────────


def test_combine_orthogonal_unit_vectors():
    assert combine_distance(f32(0.0), f32(1.0), f32(1.0)) == f32(2.0)


def test_combine_self_distance_is_exact_zero():
    for s in [0.0, 1.0, 3.1415927, 1e30, 1.1754944e-38]:
        assert combine_distance(f32(s), f32(s), f32(s)) == f32(0.0)


@given(st.floats(width=32, min_value=0.0, max_value=3e38, allow_nan=False))
def test_combine_self_distance_zero_property(s):
    assert combine_distance(f32(s), f32(s), f32(s)) == f32(0.0)


def test_combine_hand_arithmetic():
    assert combine_distance(f32(3.0), f32(5.0), f32(4.0)) == f32(3.0)


def test_combine_clamps_negative_to_zero():
    assert combine_distance(f32(2.0), f32(1.0), f32(1.0)) == f32(0.0)


def test_combine_evaluation_order_is_fixed():
    # ((-2a) + s_i) + s_j: with a=0.1, s_i=1e8, s_j=-1e8 the fixed order
    # flushes the small term; the opposite grouping would keep it.
    a, si, sj = f32(0.1), f32(1e8), f32(-1e8)
    fixed = (f32(-2.0) * a + si) + sj
    other = f32(-2.0) * a + (si + sj)
    assert fixed != other  # orders are distinguishable here
    got = combine_distance(a, si, sj)
    assert got == max(fixed, f32(0.0))
