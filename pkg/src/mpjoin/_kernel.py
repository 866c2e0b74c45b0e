"""Compiled inner loops for round-toward-zero FP32 accumulation.

The numba kernel and the numpy implementation in :mod:`mpjoin.mma` realize
the same IEEE-754 operation sequence and must stay bit-identical; the test
suite cross-checks them.  Kernels release the GIL so the tiling engine's
worker threads can overlap.
"""

from __future__ import annotations

import numba
import numpy as np
from numba.core import types
from numba.extending import intrinsic

from . import mma as _mma


@intrinsic
def _bits_of_f32(typingctx, x):
    sig = types.uint32(types.float32)

    def codegen(context, builder, signature, args):
        return builder.bitcast(args[0], context.get_value_type(types.uint32))

    return sig, codegen


@intrinsic
def _f32_of_bits(typingctx, x):
    sig = types.float32(types.uint32)

    def codegen(context, builder, signature, args):
        return builder.bitcast(args[0], context.get_value_type(types.float32))

    return sig, codegen


@numba.njit(inline="always")
def _rz_add(a32, b32):
    # FP64 sum + 2Sum residual represent the exact real sum; the RN32
    # result is stepped one ulp toward zero when the exact value lies on
    # the zero side of it.  Branchless so the j loop can vectorize.
    a64 = np.float64(a32)
    b64 = np.float64(b32)
    s = a64 + b64
    bb = s - a64
    err = (a64 - (s - bb)) + (b64 - bb)
    r = np.float32(s)
    t = (s - np.float64(r)) + err
    step = (r > np.float32(0.0) and t < 0.0) or (r < np.float32(0.0) and t > 0.0)
    bits = _bits_of_f32(r)
    bits = bits - numba.uint32(1) if step else bits
    return _f32_of_bits(bits)


@numba.njit(nogil=True, cache=True)
def accumulate_panel(p, qt, acc, k0, k1):
    """acc[i, j] += sum_k p[i, k] * qt[k, j] under the RZ contract, k ascending.

    p: (rows, >=k1) float32, qt: (>=k1, cols) float32, acc: (rows, cols)
    float32, updated in place.  Returns the count of non-finite
    accumulator cells (overflow detection without exceptions).
    """
    rows, cols = acc.shape
    for i in range(rows):
        for k in range(k0, k1):
            pik = p[i, k]
            for j in range(cols):
                acc[i, j] = _rz_add(acc[i, j], pik * qt[k, j])
    bad = 0
    for i in range(rows):
        for j in range(cols):
            if not np.isfinite(acc[i, j]):
                bad += 1
    return bad


@numba.njit(nogil=True, cache=True)
def squared_norms_rz(values, out):
    """Per-row squared norm, RZ-accumulated ascending k.

    values: (n, d) float32 holding exactly-widened FP16 data, so each
    square is exact in FP32.
    """
    n, d = values.shape
    for i in range(n):
        acc = np.float32(0.0)
        for k in range(d):
            v = values[i, k]
            acc = _rz_add(acc, v * v)
        out[i] = acc
    return 0


def accumulate_panel_numpy(p, qt, acc, k0, k1):
    """Numpy twin of :func:`accumulate_panel`; same contract, same bits."""
    for k in range(k0, k1):
        prod = p[:, k][:, None] * qt[k, :][None, :]
        acc[...] = _mma.add_rz(acc, prod)
    return int(np.count_nonzero(~np.isfinite(acc)))


def warmup() -> None:
    """Force JIT compilation so timed sections never include it."""
    p = np.zeros((2, 16), np.float32)
    qt = np.zeros((16, 2), np.float32)
    acc = np.zeros((2, 2), np.float32)
    accumulate_panel(p, qt, acc, 0, 16)
    squared_norms_rz(np.zeros((2, 4), np.float32), np.zeros(2, np.float32))
