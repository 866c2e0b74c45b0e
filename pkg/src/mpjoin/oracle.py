"""Ground-truth self-join implementations used to validate the tiled engine.

Two independent references:

* :func:`brute_force_fp64` computes distances in FP64 using the direct
  subtract-square form, deliberately avoiding the norm-expansion identity
  so it shares no failure modes with the mixed-precision pipeline.  Its
  threshold compares the FP64 square root against epsilon.
* :func:`reference_mixed_scalar` mirrors the mixed-precision arithmetic
  contract pair by pair without any tiling, staging, or compiled kernels;
  the tiled engine must match it bit for bit.
"""

from __future__ import annotations

import numpy as np

from .dataset import Dataset, HalfDataset
from .errors import AccumulatorOverflow, ArgumentError
from .mma import add_rz, combine_distance
from .tiling import ResultSet, make_result_set

__all__ = ["brute_force_fp64", "reference_mixed_scalar", "pairwise_sqdist_fp64"]


def pairwise_sqdist_fp64(values: np.ndarray, rows: np.ndarray | None = None) -> np.ndarray:
    """FP64 squared distances, direct form, sequential ascending k.

    values: (n, d) float-like.  rows: optional row index subset; result is
    (len(rows), n).  Accumulation is one FP64 addition per dimension in
    ascending order.
    """
    x = np.asarray(values, dtype=np.float64)
    n, d = x.shape
    sel = x if rows is None else x[rows]
    acc = np.zeros((sel.shape[0], n), dtype=np.float64)
    for k in range(d):
        t = sel[:, k][:, None] - x[:, k][None, :]
        acc += t * t
    return acc


def brute_force_fp64(ds: Dataset, epsilon: float) -> ResultSet:
    """All ordered pairs (self-pairs included) with FP64 distance <= epsilon."""
    if not np.isfinite(epsilon) or epsilon < 0:
        raise ArgumentError(f"epsilon must be finite and >= 0, got {epsilon}")
    n = ds.n
    chunk = max(1, (1 << 21) // n)
    parts_i, parts_j, parts_d = [], [], []
    for r0 in range(0, n, chunk):
        rows = np.arange(r0, min(r0 + chunk, n))
        d2 = pairwise_sqdist_fp64(ds.values, rows)
        keep = np.sqrt(d2) <= epsilon
        rr, cc = np.nonzero(keep)
        parts_i.append((rows[rr] + 1).astype(np.uint32))
        parts_j.append((cc + 1).astype(np.uint32))
        parts_d.append(d2[rr, cc])
    return make_result_set(
        np.concatenate(parts_i),
        np.concatenate(parts_j),
        np.concatenate(parts_d),
        n=n,
        epsilon=float(epsilon),
    )


def reference_mixed_scalar(hd: HalfDataset, epsilon: float) -> ResultSet:
    """Order-exact mixed-precision self-join without tiling.

    Per pair: exact FP32 products of widened FP16 coordinates, accumulated
    with round-toward-zero in ascending k, combined with the precomputed
    norms, clamped, and thresholded in squared space.  Bit-exact target
    for :func:`mpjoin.tiling.self_join`.
    """
    if not np.isfinite(epsilon) or epsilon < 0:
        raise ArgumentError(f"epsilon must be finite and >= 0, got {epsilon}")
    eps32 = np.float32(epsilon)
    eps_sq = np.float32(eps32 * eps32)
    wide = hd.values.astype(np.float32)
    n_pad = hd.n_padded
    n = hd.n_logical
    chunk = max(1, (1 << 21) // n_pad)
    parts_i, parts_j, parts_d = [], [], []
    for r0 in range(0, n, chunk):
        r1 = min(r0 + chunk, n)
        acc = np.zeros((r1 - r0, n_pad), dtype=np.float32)
        for k in range(hd.d_padded):
            prod = wide[r0:r1, k][:, None] * wide[:, k][None, :]
            acc = add_rz(acc, prod)
        if not np.isfinite(acc).all():
            rr, cc = np.argwhere(~np.isfinite(acc))[0]
            raise AccumulatorOverflow(
                f"accumulator overflow for pair ({r0 + int(rr) + 1}, {int(cc) + 1})"
            )
        d2 = combine_distance(acc, hd.norms[r0:r1][:, None], hd.norms[None, :])
        keep = d2 <= eps_sq
        keep[:, n:] = False  # drop padding columns
        rr, cc = np.nonzero(keep)
        parts_i.append((rr + (r0 + 1)).astype(np.uint32))
        parts_j.append((cc + 1).astype(np.uint32))
        parts_d.append(d2[rr, cc])
    return make_result_set(
        np.concatenate(parts_i),
        np.concatenate(parts_j),
        np.concatenate(parts_d),
        n=n,
        epsilon=float(epsilon),
    )
