"""Point dataset loading, synthesis, FP16 conversion, and norm precompute.

Datasets are row-major matrices of FP32 coordinates.  The fvecs ingestion
format is the common binary layout for vector-search benchmarks: each
record is a 4-byte little-endian int32 dimension header followed by that
many little-endian FP32 values, repeated back to back.

Conversion to the half-precision working form pads the point count up to a
multiple of the block-tile side and the dimensionality up to a multiple of
the k-slice width, with exact zeros, and precomputes per-point squared
norms under the round-toward-zero contract of :mod:`mpjoin.mma`.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .errors import ArgumentError, FormatError, RangeError

__all__ = [
    "Dataset",
    "HalfDataset",
    "load_fvecs",
    "generate_synthetic",
    "to_half",
    "compute_squared_norms",
]

DEFAULT_BLOCK_SIDE = 128
DEFAULT_KSLICE = 16

FP16_MAX = 65504.0


@dataclass(frozen=True)
class Dataset:
    """n x d row-major matrix of finite FP32 coordinates, n >= 1, d >= 1."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.values, dtype=np.float32)
        if arr.ndim != 2:
            raise ArgumentError(f"values must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ArgumentError(f"dataset must have n >= 1 and d >= 1, got {arr.shape}")
        if not np.isfinite(arr).all():
            i, k = np.argwhere(~np.isfinite(arr))[0]
            raise ArgumentError(f"non-finite coordinate at point {i}, dimension {k}")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class HalfDataset:
    """Zero-padded FP16 working copy of a dataset plus FP32 squared norms.

    Rows beyond ``n_logical`` and columns beyond ``d_logical`` are exactly
    zero; padded rows have norm 0.  ``norms[i]`` is the sequential
    ascending-k round-toward-zero FP32 sum of the exact squares of the
    widened FP16 coordinates of point i.
    """

    n_logical: int
    d_logical: int
    values: np.ndarray  # (n_padded, d_padded) float16
    norms: np.ndarray   # (n_padded,) float32

    @property
    def n_padded(self) -> int:
        return self.values.shape[0]

    @property
    def d_padded(self) -> int:
        return self.values.shape[1]


def load_fvecs(path) -> Dataset:
    """Read an fvecs file into a Dataset.

    Raises :class:`FormatError` naming the byte offset of the first
    malformed record, on inconsistent dimension headers, and on empty
    files (a dataset must contain at least one point).
    """
    with open(path, "rb") as f:
        raw = f.read()
    size = len(raw)
    if size == 0:
        raise FormatError(f"{os.fspath(path)}: empty file, a dataset needs n >= 1")
    if size < 4:
        raise FormatError(f"{os.fspath(path)}: truncated dimension header at byte offset 0")
    d = int(np.frombuffer(raw, dtype="<i4", count=1)[0])
    if d <= 0:
        raise FormatError(f"{os.fspath(path)}: dimension header {d} at byte offset 0 must be >= 1")
    stride = 4 + 4 * d
    if size % stride != 0:
        # Walk records to name the first offset that breaks the layout.
        off = 0
        while off + stride <= size:
            hdr = int(np.frombuffer(raw, dtype="<i4", count=1, offset=off)[0])
            if hdr != d:
                raise FormatError(
                    f"{os.fspath(path)}: inconsistent dimension {hdr} (first record had {d}) "
                    f"at byte offset {off}"
                )
            off += stride
        raise FormatError(
            f"{os.fspath(path)}: truncated record at byte offset {off} "
            f"({size - off} bytes left, record needs {stride})"
        )
    n = size // stride
    headers = np.frombuffer(raw, dtype="<i4").reshape(n, 1 + d)[:, 0]
    bad = np.nonzero(headers != d)[0]
    if bad.size:
        off = int(bad[0]) * stride
        raise FormatError(
            f"{os.fspath(path)}: inconsistent dimension {int(headers[bad[0]])} "
            f"(first record had {d}) at byte offset {off}"
        )
    values = np.frombuffer(raw, dtype="<f4").reshape(n, 1 + d)[:, 1:]
    return Dataset(values.astype(np.float32))


def generate_synthetic(n: int, d: int, seed: int, lo: float = 0.0, hi: float = 1.0) -> Dataset:
    """Deterministic i.i.d. uniform [lo, hi) coordinates.

    Pure function of its arguments: identical inputs give bit-identical
    matrices.  Stands in for the synthetic benchmark family whose exact
    distribution is not otherwise pinned down.
    """
    if n < 1 or d < 1:
        raise ArgumentError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if not (lo < hi) or not np.isfinite(hi - lo):
        raise ArgumentError(f"need lo < hi with finite span, got [{lo}, {hi})")
    rng = np.random.default_rng(seed)
    unit = rng.random((n, d), dtype=np.float32)
    values = unit * np.float32(hi - lo) + np.float32(lo)
    return Dataset(values)


def _norms_rz(values16: np.ndarray) -> np.ndarray:
    wide = np.ascontiguousarray(values16, dtype=np.float32)
    out = np.empty(wide.shape[0], dtype=np.float32)
    _kernel.squared_norms_rz(wide, out)
    return out


def compute_squared_norms(hd: HalfDataset) -> np.ndarray:
    """FP32 squared norms of every (padded) point under the RZ contract."""
    return _norms_rz(hd.values)


def to_half(
    ds: Dataset,
    block_side: int = DEFAULT_BLOCK_SIDE,
    kslice: int = DEFAULT_KSLICE,
) -> HalfDataset:
    """Convert to FP16 (round-to-nearest-even), zero-pad, and precompute norms.

    Raises :class:`RangeError` for any coordinate whose FP16 conversion
    overflows to infinity, naming the point and the value.
    """
    if block_side < 1 or kslice < 1:
        raise ArgumentError("block_side and kslice must be >= 1")
    half = ds.values.astype(np.float16)
    over = np.isinf(half)
    if over.any():
        i, k = np.argwhere(over)[0]
        raise RangeError(
            f"coordinate {ds.values[i, k]!r} of point {i} (dimension {k}) "
            f"exceeds the FP16 range (max {FP16_MAX})"
        )
    n_padded = -(-ds.n // block_side) * block_side
    d_padded = -(-ds.d // kslice) * kslice
    values = np.zeros((n_padded, d_padded), dtype=np.float16)
    values[: ds.n, : ds.d] = half
    return HalfDataset(
        n_logical=ds.n,
        d_logical=ds.d,
        values=values,
        norms=_norms_rz(values),
    )
