"""Emulated 16x8x16 tensor-core multiply-accumulate with a fixed rounding contract.

The arithmetic contract, used everywhere a mixed-precision dot product is
formed:

* Multiplicands are FP16.  They are widened to FP32 before multiplying;
  the widening is exact, and so is the product (11-bit significands square
  into at most 22 bits, which FP32 holds exactly).
* Accumulation is FP32 with round-toward-zero (RZ), applied term by term
  in ascending k order.  Chaining k-slices accumulates in ascending slice
  order, so a d-dimensional dot product is one well-defined sequence of
  RZ additions regardless of how it is tiled.
* The final distance combine runs on the FP32 round-to-nearest-even path,
  mirroring a scalar epilogue rather than the matrix unit.

``add_rz`` implements the RZ addition exactly: the FP64 sum of two FP32
values plus its 2Sum residual represents the exact real sum, and the
round-to-nearest FP32 result is stepped one ulp toward zero whenever the
exact value lies on the zero side of it.  This is bit-reproducible across
platforms because it only uses IEEE-754 default operations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AccumulatorOverflow, ArgumentError

__all__ = [
    "FragmentP",
    "FragmentQ",
    "FragmentAcc",
    "add_rz",
    "mma",
    "combine_distance",
]

P_ROWS = 16  # points per P fragment
Q_COLS = 8   # query points per Q fragment
K_STEP = 16  # dimensions consumed by one multiply-accumulate


def add_rz(a, b):
    """FP32 addition rounded toward zero, elementwise on arrays or scalars.

    Both operands must already be FP32 values (arrays of dtype float32, or
    scalars exactly representable in FP32).  Returns float32.
    """
    a64 = np.asarray(a, dtype=np.float64)
    b64 = np.asarray(b, dtype=np.float64)
    s = a64 + b64
    # 2Sum: err is the exact residual of the FP64 addition, so s + err
    # equals the exact real sum of the two FP32 inputs.
    bb = s - a64
    err = (a64 - (s - bb)) + (b64 - bb)
    r = s.astype(np.float32)
    t = (s - r.astype(np.float64)) + err
    step = ((r > 0) & (t < 0)) | ((r < 0) & (t > 0))
    out = np.where(step, np.nextafter(r, np.float32(0.0)), r)
    if out.ndim == 0:
        return np.float32(out)
    return out


def _as_fragment(values, shape, dtype, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    if arr.shape != shape:
        raise ArgumentError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.isfinite(arr.astype(np.float32)).all():
        raise ArgumentError(f"{name} entries must all be finite")
    return arr


@dataclass(frozen=True)
class FragmentP:
    """16 points x 16 dimensions of FP16 coordinates."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "data", _as_fragment(self.data, (P_ROWS, K_STEP), np.float16, "FragmentP")
        )

    @classmethod
    def zeros(cls) -> "FragmentP":
        return cls(np.zeros((P_ROWS, K_STEP), dtype=np.float16))


@dataclass(frozen=True)
class FragmentQ:
    """16 dimensions x 8 query points of FP16 coordinates (transposed role)."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "data", _as_fragment(self.data, (K_STEP, Q_COLS), np.float16, "FragmentQ")
        )

    @classmethod
    def zeros(cls) -> "FragmentQ":
        return cls(np.zeros((K_STEP, Q_COLS), dtype=np.float16))


@dataclass(frozen=True)
class FragmentAcc:
    """16x8 FP32 accumulator fragment."""

    data: np.ndarray = field(default_factory=lambda: np.zeros((P_ROWS, Q_COLS), np.float32))

    def __post_init__(self):
        object.__setattr__(
            self, "data", _as_fragment(self.data, (P_ROWS, Q_COLS), np.float32, "FragmentAcc")
        )

    @classmethod
    def zeros(cls) -> "FragmentAcc":
        return cls()


def mma(p: FragmentP, q: FragmentQ, c: FragmentAcc) -> FragmentAcc:
    """One 16x8x16 multiply-accumulate: result = p x q + c under the RZ contract.

    For every output cell the 16 products are added to the starting
    accumulator one at a time in ascending k, each addition rounded toward
    zero.  Raises :class:`AccumulatorOverflow` if any cell reaches infinity.
    """
    pw = p.data.astype(np.float32)
    qw = q.data.astype(np.float32)
    acc = c.data.copy()
    for k in range(K_STEP):
        prod = pw[:, k][:, None] * qw[k, :][None, :]  # exact in FP32
        acc = add_rz(acc, prod)
    if not np.isfinite(acc).all():
        r, c_ = np.argwhere(~np.isfinite(acc))[0]
        raise AccumulatorOverflow(f"accumulator overflow at cell ({r}, {c_})")
    return FragmentAcc(acc)


def combine_distance(a, s_i, s_j):
    """Squared distance from a dot product and two squared norms.

    Evaluates ((-2 * a) + s_i) + s_j in FP32 round-to-nearest-even, then
    clamps negatives (possible from rounding when points nearly coincide)
    to zero.  Accepts scalars or broadcastable float32 arrays.
    """
    a32 = np.asarray(a, dtype=np.float32)
    si32 = np.asarray(s_i, dtype=np.float32)
    sj32 = np.asarray(s_j, dtype=np.float32)
    d2 = (np.float32(-2.0) * a32 + si32) + sj32
    out = np.maximum(d2, np.float32(0.0))
    if out.ndim == 0:
        return np.float32(out)
    return out
