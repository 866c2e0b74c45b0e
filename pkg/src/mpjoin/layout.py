"""XOR-swizzled shared-memory layout simulator with bank-conflict counting.

Shared memory is modeled as 128-byte rows of eight 16-byte slots; a slot
stands for a group of four 4-byte banks, which is the granularity every
access in the algorithm uses.  Two concurrent accesses conflict when they
land in the same slot index, regardless of row.

Point indices are 1-based in the public API, matching the address formula

    dest = 8 * (i - 1) + (s XOR ((i - 1) mod 8))

where ``s`` is the 0-based index of an 8-dimension slice within a point's
64-dimension row.  The XOR applies to the slot index only; the row part
``8 * (i - 1)`` is untouched, so swizzling permutes slots within a row.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

from .errors import ArgumentError

__all__ = [
    "SlotAddress",
    "AccessTrace",
    "ConflictReport",
    "swizzle_address",
    "store_trace",
    "ldmatrix_trace",
    "count_conflicts",
]

SLOTS_PER_ROW = 8
Layout = Literal["swizzled", "row_major"]


@dataclass(frozen=True)
class SlotAddress:
    """A 16-byte chunk position: shared-memory row and slot 0..7 within it."""

    row: int
    slot: int

    def __post_init__(self):
        if not 0 <= self.slot < SLOTS_PER_ROW:
            raise ArgumentError(f"slot {self.slot} out of range 0..7")


@dataclass(frozen=True)
class AccessTrace:
    """Ordered phases; each phase is one 128-byte transaction of 8 accesses.

    Every access is (lane, SlotAddress) with lane 0..7 inside the phase.
    """

    phases: tuple

    def __post_init__(self):
        for idx, phase in enumerate(self.phases):
            if len(phase) != SLOTS_PER_ROW:
                raise ArgumentError(f"phase {idx} has {len(phase)} accesses, expected 8")


@dataclass(frozen=True)
class ConflictReport:
    """Per-phase conflict degree; degree 1 means conflict-free."""

    per_phase: tuple

    @property
    def max_degree(self) -> int:
        return max(self.per_phase)

    @property
    def conflict_free(self) -> bool:
        return self.max_degree == 1


def _check_layout(layout: str) -> None:
    if layout not in ("swizzled", "row_major"):
        raise ArgumentError(f"layout must be 'swizzled' or 'row_major', got {layout!r}")


def swizzle_address(i: int, s: int) -> SlotAddress:
    """Destination of slice ``s`` of point ``i`` (1-based) under swizzling."""
    if i < 1:
        raise ArgumentError(f"point index {i} must be >= 1")
    if not 0 <= s < SLOTS_PER_ROW:
        raise ArgumentError(f"slice index {s} out of range 0..7")
    flat = SLOTS_PER_ROW * (i - 1) + (s ^ ((i - 1) % SLOTS_PER_ROW))
    return SlotAddress(row=flat // SLOTS_PER_ROW, slot=flat % SLOTS_PER_ROW)


def _address(i: int, s: int, layout: str) -> SlotAddress:
    if layout == "swizzled":
        return swizzle_address(i, s)
    return SlotAddress(row=i - 1, slot=s)


def store_trace(first_point: int = 1, layout: Layout = "swizzled") -> AccessTrace:
    """Trace of storing a 64-dimension k-slice of 8 consecutive points.

    Phase s issues the 8 concurrent stores of slice s, one per point
    first_point..first_point+7; lane is the point offset within the group.
    """
    if first_point < 1:
        raise ArgumentError(f"first_point {first_point} must be >= 1")
    _check_layout(layout)
    phases = []
    for s in range(SLOTS_PER_ROW):
        phases.append(
            tuple(
                (lane, _address(first_point + lane, s, layout))
                for lane in range(SLOTS_PER_ROW)
            )
        )
    return AccessTrace(tuple(phases))


def ldmatrix_trace(
    first_point: int = 1, k_offset: int = 0, layout: Layout = "swizzled"
) -> AccessTrace:
    """Trace of loading a 16-point x 16-dimension fragment in 4 phases.

    The fragment covers points first_point..first_point+15 and the two
    consecutive 8-dimension slices (k_offset, k_offset + 1):

    * phase 0: points 1..8 of the fragment, slice k_offset
    * phase 1: points 9..16, slice k_offset
    * phase 2: points 1..8, slice k_offset + 1
    * phase 3: points 9..16, slice k_offset + 1
    """
    if first_point < 1:
        raise ArgumentError(f"first_point {first_point} must be >= 1")
    if not 0 <= k_offset < SLOTS_PER_ROW - 1:
        raise ArgumentError(f"k_offset {k_offset} out of range 0..6 (needs slices s and s+1)")
    _check_layout(layout)
    phases = []
    for s in (k_offset, k_offset + 1):
        for half in range(2):
            base = first_point + 8 * half
            phases.append(
                tuple((lane, _address(base + lane, s, layout)) for lane in range(8))
            )
    return AccessTrace(tuple(phases))


def count_conflicts(trace: AccessTrace) -> ConflictReport:
    """Max same-slot multiplicity per phase (rows do not disambiguate)."""
    degrees = []
    for phase in trace.phases:
        slots = [addr.slot for _, addr in phase]
        degrees.append(max(slots.count(v) for v in set(slots)))
    return ConflictReport(tuple(degrees))
