"""Block-tiled epsilon self-join over the emulated mixed-precision pipeline.

The distance matrix is swept in ``block_side`` x ``block_side`` tiles
dispatched in a square-grouped raster order from a shared work queue.
Each tile stages two FP16 slabs (point rows and query columns) per
``block_kslice`` dimensions, widening them to FP32 staging buffers, and
consumes them with ``warp_side`` x ``warp_side`` microkernel passes that
step ``warp_kslice`` dimensions at a time.  Per-pair arithmetic follows
the ascending-k round-toward-zero contract of :mod:`mpjoin.mma`, so the
result is bit-identical for every legal tile decomposition and worker
count.

Result pairs use 1-based point indices; self-pairs (i, i) are always
present since every squared self-distance is exactly zero, and both (i, j)
and (j, i) are produced.  Pairs touching zero-padding rows are dropped by
index filtering.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .dataset import HalfDataset
from .errors import AccumulatorOverflow, ArgumentError, ConfigError
from .mma import combine_distance

__all__ = [
    "TileConfig",
    "TileCoord",
    "ResultSet",
    "EngineStats",
    "rasterize_tiles",
    "compute_block_tile",
    "self_join",
]


@dataclass
class TileConfig:
    """Tiling hierarchy parameters; defaults follow the optimized shape."""

    block_side: int = 128      # points per block-tile edge
    block_kslice: int = 64     # dimensions staged per block iteration
    warp_side: int = 64        # points per warp-tile edge
    warp_kslice: int = 16      # dimensions per microkernel step
    dispatch_square: int = 8   # side of the raster square, in block tiles
    prefetch_depth: int = 2    # staged k-slice lookahead (1 disables)
    workers: int = 1
    raster_order: bool = True  # False: plain row-major tile order

    def validate(self) -> None:
        if self.warp_kslice != 16:
            raise ConfigError(f"warp_kslice must be 16, got {self.warp_kslice}")
        if self.warp_side < 16 or self.warp_side % 16 != 0:
            raise ConfigError(f"warp_side {self.warp_side} must be a positive multiple of 16")
        if self.block_side % self.warp_side != 0:
            raise ConfigError(
                f"block_side {self.block_side} not divisible by warp_side {self.warp_side}"
            )
        if self.block_kslice < self.warp_kslice or self.block_kslice % self.warp_kslice != 0:
            raise ConfigError(
                f"block_kslice {self.block_kslice} not a multiple of warp_kslice {self.warp_kslice}"
            )
        if self.dispatch_square < 1:
            raise ConfigError(f"dispatch_square must be >= 1, got {self.dispatch_square}")
        if self.prefetch_depth not in (1, 2):
            raise ConfigError(f"prefetch_depth must be 1 or 2, got {self.prefetch_depth}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class TileCoord:
    row_block: int
    col_block: int


@dataclass
class ResultSet:
    """Pairs (i, j, dist_sq) with dist <= epsilon, canonically sorted by (i, j).

    ``i``/``j`` are 1-based uint32 indices <= n; ``dist_sq`` is float32
    from the mixed-precision paths and float64 from the FP64 oracle.
    """

    i: np.ndarray
    j: np.ndarray
    dist_sq: np.ndarray
    n: int
    epsilon: float

    def __len__(self) -> int:
        return int(self.i.shape[0])

    def index_pairs(self) -> set:
        return set(zip(self.i.tolist(), self.j.tolist()))

    def as_tuples(self):
        return list(zip(self.i.tolist(), self.j.tolist(), self.dist_sq.tolist()))

    def same_pairs(self, other: "ResultSet") -> bool:
        """Same (i, j) index set (distances not compared)."""
        return (
            len(self) == len(other)
            and np.array_equal(self.i, other.i)
            and np.array_equal(self.j, other.j)
        )


def make_result_set(i, j, dist_sq, n: int, epsilon: float) -> ResultSet:
    """Canonicalize pair arrays (sort by (i, j)) into a ResultSet."""
    i = np.asarray(i, dtype=np.uint32)
    j = np.asarray(j, dtype=np.uint32)
    dist_sq = np.asarray(dist_sq)
    order = np.lexsort((j, i))
    return ResultSet(i[order], j[order], dist_sq[order], n=int(n), epsilon=float(epsilon))


@dataclass
class EngineStats:
    """Instrumented staging / consumption counters and phase timings."""

    tiles: int = 0
    block_iterations: int = 0
    staged_elements: int = 0   # FP16 values copied into staging buffers
    element_reads: int = 0     # staged values consumed by multiply-accumulates
    fma_ops: int = 0
    stage_seconds: float = 0.0
    kernel_cpu_seconds: float = 0.0
    kernel_wall_seconds: float = 0.0
    merge_seconds: float = 0.0
    wall_seconds: float = 0.0

    @property
    def reuse_per_staged_element(self) -> float:
        return self.element_reads / self.staged_elements if self.staged_elements else 0.0

    def add(self, other: "EngineStats") -> None:
        self.tiles += other.tiles
        self.block_iterations += other.block_iterations
        self.staged_elements += other.staged_elements
        self.element_reads += other.element_reads
        self.fma_ops += other.fma_ops
        self.stage_seconds += other.stage_seconds
        self.kernel_cpu_seconds += other.kernel_cpu_seconds


def rasterize_tiles(grid_rows: int, grid_cols: int, square: int) -> list:
    """All tile coordinates, ordered as square x square groups.

    Groups walk the grid of groups row-major; tiles walk each group
    row-major; ragged edge groups keep their partial contents.  Every
    coordinate appears exactly once.
    """
    if grid_rows < 1 or grid_cols < 1:
        raise ArgumentError("grid dimensions must be >= 1")
    if square < 1:
        raise ArgumentError("square must be >= 1")
    coords = []
    for gr in range(0, grid_rows, square):
        for gc in range(0, grid_cols, square):
            for r in range(gr, min(gr + square, grid_rows)):
                for c in range(gc, min(gc + square, grid_cols)):
                    coords.append(TileCoord(r, c))
    return coords


def _check_engine_inputs(hd: HalfDataset, cfg: TileConfig) -> None:
    cfg.validate()
    if hd.n_padded % cfg.block_side != 0:
        raise ConfigError(
            f"n_padded {hd.n_padded} not a multiple of block_side {cfg.block_side}; "
            f"re-pad the dataset for this configuration"
        )
    if hd.d_padded % cfg.warp_kslice != 0:
        raise ConfigError(
            f"d_padded {hd.d_padded} not a multiple of warp_kslice {cfg.warp_kslice}"
        )


def _stage_slabs(hd: HalfDataset, r0: int, c0: int, k0: int, k1: int, side: int):
    """Widen the FP16 row/column slabs for one block k-iteration.

    Returns (p_slab, qt_slab): (side, k) and (k, side) float32 buffers.
    The query slab is staged transposed, matching its fragment role.
    """
    p_slab = np.ascontiguousarray(hd.values[r0 : r0 + side, k0:k1], dtype=np.float32)
    q_rows = np.asarray(hd.values[c0 : c0 + side, k0:k1], dtype=np.float32)
    qt_slab = np.ascontiguousarray(q_rows.T)
    return p_slab, qt_slab


def compute_block_tile(
    hd: HalfDataset,
    coord: TileCoord,
    eps_sq,
    cfg: TileConfig,
    stats: EngineStats | None = None,
):
    """All within-threshold pairs of one block tile.

    Returns (i, j, dist_sq) arrays with 1-based indices filtered to real
    (non-padding) points.  Raises :class:`AccumulatorOverflow` if a cell
    reaches infinity.
    """
    _check_engine_inputs(hd, cfg)
    side = cfg.block_side
    grid = hd.n_padded // side
    if not (0 <= coord.row_block < grid and 0 <= coord.col_block < grid):
        raise ArgumentError(f"tile {coord} outside {grid}x{grid} grid")
    if stats is None:
        stats = EngineStats()
    eps_sq = np.float32(eps_sq)
    if eps_sq < 0:
        raise ArgumentError("eps_sq must be >= 0")

    r0 = coord.row_block * side
    c0 = coord.col_block * side
    acc = np.zeros((side, side), dtype=np.float32)

    k_starts = list(range(0, hd.d_padded, cfg.block_kslice))

    def stage(k0: int):
        t0 = time.perf_counter()
        k1 = min(k0 + cfg.block_kslice, hd.d_padded)
        slabs = _stage_slabs(hd, r0, c0, k0, k1, side)
        stats.stage_seconds += time.perf_counter() - t0
        stats.staged_elements += 2 * side * (k1 - k0)
        stats.block_iterations += 1
        return k0, k1, slabs

    def consume(staged) -> None:
        k0, k1, (p_slab, qt_slab) = staged
        t0 = time.perf_counter()
        bad = 0
        wk = cfg.warp_kslice
        for wr in range(0, side, cfg.warp_side):
            p_view = p_slab[wr : wr + cfg.warp_side]
            for wc in range(0, side, cfg.warp_side):
                acc_view = acc[wr : wr + cfg.warp_side, wc : wc + cfg.warp_side]
                qt_view = qt_slab[:, wc : wc + cfg.warp_side]
                for kk in range(0, k1 - k0, wk):
                    bad += _kernel.accumulate_panel(p_view, qt_view, acc_view, kk, kk + wk)
                    stats.fma_ops += cfg.warp_side * cfg.warp_side * wk
                    stats.element_reads += 2 * cfg.warp_side * cfg.warp_side * wk
        stats.kernel_cpu_seconds += time.perf_counter() - t0
        if bad:
            rr, cc = np.argwhere(~np.isfinite(acc))[0]
            raise AccumulatorOverflow(
                f"accumulator overflow for pair ({r0 + int(rr) + 1}, {c0 + int(cc) + 1})"
            )

    if cfg.prefetch_depth == 2 and len(k_starts) > 1:
        # Two-stage pipeline analog: stage iteration t+1 before consuming t.
        current = stage(k_starts[0])
        for nxt_k in k_starts[1:]:
            nxt = stage(nxt_k)
            consume(current)
            current = nxt
        consume(current)
    else:
        for k0 in k_starts:
            consume(stage(k0))

    stats.tiles += 1

    d2 = combine_distance(acc, hd.norms[r0 : r0 + side][:, None], hd.norms[c0 : c0 + side][None, :])
    mask = d2 <= eps_sq
    # Padding rows are all-zero points: drop them by index, never by value.
    row_limit = min(max(hd.n_logical - r0, 0), side)
    col_limit = min(max(hd.n_logical - c0, 0), side)
    mask[row_limit:, :] = False
    mask[:, col_limit:] = False
    rr, cc = np.nonzero(mask)
    return (
        (rr + (r0 + 1)).astype(np.uint32),
        (cc + (c0 + 1)).astype(np.uint32),
        d2[rr, cc],
    )


def self_join(
    hd: HalfDataset,
    epsilon: float,
    cfg: TileConfig | None = None,
    stats_out: EngineStats | None = None,
) -> ResultSet:
    """Full epsilon self-join: every ordered pair with distance <= epsilon.

    The pair set and every dist_sq bit are independent of ``cfg.workers``,
    the dispatch order, and the prefetch depth; only timings change.
    """
    if cfg is None:
        cfg = TileConfig()
    _check_engine_inputs(hd, cfg)
    if not np.isfinite(epsilon) or epsilon < 0:
        raise ArgumentError(f"epsilon must be finite and >= 0, got {epsilon}")
    eps32 = np.float32(epsilon)
    eps_sq = np.float32(eps32 * eps32)

    t_start = time.perf_counter()
    grid = hd.n_padded // cfg.block_side
    if cfg.raster_order:
        order = rasterize_tiles(grid, grid, cfg.dispatch_square)
    else:
        order = [TileCoord(r, c) for r in range(grid) for c in range(grid)]

    buffers: list = [None] * len(order)
    worker_stats = [EngineStats() for _ in range(cfg.workers)]
    cursor = itertools.count()
    failures: list = []

    def run_worker(wid: int) -> None:
        my_stats = worker_stats[wid]
        try:
            while True:
                idx = next(cursor)  # atomic under CPython
                if idx >= len(order):
                    return
                buffers[idx] = compute_block_tile(hd, order[idx], eps_sq, cfg, my_stats)
        except BaseException as exc:  # re-raised in the caller
            failures.append(exc)

    kernel_t0 = time.perf_counter()
    if cfg.workers == 1:
        run_worker(0)
    else:
        threads = [
            threading.Thread(target=run_worker, args=(w,), name=f"mpjoin-worker-{w}")
            for w in range(cfg.workers)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    kernel_wall = time.perf_counter() - kernel_t0
    if failures:
        raise failures[0]

    t_merge = time.perf_counter()
    i_all = np.concatenate([b[0] for b in buffers]) if buffers else np.empty(0, np.uint32)
    j_all = np.concatenate([b[1] for b in buffers]) if buffers else np.empty(0, np.uint32)
    d_all = np.concatenate([b[2] for b in buffers]) if buffers else np.empty(0, np.float32)
    rs = make_result_set(i_all, j_all, d_all, n=hd.n_logical, epsilon=float(epsilon))
    merge_seconds = time.perf_counter() - t_merge

    if stats_out is not None:
        for ws in worker_stats:
            stats_out.add(ws)
        stats_out.kernel_wall_seconds = kernel_wall
        stats_out.merge_seconds = merge_seconds
        stats_out.wall_seconds = time.perf_counter() - t_start
    return rs
