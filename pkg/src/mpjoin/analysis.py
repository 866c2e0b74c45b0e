"""Quantitative apparatus: reuse calculus, accuracy metrics, calibration.

The reuse calculus answers how many times each element fetched from a
memory level must be consumed for the matrix pipeline to run at peak
throughput: a multiply-accumulate performs two floating-point operations
per two elements touched, so peak TFLOPS translates directly into an
element demand rate, and dividing the implied byte rate by a level's
bandwidth gives the required per-element reuse.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .errors import ArgumentError, CalibrationError
from .oracle import pairwise_sqdist_fp64
from .tiling import ResultSet, TileConfig

__all__ = [
    "HardwareModel",
    "A100",
    "TileReuse",
    "ErrorStats",
    "AccuracyReport",
    "CalibrationResult",
    "required_reuse",
    "tile_reuse",
    "overlap_accuracy",
    "distance_error_stats",
    "selectivity",
    "calibrate_epsilon",
    "derived_flops",
    "report_lines",
    "report_jsonl",
]

DEFAULT_ERROR_BINS = 61  # odd count centers a bin on zero


@dataclass(frozen=True)
class HardwareModel:
    """Throughput and bandwidth figures driving the reuse requirements."""

    peak_tflops: float
    element_bytes: float = 2.0  # FP16
    dram_bw: float = 1.5        # TB/s, raw DRAM (informational)
    l2_bw: float = 6.4          # TB/s, effective global-read bandwidth
    smem_bw: float = 17.9       # TB/s, shared-memory bandwidth

    def __post_init__(self):
        for name in ("peak_tflops", "element_bytes", "dram_bw", "l2_bw", "smem_bw"):
            if not getattr(self, name) > 0:
                raise ArgumentError(f"HardwareModel.{name} must be > 0")


A100 = HardwareModel(peak_tflops=312.0)


def required_reuse(hw: HardwareModel) -> tuple:
    """(global_reuse, shared_reuse) to sustain peak throughput.

    Peak demands ``peak_tflops * 1e12`` elements per second (two FLOPs per
    two elements); each count is the implied byte rate divided by the
    level's bandwidth, rounded to the nearest integer (ties to even).
    """
    elements_per_s = hw.peak_tflops * 1e12
    byte_rate = elements_per_s * hw.element_bytes
    global_reuse = round(byte_rate / (hw.l2_bw * 1e12))
    shared_reuse = round(byte_rate / (hw.smem_bw * 1e12))
    return int(global_reuse), int(shared_reuse)


@dataclass(frozen=True)
class TileReuse:
    """Reuse achieved by a tile configuration versus the requirements."""

    block_reuse: int        # consumptions of each element staged per block tile
    warp_reuse: int         # consumptions of each element read into fragments
    p_fragment_uses: int    # times each 16x16 point fragment is multiplied
    q_fragment_uses: int    # times each 16x8 query fragment is multiplied
    required_global: int
    required_shared: int

    @property
    def meets_global(self) -> bool:
        return self.block_reuse >= self.required_global

    @property
    def meets_shared(self) -> bool:
        return self.warp_reuse >= self.required_shared


def tile_reuse(cfg: TileConfig, hw: HardwareModel = A100) -> TileReuse:
    """Per-element and per-fragment reuse delivered by ``cfg``.

    Each staged coordinate participates in ``block_side`` accumulator
    rows/columns; within a warp tile each element read from staging is
    consumed ``warp_side`` times.  Fragment-use counts come from the
    fragment grid: a point fragment meets ``warp_side / 8`` query
    fragments and a query fragment meets ``warp_side / 16`` point
    fragments.
    """
    cfg.validate()
    req_g, req_s = required_reuse(hw)
    return TileReuse(
        block_reuse=cfg.block_side,
        warp_reuse=cfg.warp_side,
        p_fragment_uses=cfg.warp_side // 8,
        q_fragment_uses=cfg.warp_side // 16,
        required_global=req_g,
        required_shared=req_s,
    )


def _neighbor_sets(rs: ResultSet) -> dict:
    sets: dict = defaultdict(set)
    for i, j in zip(rs.i.tolist(), rs.j.tolist()):
        sets[i].add(j)
    return sets


def overlap_accuracy(test: ResultSet, truth: ResultSet) -> float:
    """Mean per-point intersection-over-union of neighbor sets, in [0, 1].

    Self-neighbors are included consistently on both sides.  A point with
    an empty neighbor set in both results scores 1.
    """
    if test.n != truth.n:
        raise ArgumentError(f"result sets cover different datasets: n={test.n} vs n={truth.n}")
    a = _neighbor_sets(test)
    b = _neighbor_sets(truth)
    total = 0.0
    for p in range(1, test.n + 1):
        na = a.get(p)
        nb = b.get(p)
        if not na and not nb:
            total += 1.0
            continue
        if na is None or nb is None:
            continue  # one side empty: intersection 0
        total += len(na & nb) / len(na | nb)
    return total / test.n


@dataclass
class ErrorStats:
    """Signed distance-error statistics over matched pairs."""

    matched_pairs: int
    defined: bool
    err_mean: float
    err_std: float
    histogram: np.ndarray
    bin_edges: np.ndarray


@dataclass
class AccuracyReport:
    """Overlap score plus distance-error statistics for one comparison."""

    overlap: float
    stats: ErrorStats

    @property
    def err_mean(self) -> float:
        return self.stats.err_mean

    @property
    def err_std(self) -> float:
        return self.stats.err_std

    @property
    def histogram(self) -> np.ndarray:
        return self.stats.histogram


def _pair_keys(rs: ResultSet) -> np.ndarray:
    return (rs.i.astype(np.uint64) << np.uint64(32)) | rs.j.astype(np.uint64)


def distance_error_stats(test: ResultSet, truth: ResultSet, bins: int = DEFAULT_ERROR_BINS) -> ErrorStats:
    """Mean/std/histogram of dist_test - dist_truth over matched (i, j) pairs.

    Distances are square roots of the (already clamped, nonnegative)
    squared distances.  Statistics use the population standard deviation;
    the histogram is linear over the observed error range.  An empty
    intersection yields a flagged, undefined result.
    """
    if bins < 1:
        raise ArgumentError(f"bins must be >= 1, got {bins}")
    if test.n != truth.n:
        raise ArgumentError(f"result sets cover different datasets: n={test.n} vs n={truth.n}")
    _, ti, ui = np.intersect1d(_pair_keys(test), _pair_keys(truth), return_indices=True)
    if ti.size == 0:
        return ErrorStats(
            matched_pairs=0,
            defined=False,
            err_mean=float("nan"),
            err_std=float("nan"),
            histogram=np.zeros(bins, dtype=np.int64),
            bin_edges=np.linspace(0.0, 1.0, bins + 1),
        )
    errors = np.sqrt(test.dist_sq[ti].astype(np.float64)) - np.sqrt(
        truth.dist_sq[ui].astype(np.float64)
    )
    hist, edges = np.histogram(errors, bins=bins)
    return ErrorStats(
        matched_pairs=int(ti.size),
        defined=True,
        err_mean=float(errors.mean()),
        err_std=float(errors.std()),
        histogram=hist,
        bin_edges=edges,
    )


def selectivity(rs: ResultSet) -> float:
    """Mean neighbors found per point, (|R| - n) / n."""
    if rs.n < 1:
        raise ArgumentError("result set must cover a dataset with n >= 1")
    return (len(rs) - rs.n) / rs.n


@dataclass(frozen=True)
class CalibrationResult:
    epsilon: float
    estimated_selectivity: float
    iterations: int
    sample_size: int


def calibrate_epsilon(
    ds: Dataset,
    target_s: float,
    tol: float = 0.05,
    sample: int | None = None,
    seed: int = 0,
    max_iter: int = 40,
) -> CalibrationResult:
    """Bisect epsilon until the estimated full-dataset selectivity hits target_s.

    Probes run a full FP64 join over a deterministic subsample (the
    pairwise FP64 distance matrix is materialized once; every probe
    thresholds it, which is identical to re-joining).  Sample selectivity
    scales to a full-dataset estimate by (n - 1) / (m - 1).  Returns after
    convergence to ``tol * target_s`` or ``max_iter`` bisections.
    """
    n = ds.n
    if target_s <= 0:
        raise ArgumentError(f"target_s must be > 0, got {target_s}")
    if sample is None:
        sample = min(n, 1024)
    if not 2 <= sample <= n:
        raise ArgumentError(f"sample must be in [2, n={n}], got {sample}")
    if target_s > n - 1:
        raise CalibrationError(
            f"target selectivity {target_s} unreachable: at most n - 1 = {n - 1} neighbors exist"
        )
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=sample, replace=False))
    m = int(sample)
    dist = np.sqrt(pairwise_sqdist_fp64(ds.values[idx]))
    scale = (n - 1) / (m - 1)

    def estimate(eps: float) -> float:
        inside = int(np.count_nonzero(dist <= eps))
        return scale * (inside - m) / m

    band = tol * target_s
    lo, est_lo = 0.0, estimate(0.0)
    if abs(est_lo - target_s) <= band:
        return CalibrationResult(lo, est_lo, 0, m)
    if est_lo > target_s:
        raise CalibrationError(
            f"initial interval does not bracket target {target_s}: "
            f"selectivity is already {est_lo:.4g} at epsilon 0"
        )
    hi = float(dist.max())
    est_hi = estimate(hi)
    if est_hi < target_s - band:
        raise CalibrationError(
            f"initial interval does not bracket target {target_s}: "
            f"achieved selectivity range is [{est_lo:.4g}, {est_hi:.4g}]"
        )
    mid, est_mid = hi, est_hi
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        est_mid = estimate(mid)
        if abs(est_mid - target_s) <= band:
            return CalibrationResult(mid, est_mid, it, m)
        if est_mid < target_s:
            lo = mid
        else:
            hi = mid
    return CalibrationResult(mid, est_mid, max_iter, m)


def derived_flops(n_padded: int, d_padded: int, elapsed_seconds: float) -> float:
    """TFLOPS implied by a padded n x n x d sweep: 2 FLOPs per fused step."""
    if elapsed_seconds <= 0:
        raise ArgumentError(f"elapsed_seconds must be > 0, got {elapsed_seconds}")
    return 2.0 * float(n_padded) ** 2 * float(d_padded) / elapsed_seconds / 1e12


def _plain(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def report_lines(metrics: dict) -> list:
    """Line-oriented key=value rendering of a metrics mapping."""
    return [f"{k}={_plain(v)}" for k, v in metrics.items()]


def report_jsonl(metrics: dict) -> str:
    """One JSON object per metric, newline separated."""
    return "\n".join(json.dumps({"metric": k, "value": _plain(v)}) for k, v in metrics.items())
