"""Command-line front end: join, accuracy, bench, calibrate, verify-layout, reuse.

Every run that produces results can write a manifest (JSON) capturing the
resolved parameters, dataset digest, phase timings, and a digest of the
result payload; reruns with equal manifests produce equal result sets.
Pair lists serialize to a little-endian binary file: a u64 pair count
followed by (u32 i, u32 j, f32 dist_sq) records with 1-based indices.

Exit codes: 0 success, 2 argument/configuration error, 3 input format
error, 4 compute error (overflow, calibration failure).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .analysis import (
    A100,
    HardwareModel,
    calibrate_epsilon,
    derived_flops,
    distance_error_stats,
    overlap_accuracy,
    report_jsonl,
    report_lines,
    required_reuse,
    selectivity,
    tile_reuse,
)
from .dataset import Dataset, generate_synthetic, load_fvecs, to_half
from .errors import (
    AccumulatorOverflow,
    ArgumentError,
    CalibrationError,
    ConfigError,
    FormatError,
    MPJoinError,
    RangeError,
)
from .layout import count_conflicts, ldmatrix_trace, store_trace
from .oracle import brute_force_fp64
from .tiling import EngineStats, ResultSet, TileConfig, make_result_set, self_join

DEFAULT_SEED = 12345
PAIR_DTYPE = np.dtype([("i", "<u4"), ("j", "<u4"), ("dist_sq", "<f4")])

EXIT_OK = 0
EXIT_ARGUMENT = 2
EXIT_FORMAT = 3
EXIT_COMPUTE = 4


# ── serialization ────────────────────────────────────────────────────────


def dataset_sha256(ds: Dataset) -> str:
    h = hashlib.sha256()
    h.update(f"{ds.n}x{ds.d}:".encode())
    h.update(ds.values.tobytes())
    return h.hexdigest()


def pairs_payload(rs: ResultSet) -> bytes:
    rec = np.empty(len(rs), dtype=PAIR_DTYPE)
    rec["i"] = rs.i
    rec["j"] = rs.j
    rec["dist_sq"] = rs.dist_sq.astype(np.float32)
    return np.uint64(len(rs)).tobytes() + rec.tobytes()


def write_pairs(path, rs: ResultSet) -> str:
    payload = pairs_payload(rs)
    with open(path, "wb") as f:
        f.write(payload)
    return hashlib.sha256(payload).hexdigest()


def read_pairs(path, n: int, epsilon: float) -> ResultSet:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 8:
        raise FormatError(f"{os.fspath(path)}: truncated pair-count header")
    count = int(np.frombuffer(raw, dtype="<u8", count=1)[0])
    expect = 8 + count * PAIR_DTYPE.itemsize
    if len(raw) != expect:
        raise FormatError(
            f"{os.fspath(path)}: expected {expect} bytes for {count} pairs, got {len(raw)}"
        )
    rec = np.frombuffer(raw, dtype=PAIR_DTYPE, offset=8)
    return make_result_set(rec["i"], rec["j"], rec["dist_sq"].copy(), n=n, epsilon=epsilon)


def _json_plain(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serializable: {type(v)}")


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, default=_json_plain)
        f.write("\n")


def read_manifest(path) -> dict:
    with open(path) as f:
        return json.load(f)


# ── argument plumbing ────────────────────────────────────────────────────


def _parse_shape(text: str) -> tuple:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ArgumentError(f"synthetic spec must look like 1000x64, got {text!r}")
    try:
        n, d = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise ArgumentError(f"synthetic spec must look like 1000x64, got {text!r}") from exc
    if n < 1 or d < 1:
        raise ArgumentError(f"synthetic spec needs n >= 1 and d >= 1, got {text!r}")
    return n, d


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--fvecs", metavar="PATH", help="load points from an fvecs file")
    src.add_argument("--synthetic", metavar="NxD", help="generate uniform points, e.g. 4096x128")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="synthetic generator seed")
    p.add_argument("--lo", type=float, default=0.0, help="synthetic range low end")
    p.add_argument("--hi", type=float, default=1.0, help="synthetic range high end (exclusive)")


def _add_tile_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--block-side", type=int, default=128)
    p.add_argument("--block-kslice", type=int, default=64)
    p.add_argument("--warp-side", type=int, default=64)
    p.add_argument("--dispatch-square", type=int, default=8)
    p.add_argument("--prefetch-depth", type=int, choices=(1, 2), default=2)
    p.add_argument("--no-prefetch", action="store_true", help="same as --prefetch-depth 1")
    p.add_argument("--no-raster-order", action="store_true", help="plain row-major tile order")
    p.add_argument(
        "--workers", type=int, default=max(1, min(8, os.cpu_count() or 1)),
        help="worker threads pulling tiles from the queue",
    )


def _add_epsilon_args(p: argparse.ArgumentParser) -> None:
    sel = p.add_mutually_exclusive_group(required=True)
    sel.add_argument("--epsilon", type=float, help="search radius")
    sel.add_argument(
        "--target-selectivity", type=float,
        help="calibrate epsilon so the mean neighbor count hits this value",
    )
    p.add_argument("--calibration-sample", type=int, default=None)
    p.add_argument("--calibration-tol", type=float, default=0.05)


def _resolve_dataset(args) -> tuple:
    t0 = time.perf_counter()
    if args.fvecs is not None:
        ds = load_fvecs(args.fvecs)
        source = {"fvecs": args.fvecs}
    else:
        n, d = _parse_shape(args.synthetic)
        ds = generate_synthetic(n, d, seed=args.seed, lo=args.lo, hi=args.hi)
        source = {"synthetic": args.synthetic, "seed": args.seed, "lo": args.lo, "hi": args.hi}
    return ds, source, time.perf_counter() - t0


def _resolve_config(args) -> TileConfig:
    cfg = TileConfig(
        block_side=args.block_side,
        block_kslice=args.block_kslice,
        warp_side=args.warp_side,
        dispatch_square=args.dispatch_square,
        prefetch_depth=1 if args.no_prefetch else args.prefetch_depth,
        workers=args.workers,
        raster_order=not args.no_raster_order,
    )
    cfg.validate()
    return cfg


def _config_dict(cfg: TileConfig) -> dict:
    return {
        "block_side": cfg.block_side,
        "block_kslice": cfg.block_kslice,
        "warp_side": cfg.warp_side,
        "warp_kslice": cfg.warp_kslice,
        "dispatch_square": cfg.dispatch_square,
        "prefetch_depth": cfg.prefetch_depth,
        "workers": cfg.workers,
        "raster_order": cfg.raster_order,
    }


def _resolve_epsilon(args, ds: Dataset) -> tuple:
    """Returns (epsilon, calibration dict or None)."""
    if args.epsilon is not None:
        if not (args.epsilon >= 0) or not np.isfinite(args.epsilon):
            raise ArgumentError(f"--epsilon must be finite and >= 0, got {args.epsilon}")
        return float(args.epsilon), None
    cal = calibrate_epsilon(
        ds,
        target_s=args.target_selectivity,
        tol=args.calibration_tol,
        sample=args.calibration_sample,
        seed=args.seed,
    )
    info = {
        "target_selectivity": args.target_selectivity,
        "epsilon": cal.epsilon,
        "estimated_selectivity": cal.estimated_selectivity,
        "iterations": cal.iterations,
        "sample_size": cal.sample_size,
    }
    return cal.epsilon, info


def _emit(metrics: dict, as_json: bool) -> None:
    if as_json:
        print(report_jsonl(metrics))
    else:
        for line in report_lines(metrics):
            print(line)


# ── commands ─────────────────────────────────────────────────────────────


def cmd_join(args) -> int:
    ds, source, ingest_s = _resolve_dataset(args)
    cfg = _resolve_config(args)
    epsilon, calibration = _resolve_epsilon(args, ds)

    t0 = time.perf_counter()
    hd = to_half(ds, block_side=cfg.block_side, kslice=cfg.warp_kslice)
    convert_s = time.perf_counter() - t0

    stats = EngineStats()
    rs = self_join(hd, epsilon, cfg, stats_out=stats)

    tflops = derived_flops(hd.n_padded, hd.d_padded, stats.kernel_wall_seconds)
    metrics = {
        "n": ds.n,
        "d": ds.d,
        "epsilon": epsilon,
        "pairs": len(rs),
        "selectivity": selectivity(rs),
        "ingest_seconds": ingest_s,
        "convert_seconds": convert_s,
        "kernel_seconds": stats.kernel_wall_seconds,
        "merge_seconds": stats.merge_seconds,
        "join_seconds": stats.wall_seconds,
        "derived_tflops": tflops,
    }
    _emit(metrics, args.json)

    result_digest = None
    if args.pairs_out:
        result_digest = write_pairs(args.pairs_out, rs)
    manifest = {
        "command": "join",
        "version": __version__,
        "dataset": {"n": ds.n, "d": ds.d, "sha256": dataset_sha256(ds), **source},
        "epsilon": epsilon,
        "calibration": calibration,
        "config": _config_dict(cfg),
        "timings": {
            "ingest": ingest_s,
            "convert": convert_s,
            "kernel": stats.kernel_wall_seconds,
            "merge": stats.merge_seconds,
            "total": ingest_s + convert_s + stats.wall_seconds,
        },
        "pairs": len(rs),
        "result_sha256": result_digest or hashlib.sha256(pairs_payload(rs)).hexdigest(),
    }
    if args.manifest:
        write_manifest(args.manifest, manifest)
    elif args.pairs_out:
        write_manifest(args.pairs_out + ".manifest.json", manifest)
    return EXIT_OK


def cmd_accuracy(args) -> int:
    ds, source, ingest_s = _resolve_dataset(args)
    cfg = _resolve_config(args)
    epsilon, calibration = _resolve_epsilon(args, ds)
    digest = dataset_sha256(ds)

    if args.truth_pairs:
        manifest_path = args.truth_manifest or args.truth_pairs + ".manifest.json"
        truth_manifest = read_manifest(manifest_path)
        recorded = truth_manifest.get("dataset", {}).get("sha256")
        if recorded != digest:
            raise ArgumentError(
                "refusing to compare: dataset hash mismatch between this run "
                f"({digest[:12]}...) and the saved truth run ({str(recorded)[:12]}...)"
            )
        truth = read_pairs(args.truth_pairs, n=ds.n, epsilon=truth_manifest.get("epsilon", epsilon))
    else:
        truth = brute_force_fp64(ds, epsilon)

    hd = to_half(ds, block_side=cfg.block_side, kslice=cfg.warp_kslice)
    rs = self_join(hd, epsilon, cfg)

    overlap = overlap_accuracy(rs, truth)
    stats = distance_error_stats(rs, truth, bins=args.bins)
    metrics = {
        "n": ds.n,
        "d": ds.d,
        "epsilon": epsilon,
        "pairs_mixed": len(rs),
        "pairs_truth": len(truth),
        "overlap": overlap,
        "err_mean": stats.err_mean,
        "err_std": stats.err_std,
        "matched_pairs": stats.matched_pairs,
        "stats_defined": stats.defined,
    }
    _emit(metrics, args.json)

    if args.hist_out:
        with open(args.hist_out, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["bin_lo", "bin_hi", "count"])
            for b in range(stats.histogram.shape[0]):
                w.writerow(
                    [
                        f"{stats.bin_edges[b]!r}",
                        f"{stats.bin_edges[b + 1]!r}",
                        int(stats.histogram[b]),
                    ]
                )
    if args.manifest:
        write_manifest(
            args.manifest,
            {
                "command": "accuracy",
                "version": __version__,
                "dataset": {"n": ds.n, "d": ds.d, "sha256": digest, **source},
                "epsilon": epsilon,
                "calibration": calibration,
                "config": _config_dict(cfg),
                "timings": {"ingest": ingest_s},
                "overlap": overlap,
                "err_mean": stats.err_mean,
                "err_std": stats.err_std,
                "matched_pairs": stats.matched_pairs,
            },
        )
    return EXIT_OK


def cmd_bench(args) -> int:
    dims = []
    for part in args.dims.split(","):
        part = part.strip()
        if part:
            dims.append(int(part))
    if not dims or any(d < 1 for d in dims):
        raise ArgumentError(f"--dims must be a comma list of positive ints, got {args.dims!r}")
    cfg = _resolve_config(args)

    rows = []
    manifest_entries = []
    for d in dims:
        ds = generate_synthetic(args.n, d, seed=args.seed, lo=args.lo, hi=args.hi)
        t0 = time.perf_counter()
        hd = to_half(ds, block_side=cfg.block_side, kslice=cfg.warp_kslice)
        convert_s = time.perf_counter() - t0
        stats = EngineStats()
        rs = self_join(hd, args.epsilon, cfg, stats_out=stats)
        tflops = derived_flops(hd.n_padded, hd.d_padded, stats.kernel_wall_seconds)
        row = {
            "n": ds.n,
            "d": ds.d,
            "n_padded": hd.n_padded,
            "d_padded": hd.d_padded,
            "epsilon": args.epsilon,
            "pairs": len(rs),
            "convert_seconds": convert_s,
            "kernel_seconds": stats.kernel_wall_seconds,
            "merge_seconds": stats.merge_seconds,
            "total_seconds": convert_s + stats.wall_seconds,
            "derived_tflops": tflops,
            "config": (
                f"block{cfg.block_side}-warp{cfg.warp_side}-sq{cfg.dispatch_square}"
                f"-pf{cfg.prefetch_depth}-raster{int(cfg.raster_order)}-w{cfg.workers}"
            ),
        }
        rows.append(row)
        manifest_entries.append(
            {
                "command": "bench",
                "version": __version__,
                "dataset": {
                    "n": ds.n, "d": ds.d, "sha256": dataset_sha256(ds),
                    "synthetic": f"{args.n}x{d}", "seed": args.seed,
                },
                "epsilon": args.epsilon,
                "config": _config_dict(cfg),
                "timings": {
                    "convert": convert_s,
                    "kernel": stats.kernel_wall_seconds,
                    "merge": stats.merge_seconds,
                },
                "pairs": len(rs),
                "result_sha256": hashlib.sha256(pairs_payload(rs)).hexdigest(),
            }
        )

    fieldnames = list(rows[0].keys())
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=fieldnames)
        w.writeheader()
        for row in rows:
            w.writerow(row)
    finally:
        if args.csv:
            out.close()

    lo_d = min(rows, key=lambda r: r["d"])
    hi_d = max(rows, key=lambda r: r["d"])
    if hi_d["d"] > lo_d["d"] and hi_d["derived_tflops"] < lo_d["derived_tflops"]:
        print(
            f"warning: derived TFLOPS did not increase with dimensionality "
            f"(d={lo_d['d']}: {lo_d['derived_tflops']:.4g}, d={hi_d['d']}: "
            f"{hi_d['derived_tflops']:.4g}); locality benefit not visible on this machine",
            file=sys.stderr,
        )
    if args.manifest:
        write_manifest(args.manifest, {"command": "bench", "runs": manifest_entries})
    return EXIT_OK


def cmd_calibrate(args) -> int:
    ds, _, _ = _resolve_dataset(args)
    cal = calibrate_epsilon(
        ds,
        target_s=args.target_selectivity,
        tol=args.calibration_tol,
        sample=args.calibration_sample,
        seed=args.seed,
    )
    _emit(
        {
            "epsilon": cal.epsilon,
            "estimated_selectivity": cal.estimated_selectivity,
            "iterations": cal.iterations,
            "sample_size": cal.sample_size,
        },
        args.json,
    )
    return EXIT_OK


def cmd_verify_layout(args) -> int:
    ld_sw = count_conflicts(ldmatrix_trace(layout="swizzled")).per_phase
    ld_rm = count_conflicts(ldmatrix_trace(layout="row_major")).per_phase
    st_sw = count_conflicts(store_trace(layout="swizzled")).per_phase
    st_rm = count_conflicts(store_trace(layout="row_major")).per_phase
    fmt = lambda degrees: " ".join(str(x) for x in degrees)
    print(f"swizzled: {fmt(ld_sw)}; row-major: {fmt(ld_rm)}")
    print()
    print("per-phase conflict degrees (1 = conflict-free)")
    print(f"  fragment load, swizzled layout : {fmt(ld_sw)}")
    print(f"  fragment load, row-major layout: {fmt(ld_rm)}")
    print(f"  slab store,    swizzled layout : {fmt(st_sw)}")
    print(f"  slab store,    row-major layout: {fmt(st_rm)}")
    return EXIT_OK


def cmd_reuse(args) -> int:
    hw = HardwareModel(
        peak_tflops=args.peak_tflops,
        element_bytes=args.element_bytes,
        dram_bw=args.dram_bw,
        l2_bw=args.l2_bw,
        smem_bw=args.smem_bw,
    )
    cfg = TileConfig(block_side=args.block_side, warp_side=args.warp_side)
    cfg.validate()
    req_g, req_s = required_reuse(hw)
    reuse = tile_reuse(cfg, hw)
    _emit(
        {
            "required_global_reuse": req_g,
            "required_shared_reuse": req_s,
            "block_reuse": reuse.block_reuse,
            "warp_reuse": reuse.warp_reuse,
            "p_fragment_uses": reuse.p_fragment_uses,
            "q_fragment_uses": reuse.q_fragment_uses,
            "global_requirement": "pass" if reuse.meets_global else "fail",
            "shared_requirement": "pass" if reuse.meets_shared else "fail",
        },
        args.json,
    )
    return EXIT_OK


# ── parser / entry ───────────────────────────────────────────────────────


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mpjoin",
        description="Mixed-precision Euclidean distance self-join with an emulated "
        "tensor-core pipeline.",
    )
    p.add_argument("--version", action="version", version=f"mpjoin {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    j = sub.add_parser("join", help="run the epsilon self-join")
    _add_dataset_args(j)
    _add_epsilon_args(j)
    _add_tile_args(j)
    j.add_argument("--pairs-out", metavar="PATH", help="write the binary pair list")
    j.add_argument("--manifest", metavar="PATH", help="write the run manifest JSON")
    j.add_argument("--json", action="store_true", help="emit metrics as JSON lines")
    j.set_defaults(func=cmd_join)

    a = sub.add_parser("accuracy", help="compare the mixed join against the FP64 oracle")
    _add_dataset_args(a)
    _add_epsilon_args(a)
    _add_tile_args(a)
    a.add_argument("--bins", type=int, default=61, help="error histogram bin count")
    a.add_argument("--hist-out", metavar="PATH", help="write the error histogram CSV")
    a.add_argument("--truth-pairs", metavar="PATH", help="reuse a saved FP64 pair file")
    a.add_argument("--truth-manifest", metavar="PATH", help="manifest of the saved truth run")
    a.add_argument("--manifest", metavar="PATH")
    a.add_argument("--json", action="store_true")
    a.set_defaults(func=cmd_accuracy)

    b = sub.add_parser("bench", help="sweep dataset shapes and report derived TFLOPS")
    b.add_argument("--n", type=int, required=True, help="points per sweep cell")
    b.add_argument("--dims", required=True, help="comma list of dimensionalities, e.g. 64,128,256")
    b.add_argument("--seed", type=int, default=DEFAULT_SEED)
    b.add_argument("--lo", type=float, default=0.0)
    b.add_argument("--hi", type=float, default=1.0)
    b.add_argument("--epsilon", type=float, default=0.1,
                   help="small radius: exercises the filter, keeps output small")
    _add_tile_args(b)
    b.add_argument("--csv", metavar="PATH", help="write the sweep CSV (default: stdout)")
    b.add_argument("--manifest", metavar="PATH")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("calibrate", help="find epsilon for a target selectivity")
    _add_dataset_args(c)
    c.add_argument("--target-selectivity", type=float, required=True)
    c.add_argument("--calibration-sample", type=int, default=None)
    c.add_argument("--calibration-tol", type=float, default=0.05)
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_calibrate)

    v = sub.add_parser("verify-layout", help="print per-phase bank-conflict tables")
    v.set_defaults(func=cmd_verify_layout)

    r = sub.add_parser("reuse", help="required vs achieved data reuse")
    r.add_argument("--peak-tflops", type=float, default=A100.peak_tflops)
    r.add_argument("--element-bytes", type=float, default=A100.element_bytes)
    r.add_argument("--dram-bw", type=float, default=A100.dram_bw)
    r.add_argument("--l2-bw", type=float, default=A100.l2_bw)
    r.add_argument("--smem-bw", type=float, default=A100.smem_bw)
    r.add_argument("--block-side", type=int, default=128)
    r.add_argument("--warp-side", type=int, default=64)
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_reuse)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ArgumentError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGUMENT
    except (FormatError, RangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (AccumulatorOverflow, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except MPJoinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGUMENT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
