"""Mixed-precision Euclidean distance self-join on an emulated tensor-core pipeline.

FP16 multiplicands, FP32 round-toward-zero accumulation, a full
block/warp/fragment tiling hierarchy with a deterministic parallel work
queue, an XOR-swizzled shared-memory layout simulator with bank-conflict
verification, data-reuse calculus, and accuracy evaluation against an
FP64 oracle.
"""

__version__ = "0.1.0"

from .analysis import (
    A100,
    AccuracyReport,
    CalibrationResult,
    ErrorStats,
    HardwareModel,
    TileReuse,
    calibrate_epsilon,
    derived_flops,
    distance_error_stats,
    overlap_accuracy,
    required_reuse,
    selectivity,
    tile_reuse,
)
from .dataset import (
    Dataset,
    HalfDataset,
    compute_squared_norms,
    generate_synthetic,
    load_fvecs,
    to_half,
)
from .errors import (
    AccumulatorOverflow,
    ArgumentError,
    CalibrationError,
    ConfigError,
    FormatError,
    MPJoinError,
    RangeError,
)
from .layout import (
    AccessTrace,
    ConflictReport,
    SlotAddress,
    count_conflicts,
    ldmatrix_trace,
    store_trace,
    swizzle_address,
)
from .mma import FragmentAcc, FragmentP, FragmentQ, add_rz, combine_distance, mma
from .oracle import brute_force_fp64, pairwise_sqdist_fp64, reference_mixed_scalar
from .tiling import (
    EngineStats,
    ResultSet,
    TileConfig,
    TileCoord,
    compute_block_tile,
    make_result_set,
    rasterize_tiles,
    self_join,
)

__all__ = [
    "__version__",
    "A100",
    "AccessTrace",
    "AccumulatorOverflow",
    "AccuracyReport",
    "ArgumentError",
    "CalibrationError",
    "CalibrationResult",
    "ConfigError",
    "ConflictReport",
    "Dataset",
    "EngineStats",
    "ErrorStats",
    "FormatError",
    "FragmentAcc",
    "FragmentP",
    "FragmentQ",
    "HalfDataset",
    "HardwareModel",
    "MPJoinError",
    "RangeError",
    "ResultSet",
    "SlotAddress",
    "TileConfig",
    "TileCoord",
    "TileReuse",
    "add_rz",
    "brute_force_fp64",
    "calibrate_epsilon",
    "combine_distance",
    "compute_block_tile",
    "compute_squared_norms",
    "count_conflicts",
    "derived_flops",
    "distance_error_stats",
    "generate_synthetic",
    "ldmatrix_trace",
    "load_fvecs",
    "make_result_set",
    "mma",
    "overlap_accuracy",
    "pairwise_sqdist_fp64",
    "rasterize_tiles",
    "reference_mixed_scalar",
    "required_reuse",
    "selectivity",
    "self_join",
    "store_trace",
    "swizzle_address",
    "tile_reuse",
    "to_half",
]
