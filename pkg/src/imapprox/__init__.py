"""Piecewise-constant image approximation: optimal, nested, and spatial."""

from .stats import (
    ClusterStats,
    DimensionMismatchError,
    Partition,
    PreconditionError,
    accumulate,
    correction_delta,
    kmeans_delta,
    merge_delta,
    split_delta,
)
from .series import ErrorSeries
from .optimal1d import (
    Histogram,
    HistogramError,
    OptimalSolution,
    brute_force_optimal,
    histogram,
    optimal_sequence,
)
from .hierarchy import (
    AtomUniverse,
    Hierarchy,
    WardAscent,
    build_sequence,
    convexify,
    pair_atoms,
    refine_exact,
    refine_kmeans,
    self_consistency_check,
    split_pass,
    value_classes,
)
from .regions import (
    ExtendedResult,
    MergeCriterion,
    MergeResult,
    RegionGraph,
    build_region_graph,
    region_grow_extended,
    region_merge,
)
from .imgio import (
    PnmParseError,
    RasterImage,
    read_labels,
    read_pnm,
    render_approximation,
    round_half_even,
    write_labels,
    write_pnm,
    write_series,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterStats", "DimensionMismatchError", "Partition", "PreconditionError",
    "accumulate", "correction_delta", "kmeans_delta", "merge_delta", "split_delta",
    "ErrorSeries",
    "Histogram", "HistogramError", "OptimalSolution", "brute_force_optimal",
    "histogram", "optimal_sequence",
    "AtomUniverse", "Hierarchy", "WardAscent", "build_sequence", "convexify",
    "pair_atoms", "refine_exact", "refine_kmeans", "self_consistency_check",
    "split_pass", "value_classes",
    "ExtendedResult", "MergeCriterion", "MergeResult", "RegionGraph",
    "build_region_graph", "region_grow_extended", "region_merge",
    "PnmParseError", "RasterImage", "read_labels", "read_pnm",
    "render_approximation", "round_half_even", "write_labels", "write_pnm",
    "write_series",
    "__version__",
]
