"""Multi-scale map generation from remote-sensing tile pyramids.

Two orchestration strategies turn a tiled imagery corpus into a map
pyramid: ``parallel`` runs an independent imagery-to-map generator per
zoom level, ``series`` runs one top-level generator and chains
map-to-map steps downward with a merge-downsample between levels. The
analytics half scores the results: SSIM, edge-map SSIM, per-class IOU,
and histogram transport distances.
"""

from .corpus import (
    Manifest,
    ManifestEntry,
    PairSample,
    TileLoader,
    TileRect,
    TileSource,
    build_mm_pairs,
    build_rm_pairs,
    corpus_stats,
    fetch_tiles,
    ingest,
)
from .distributions import PixelHistogram, emd, emd_strategy_table, histogram_emd, pixel_histogram
from .errors import (
    BackendError,
    ConfigError,
    CoverageError,
    FetchError,
    IntegrityError,
    MosaicError,
    PluginProtocolError,
    PluginTimeoutError,
    ShapeError,
)
from .evaluation import build_report, evaluate_level, evaluate_levels, evaluate_run_dir
from .generators import (
    EdgeId,
    GeneratorHandle,
    Palette,
    Registry,
    load_registry,
    palette_project,
    required_edges,
    translate,
)
from .metrics import class_iou, derive_palette, essi, iou, label_map, sobel_edges, ssim
from .reporting import MetricRow, Report, aggregate_improvement, trend_svg
from .strategies import (
    MultiScaleAtlas,
    StrategyConfig,
    load_atlas_tiles,
    run_parallel,
    run_series,
    run_strategy,
    save_atlas,
    series_step,
)
from .synthetic import SYNTHETIC_PALETTE, synthetic_corpus, synthetic_registry_config
from .tiles import Mosaic, TileCoord, children, merge_downsample, mosaic, parent

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "ConfigError",
    "CoverageError",
    "EdgeId",
    "FetchError",
    "GeneratorHandle",
    "IntegrityError",
    "Manifest",
    "ManifestEntry",
    "MetricRow",
    "Mosaic",
    "MosaicError",
    "MultiScaleAtlas",
    "PairSample",
    "Palette",
    "PixelHistogram",
    "PluginProtocolError",
    "PluginTimeoutError",
    "Registry",
    "Report",
    "ShapeError",
    "StrategyConfig",
    "SYNTHETIC_PALETTE",
    "TileCoord",
    "TileLoader",
    "TileRect",
    "TileSource",
    "aggregate_improvement",
    "build_mm_pairs",
    "build_report",
    "build_rm_pairs",
    "children",
    "class_iou",
    "corpus_stats",
    "derive_palette",
    "emd",
    "emd_strategy_table",
    "essi",
    "evaluate_level",
    "evaluate_levels",
    "evaluate_run_dir",
    "fetch_tiles",
    "histogram_emd",
    "ingest",
    "iou",
    "label_map",
    "load_atlas_tiles",
    "load_registry",
    "merge_downsample",
    "mosaic",
    "palette_project",
    "parent",
    "pixel_histogram",
    "required_edges",
    "run_parallel",
    "run_series",
    "run_strategy",
    "save_atlas",
    "series_step",
    "sobel_edges",
    "ssim",
    "synthetic_corpus",
    "synthetic_registry_config",
    "tiles",
    "translate",
    "trend_svg",
]
