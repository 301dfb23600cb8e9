"""Scoring generated atlases against real map tiles, zoom by zoom.

Pairs each generated tile with the real map tile at the same coordinate
and computes every metric per tile, then averages unweighted within the
zoom. Tiles where a class is absent from both masks have no defined IOU
and are left out of that class's average; if that empties the average the
row records the value as undefined. A zoom with no usable pairs at all is
a coverage gap and raises rather than silently producing an empty row.
"""

from __future__ import annotations

import numpy as np

from . import metrics
from .corpus import Manifest, TileLoader
from .errors import CoverageError
from .generators import Palette
from .reporting import MetricRow, Report, aggregate_improvement, METRIC_NAMES
from .strategies import load_atlas_tiles, load_run_summary
from .tiles import TileCoord

# MetricRow slots are fixed; palette classes feed them by label.
ROW_CLASSES = {"iou_road": "road", "iou_water": "water"}


def evaluate_level(
    generated: dict[TileCoord, np.ndarray],
    real: dict[TileCoord, np.ndarray],
    palette: Palette,
    zoom: int,
    strategy: str,
) -> MetricRow:
    """One MetricRow from paired tiles at a single zoom.

    Only coordinates present on both sides are scored; if none overlap the
    zoom has no evaluable data and a CoverageError is raised.
    """
    shared = sorted(set(generated) & set(real))
    if not shared:
        raise CoverageError(
            f"zoom {zoom}: no coordinates shared between generated and real tiles",
            gaps={zoom: "no overlap between generated and real tiles"},
        )
    ssim_sum = 0.0
    essi_sum = 0.0
    per_class: dict[str, list[float]] = {label: [] for label in palette.labels}
    for coord in shared:
        g, r = generated[coord], real[coord]
        ssim_sum += metrics.ssim(g, r)
        essi_sum += metrics.essi(g, r)
        for label, value in metrics.class_iou(g, r, palette).items():
            if value is not None:
                per_class[label].append(value)

    def averaged(field: str) -> float | None:
        values = per_class.get(ROW_CLASSES[field])
        if not values:
            return None
        return sum(values) / len(values)

    n = len(shared)
    return MetricRow(
        zoom=zoom,
        strategy=strategy,
        ssim=ssim_sum / n,
        essi=essi_sum / n,
        iou_road=averaged("iou_road"),
        iou_water=averaged("iou_water"),
    )


def real_map_tiles(
    manifest: Manifest, loader: TileLoader, zoom: int, split="test"
) -> dict[TileCoord, np.ndarray]:
    entries = manifest.select(kind="map", zoom=zoom, split=split)
    return {e.coord: loader(e) for e in entries}


def evaluate_levels(
    levels: dict[int, dict[TileCoord, np.ndarray]],
    manifest: Manifest,
    loader: TileLoader,
    palette: Palette,
    strategy: str,
    zooms=None,
    split="test",
) -> list[MetricRow]:
    """MetricRows for every requested zoom, highest first.

    Coverage is checked up front across all zooms so the error can itemize
    every gap at once instead of failing on the first.
    """
    wanted = sorted(zooms if zooms is not None else levels, reverse=True)
    gaps: dict[int, str] = {}
    pairs = {}
    for z in wanted:
        gen = levels.get(z, {})
        real = real_map_tiles(manifest, loader, z, split=split)
        if not gen:
            gaps[z] = "no generated tiles"
        elif not real:
            gaps[z] = f"no real map tiles in split {split!r}"
        elif not set(gen) & set(real):
            gaps[z] = "no overlap between generated and real tiles"
        else:
            pairs[z] = (gen, real)
    if gaps:
        listing = "; ".join(f"zoom {z}: {why}" for z, why in sorted(gaps.items()))
        raise CoverageError(f"evaluation coverage gaps: {listing}", gaps=gaps)
    return [evaluate_level(*pairs[z], palette, z, strategy) for z in wanted]


def evaluate_run_dir(
    run_dir,
    manifest: Manifest,
    loader: TileLoader,
    palette: Palette,
    strategy: str | None = None,
    zooms=None,
    split="test",
) -> list[MetricRow]:
    """Score a persisted run directory against the corpus's real maps."""
    if strategy is None:
        strategy = load_run_summary(run_dir)["provenance"]["strategy"]
    levels = load_atlas_tiles(run_dir)
    return evaluate_levels(levels, manifest, loader, palette, strategy, zooms=zooms, split=split)


def build_report(
    series_rows: list[MetricRow],
    parallel_rows: list[MetricRow],
    emd_table: dict[str, dict[int, float]] | None = None,
    provenance: dict | None = None,
) -> Report:
    """Assemble rows plus the per-metric series-over-parallel averages."""
    improvements = {}
    for metric in METRIC_NAMES:
        try:
            improvements[metric] = aggregate_improvement(series_rows, parallel_rows, metric)
        except ValueError:
            # A metric undefined at every compared zoom (e.g. palette lacks
            # the class) simply has no improvement figure.
            pass
    return Report(
        rows=list(series_rows) + list(parallel_rows),
        emd_table=emd_table or {},
        improvements=improvements,
        provenance=provenance or {},
    )
