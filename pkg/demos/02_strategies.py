"""
Two ways to build a multi-scale atlas
=====================================

The parallel strategy translates every zoom level straight from that
level's imagery with its own generator. The series strategy translates
only the top level, then walks downward: merge a quad of generated maps,
translate the merged tile one zoom lower, repeat.

A synthetic corpus makes the difference visible without any trained
models: its ground-truth map pyramid is an exact merge-downsample chain,
which is precisely what the series strategy computes.
"""

import tempfile
from pathlib import Path

import numpy as np

from rs2map import (
    StrategyConfig,
    TileLoader,
    load_registry,
    run_strategy,
    synthetic_corpus,
    synthetic_registry_config,
)

TOP, BOTTOM, SIZE = 16, 13, 32

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp) / "corpus"

    # Imagery is blockwise noise; maps are its palette projection, and every
    # lower level of both pyramids is the exact merge of the level above.
    manifest = synthetic_corpus(root, top_zoom=TOP, bottom_zoom=BOTTOM,
                                tiles_per_side=8, tile_size=SIZE, seed=42)
    print(f"synthetic corpus: {len(manifest)} tiles across zooms {manifest.zooms()}")

    # One registry serves both strategies: palette projection for every
    # imagery-to-map edge, identity for every map-to-map step.
    registry = load_registry(synthetic_registry_config(TOP, BOTTOM), tile_size=SIZE)
    loader = TileLoader(root, SIZE)

    atlases = {}
    for kind in ("series", "parallel"):
        cfg = StrategyConfig(kind=kind, top_zoom=TOP, bottom_zoom=BOTTOM)
        atlases[kind] = run_strategy(manifest, registry, cfg, loader)
        print(f"{kind:>8}: level sizes {atlases[kind].level_sizes()}")

    # Score both against the stored ground-truth maps: mean absolute pixel
    # error per zoom. The series chain reproduces the ground truth exactly;
    # the parallel runs drift further the lower the zoom.
    print(f"\n{'zoom':>4} {'series err':>11} {'parallel err':>13}")
    for z in range(TOP, BOTTOM - 1, -1):
        real = {e.coord: loader(e) for e in manifest.select(kind="map", zoom=z)}
        line = [f"{z:>4}"]
        for kind in ("series", "parallel"):
            gen = atlases[kind].levels[z]
            err = np.mean([
                np.abs(gen[c].astype(int) - real[c].astype(int)).mean() for c in real
            ])
            line.append(f"{err:>11.3f}" if kind == "series" else f"{err:>13.3f}")
        print(" ".join(line))

    print("\nthe series column is all zeros: identity map-to-map steps plus")
    print("merge-downsampling is exactly how the ground-truth pyramid was built")
