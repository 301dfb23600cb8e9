"""Seeded synthetic corpora for desk-scale pipeline runs.

Real corpora need trained models and a tile server; these generated ones
need neither, yet preserve the structural facts the toolkit measures:
imagery is spatially coherent noise, maps are flat palette colors, and
each level of both pyramids is the exact merge-downsample of the level
above. With a ``palette_project`` top edge and identity m2m edges, a
series run reproduces the ground-truth maps bit for bit, which pins the
expected metric values in tests (SSIM/ESSI/IOU of 1) without trusting the
code under test.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .corpus import Manifest, ingest, tile_relpath
from .generators import Palette, palette_project
from .tile_io import write_tile
from .tiles import TileCoord, children, merge_downsample, mosaic

SYNTHETIC_CITY = "synthia"

# Black ground, white roads, blue water: far apart in RGB so nearest-color
# labeling is unambiguous even after box-average blending.
SYNTHETIC_PALETTE = Palette(
    (
        ("background", (0, 0, 0)),
        ("road", (255, 255, 255)),
        ("water", (0, 0, 255)),
    )
)


def synthetic_palette_config() -> list[dict]:
    """The palette in registry-config form."""
    return [{"class": label, "rgb": list(rgb)} for label, rgb in SYNTHETIC_PALETTE.entries]


def synthetic_registry_config(top_zoom: int = 17, bottom_zoom: int = 13) -> dict:
    """Registry config covering both strategies on a synthetic corpus.

    Every zoom gets a ``palette_project`` r2m edge; every step down gets an
    identity m2m edge. With this registry the series strategy reproduces
    the synthetic ground-truth maps exactly.
    """
    edges = {}
    for z in range(top_zoom, bottom_zoom - 1, -1):
        edges[f"r2m@{z}"] = {"backend": "palette_project", "palette": "synthetic"}
    for z in range(top_zoom, bottom_zoom, -1):
        edges[f"m2m@{z}-{z - 1}"] = {"backend": "identity"}
    return {"palettes": {"synthetic": synthetic_palette_config()}, "edges": edges}


def _noise_tile(rng: np.random.Generator, tile_size: int, block: int, jitter: int) -> np.ndarray:
    """Blockwise-constant random colors plus small per-pixel jitter.

    The blocks give the imagery spatial coherence (like land cover), so
    nearest-palette projection produces flat regions rather than salt and
    pepper, and the map pyramid keeps its color distribution as it
    downsamples.
    """
    cells = tile_size // block
    base = rng.integers(0, 256, size=(cells, cells, 3), dtype=np.int16)
    tile = np.repeat(np.repeat(base, block, axis=0), block, axis=1)
    if jitter:
        tile = tile + rng.integers(-jitter, jitter + 1, size=tile.shape, dtype=np.int16)
    return np.clip(tile, 0, 255).astype(np.uint8)


def _downsample_level(level: dict[TileCoord, np.ndarray]) -> dict[TileCoord, np.ndarray]:
    """Parent tiles from complete child quads, in child order NW NE SW SE."""
    out = {}
    parents = {TileCoord(c.zoom - 1, c.x // 2, c.y // 2) for c in level}
    for p in sorted(parents):
        quad = [level[c] for c in children(p) if c in level]
        if len(quad) == 4:
            out[p] = merge_downsample(quad)
    return out


def synthetic_corpus(
    root: str | Path,
    top_zoom: int = 17,
    bottom_zoom: int = 13,
    tiles_per_side: int | None = None,
    tile_size: int = 64,
    block: int | None = None,
    jitter: int = 8,
    seed: int = 0,
    city: str = SYNTHETIC_CITY,
) -> Manifest:
    """Write a dense synthetic rsi+map pyramid under ``root`` and ingest it.

    The top level is a ``tiles_per_side`` x ``tiles_per_side`` block of
    tiles at the origin; each level below is its exact merge-downsample,
    for imagery and maps alike, so the pyramid bottoms out with
    ``(tiles_per_side / 2**(top-bottom))**2`` tiles. The ground-truth map
    at the top is the palette projection of the imagery there.
    """
    levels_down = top_zoom - bottom_zoom
    if tiles_per_side is None:
        tiles_per_side = 2**levels_down
    if tiles_per_side % 2**levels_down:
        raise ValueError(
            f"tiles_per_side {tiles_per_side} must be a multiple of {2**levels_down} "
            f"to reach zoom {bottom_zoom} with complete quads"
        )
    if block is None:
        block = max(2**levels_down, tile_size // 4)
    if tile_size % block or block & (block - 1):
        raise ValueError(f"block {block} must be a power of two dividing tile_size {tile_size}")

    rng = np.random.default_rng(seed)
    root = Path(root)
    rsi = {
        TileCoord(top_zoom, x, y): _noise_tile(rng, tile_size, block, jitter)
        for y in range(tiles_per_side)
        for x in range(tiles_per_side)
    }
    maps = {c: palette_project(t, SYNTHETIC_PALETTE) for c, t in rsi.items()}
    for _ in range(levels_down):
        for coord, tile in rsi.items():
            write_tile(root / tile_relpath(city, "rsi", coord), tile)
        for coord, tile in maps.items():
            write_tile(root / tile_relpath(city, "map", coord), tile)
        rsi = _downsample_level(rsi)
        maps = _downsample_level(maps)
    for coord, tile in rsi.items():
        write_tile(root / tile_relpath(city, "rsi", coord), tile)
    for coord, tile in maps.items():
        write_tile(root / tile_relpath(city, "map", coord), tile)

    # Single synthetic city, marked as test split so evaluation reads it.
    return ingest(root, test_cities=(city,))
