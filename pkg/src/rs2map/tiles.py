"""Tile addressing and quadtree pyramid geometry.

Tiles live on the XYZ slippy-map grid: at zoom ``z`` the world is a
``2^z x 2^z`` grid of square tiles. A tile image is a ``(S, S, 3)`` uint8
RGB array with S a power of two (512 for the production corpus; tests use
smaller sizes). Quads are always handled in row-major child order
NW, NE, SW, SE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MosaicError, ShapeError

MAX_ZOOM = 22
DEFAULT_TILE_SIZE = 512


@dataclass(frozen=True, order=True)
class TileCoord:
    """Address of one tile: zoom level and column/row indices."""

    zoom: int
    x: int
    y: int

    def __post_init__(self):
        if not 0 <= self.zoom <= MAX_ZOOM:
            raise ValueError(f"zoom out of range [0, {MAX_ZOOM}]: {self.zoom}")
        n = 1 << self.zoom
        if not 0 <= self.x < n:
            raise ValueError(f"x out of range [0, {n}) at zoom {self.zoom}: {self.x}")
        if not 0 <= self.y < n:
            raise ValueError(f"y out of range [0, {n}) at zoom {self.zoom}: {self.y}")

    def __str__(self):
        return f"{self.zoom}/{self.x}/{self.y}"


def children(c: TileCoord) -> list[TileCoord]:
    """The four zoom ``z+1`` tiles covering ``c``, in NW, NE, SW, SE order."""
    if c.zoom >= MAX_ZOOM:
        raise ValueError(f"cannot descend below zoom {MAX_ZOOM}")
    z, x, y = c.zoom + 1, 2 * c.x, 2 * c.y
    return [
        TileCoord(z, x, y),
        TileCoord(z, x + 1, y),
        TileCoord(z, x, y + 1),
        TileCoord(z, x + 1, y + 1),
    ]


def parent(c: TileCoord) -> TileCoord:
    """The zoom ``z-1`` tile containing ``c``."""
    if c.zoom == 0:
        raise ValueError("the root tile has no parent")
    return TileCoord(c.zoom - 1, c.x // 2, c.y // 2)


def validate_tile(t: np.ndarray, size: int | None = None) -> np.ndarray:
    """Check that ``t`` is a square power-of-two RGB uint8 tile; return it."""
    t = np.asarray(t)
    if t.ndim != 3 or t.shape[2] != 3:
        raise ShapeError(f"expected (S, S, 3) RGB tile, got shape {t.shape}")
    h, w = t.shape[:2]
    if h != w:
        raise ShapeError(f"tile must be square, got {h}x{w}")
    if w == 0 or (w & (w - 1)) != 0:
        raise ShapeError(f"tile side must be a power of two, got {w}")
    if size is not None and w != size:
        raise ShapeError(f"expected tile size {size}, got {w}")
    if t.dtype != np.uint8:
        raise ShapeError(f"tile dtype must be uint8, got {t.dtype}")
    return t


def merge_downsample(quad: list[np.ndarray] | tuple[np.ndarray, ...]) -> np.ndarray:
    """Merge a NW,NE,SW,SE quad of S x S tiles and box-downsample to S x S.

    Each output pixel is the mean of a non-overlapping 2x2 block of the
    assembled 2S x 2S raster, rounded half away from zero. Integer
    arithmetic throughout, so constants are exact fixed points.
    """
    if len(quad) != 4:
        raise ShapeError(f"expected 4 child tiles, got {len(quad)}")
    nw, ne, sw, se = (validate_tile(t) for t in quad)
    s = nw.shape[0]
    for name, t in (("NE", ne), ("SW", sw), ("SE", se)):
        if t.shape != nw.shape:
            raise ShapeError(f"{name} tile shape {t.shape} != NW shape {nw.shape}")
    big = np.empty((2 * s, 2 * s, 3), dtype=np.uint16)
    big[:s, :s] = nw
    big[:s, s:] = ne
    big[s:, :s] = sw
    big[s:, s:] = se
    block_sum = (
        big[0::2, 0::2].astype(np.uint32)
        + big[0::2, 1::2]
        + big[1::2, 0::2]
        + big[1::2, 1::2]
    )
    # round(s/4) half away from zero == (s + 2) // 4 for non-negative s
    return ((block_sum + 2) // 4).astype(np.uint8)


@dataclass(frozen=True)
class Mosaic:
    """A dense rectangle of same-zoom tiles rendered as one raster."""

    origin: TileCoord
    columns: int
    rows: int
    raster: np.ndarray

    def __post_init__(self):
        s = self.raster.shape[0] // self.rows
        expect = (self.rows * s, self.columns * s, 3)
        if self.raster.shape != expect:
            raise ShapeError(f"raster shape {self.raster.shape} != {expect}")

    @property
    def tile_size(self) -> int:
        return self.raster.shape[0] // self.rows

    def tile_at(self, c: TileCoord) -> np.ndarray:
        """Slice the constituent tile at coord ``c`` back out of the raster."""
        s = self.tile_size
        i, j = c.y - self.origin.y, c.x - self.origin.x
        if c.zoom != self.origin.zoom or not (0 <= i < self.rows and 0 <= j < self.columns):
            raise KeyError(f"coord {c} outside mosaic")
        return self.raster[i * s : (i + 1) * s, j * s : (j + 1) * s]


def mosaic(tiles: dict[TileCoord, np.ndarray]) -> Mosaic:
    """Assemble a dense axis-aligned rectangle of tiles into one raster.

    Raises :class:`MosaicError` naming every missing coord if the bounding
    rectangle of the given coords is not fully covered.
    """
    if not tiles:
        raise MosaicError("no tiles given")
    zooms = {c.zoom for c in tiles}
    if len(zooms) > 1:
        raise MosaicError(f"tiles span multiple zooms: {sorted(zooms)}")
    xs = [c.x for c in tiles]
    ys = [c.y for c in tiles]
    zoom = zooms.pop()
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    missing = [
        TileCoord(zoom, x, y)
        for y in range(y0, y1 + 1)
        for x in range(x0, x1 + 1)
        if TileCoord(zoom, x, y) not in tiles
    ]
    if missing:
        raise MosaicError(
            "incomplete tile rectangle, missing: " + ", ".join(str(c) for c in missing),
            missing=missing,
        )
    sizes = {t.shape for t in tiles.values()}
    if len(sizes) > 1:
        raise ShapeError(f"tiles have mixed shapes: {sorted(sizes)}")
    s = validate_tile(next(iter(tiles.values()))).shape[0]
    cols, rows = x1 - x0 + 1, y1 - y0 + 1
    raster = np.empty((rows * s, cols * s, 3), dtype=np.uint8)
    for c, t in tiles.items():
        i, j = c.y - y0, c.x - x0
        raster[i * s : (i + 1) * s, j * s : (j + 1) * s] = validate_tile(t, s)
    return Mosaic(origin=TileCoord(zoom, x0, y0), columns=cols, rows=rows, raster=raster)


def complete_quads(coords) -> dict[TileCoord, tuple[TileCoord, TileCoord, TileCoord, TileCoord]]:
    """Map each parent coord whose four children are all present to its quad."""
    present = set(coords)
    out = {}
    for p in sorted({parent(c) for c in present}):
        quad = tuple(children(p))
        if all(q in present for q in quad):
            out[p] = quad
    return out
