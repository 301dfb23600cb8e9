"""
Tile pyramids: coordinates, quads, and merge-downsampling
=========================================================

A slippy-map pyramid addresses tiles as (zoom, x, y). Each tile at zoom
z covers the same ground as a 2x2 quad of tiles at zoom z+1, so walking
one zoom down means assembling four children and shrinking them.
"""

import numpy as np

from rs2map import TileCoord, children, merge_downsample, mosaic, parent

# A coordinate knows its place in the quadtree. Children come back in
# reading order: NW, NE, SW, SE.
c = TileCoord(13, 3, 5)
print("tile:", c)
print("children:", [str(k) for k in children(c)])
print("parent of first child:", parent(children(c)[0]))

# The world tile (0,0,0) splits the same way.
print("world children:", [str(k) for k in children(TileCoord(0, 0, 0))])

# merge_downsample is the pyramid's workhorse: assemble the quad into one
# double-size image, then box-average every 2x2 pixel block, rounding
# halves away from zero. Four flat tiles blend into their mean.
size = 4
quad = [np.full((size, size, 3), v, dtype=np.uint8) for v in (10, 20, 30, 40)]
merged = merge_downsample(quad)
print("corner values after merging flat 10/20/30/40 tiles:")
print(merged[0, 0, 0], merged[0, -1, 0], merged[-1, 0, 0], merged[-1, -1, 0])

# A mosaic stitches any rectangle of same-zoom tiles into one image, and
# tile_at cuts a tile back out, byte for byte.
tiles = {
    TileCoord(13, x, y): np.full((size, size, 3), 20 * (x + y), dtype=np.uint8)
    for x in (3, 4)
    for y in (5, 6)
}
sheet = mosaic(tiles)
print("mosaic raster shape for a 2x2 block:", sheet.raster.shape)
recovered = sheet.tile_at(TileCoord(13, 4, 6))
print("tile recovered from mosaic intact:", bool(np.array_equal(recovered, tiles[TileCoord(13, 4, 6)])))
