"""Tile addressing, quadtree relations, merge-downsample, and mosaics."""

import numpy as np
import pytest

from oracles import ref_merge_box
from rs2map.errors import MosaicError, ShapeError
from rs2map.tiles import (
    MAX_ZOOM,
    TileCoord,
    children,
    complete_quads,
    merge_downsample,
    mosaic,
    parent,
    validate_tile,
)


def test_coord_bounds_validated():
    TileCoord(0, 0, 0)
    TileCoord(3, 7, 7)
    with pytest.raises(ValueError):
        TileCoord(3, 8, 0)
    with pytest.raises(ValueError):
        TileCoord(2, 0, -1)
    with pytest.raises(ValueError):
        TileCoord(-1, 0, 0)
    with pytest.raises(ValueError):
        TileCoord(MAX_ZOOM + 1, 0, 0)


def test_children_order_and_coords():
    kids = children(TileCoord(13, 3, 5))
    # row-major quad: NW, NE, SW, SE
    assert kids == [
        TileCoord(14, 6, 10),
        TileCoord(14, 7, 10),
        TileCoord(14, 6, 11),
        TileCoord(14, 7, 11),
    ]
    assert children(TileCoord(0, 0, 0)) == [
        TileCoord(1, 0, 0),
        TileCoord(1, 1, 0),
        TileCoord(1, 0, 1),
        TileCoord(1, 1, 1),
    ]


def test_children_of_out_of_range_coord_rejected():
    with pytest.raises(ValueError):
        children(TileCoord(16, 40000, 70000))  # y exceeds 2**16


def test_parent_examples():
    assert parent(TileCoord(14, 7, 11)) == TileCoord(13, 3, 5)
    assert parent(TileCoord(17, 1, 0)) == TileCoord(16, 0, 0)


def test_parent_child_round_trip(rng):
    for _ in range(200):
        z = int(rng.integers(1, 12))
        c = TileCoord(z, int(rng.integers(0, 2**z)), int(rng.integers(0, 2**z)))
        assert all(parent(k) == c for k in children(c))
        if z >= 1:
            assert c in children(parent(c))


def test_children_partition_level():
    z = 3
    covered = set()
    for x in range(2**z):
        for y in range(2**z):
            covered.update(children(TileCoord(z, x, y)))
    assert len(covered) == 4 ** (z + 1)


def test_parent_at_zoom_zero_rejected():
    with pytest.raises(ValueError):
        parent(TileCoord(0, 0, 0))


def test_validate_tile_contract(rand_tile):
    t = rand_tile(16)
    assert validate_tile(t, 16) is not t or True  # returns an array of same data
    with pytest.raises(ShapeError):
        validate_tile(t, 32)
    with pytest.raises(ShapeError):
        validate_tile(np.zeros((16, 8, 3), dtype=np.uint8))
    with pytest.raises(ShapeError):
        validate_tile(np.zeros((12, 12, 3), dtype=np.uint8))  # not a power of two
    with pytest.raises(ShapeError):
        validate_tile(np.zeros((16, 16), dtype=np.uint8))


# -- merge_downsample --------------------------------------------------------


def test_merge_downsample_matches_decimal_oracle(rng):
    for size in (2, 4, 8, 16):
        for _ in range(4):
            quad = [rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8) for _ in range(4)]
            got = merge_downsample(quad)
            assert got.dtype == np.uint8
            assert got.shape == (size, size, 3)
            np.testing.assert_array_equal(got, ref_merge_box(quad))


def test_merge_downsample_constant_quad():
    color = np.array([37, 99, 200], dtype=np.uint8)
    quad = [np.tile(color, (4, 4, 1)) for _ in range(4)]
    np.testing.assert_array_equal(merge_downsample(quad), np.tile(color, (4, 4, 1)))


def test_merge_downsample_checkerboard_becomes_128():
    # aligned 1-px checkerboards: every 2x2 window holds two 0s and two
    # 255s, mean 127.5, which rounds away from zero to 128
    size = 4
    ij = np.add.outer(np.arange(size), np.arange(size)) % 2
    board = np.repeat((ij * 255).astype(np.uint8)[:, :, None], 3, axis=2)
    out = merge_downsample([board, board, board, board])
    np.testing.assert_array_equal(out, np.full((size, size, 3), 128, np.uint8))


def test_merge_downsample_rounds_half_away_from_zero():
    # one averaging window holds (0, 0, 0, 2): mean 0.5 must round to 1
    nw = np.zeros((2, 2, 3), np.uint8)
    nw[1, 1] = 2
    rest = [np.zeros((2, 2, 3), np.uint8) for _ in range(3)]
    out = merge_downsample([nw, *rest])
    assert out[0, 0, 0] == 1
    np.testing.assert_array_equal(out, ref_merge_box([nw, *rest]))


def test_merge_downsample_quadrant_layout():
    # each child's content lands in its own quadrant of the assembly
    quad = [np.full((2, 2, 3), v, np.uint8) for v in (10, 20, 30, 40)]
    out = merge_downsample(quad)
    assert out[0, 0, 0] == 10 and out[0, 1, 0] == 20
    assert out[1, 0, 0] == 30 and out[1, 1, 0] == 40


def test_merge_downsample_rejects_bad_quads(rand_tile):
    t = rand_tile(8)
    with pytest.raises(ValueError):
        merge_downsample([t, t, t])
    with pytest.raises(ShapeError):
        merge_downsample([t, t, t, rand_tile(16)])


def test_merge_downsample_extremes():
    zeros = [np.zeros((4, 4, 3), np.uint8)] * 4
    ones = [np.full((4, 4, 3), 255, np.uint8)] * 4
    assert merge_downsample(zeros).max() == 0
    assert merge_downsample(ones).min() == 255


# -- mosaic ------------------------------------------------------------------


def test_mosaic_assembles_rectangle(rand_tile):
    tiles = {}
    arr = {}
    for x in range(2, 5):
        for y in range(7, 9):
            t = rand_tile(8)
            tiles[TileCoord(4, x, y)] = t
            arr[(x, y)] = t
    m = mosaic(tiles)
    assert m.columns == 3 and m.rows == 2
    assert m.raster.shape == (16, 24, 3)
    for x in range(2, 5):
        for y in range(7, 9):
            np.testing.assert_array_equal(m.tile_at(TileCoord(4, x, y)), arr[(x, y)])


def test_mosaic_names_missing_tiles(rand_tile):
    tiles = {
        TileCoord(4, 0, 0): rand_tile(8),
        TileCoord(4, 1, 1): rand_tile(8),
    }
    with pytest.raises(MosaicError) as e:
        mosaic(tiles)
    missing = set(e.value.missing)
    assert missing == {TileCoord(4, 1, 0), TileCoord(4, 0, 1)}
    assert "(4, 1, 0)" in str(e.value) or "1" in str(e.value)


def test_mosaic_single_tile(rand_tile):
    t = rand_tile(8)
    m = mosaic({TileCoord(2, 1, 1): t})
    np.testing.assert_array_equal(m.raster, t)


def test_mosaic_quadrants_in_coordinate_order():
    tiles = {
        TileCoord(3, 2, 4): np.full((8, 8, 3), 10, np.uint8),
        TileCoord(3, 3, 4): np.full((8, 8, 3), 20, np.uint8),
        TileCoord(3, 2, 5): np.full((8, 8, 3), 30, np.uint8),
        TileCoord(3, 3, 5): np.full((8, 8, 3), 40, np.uint8),
    }
    m = mosaic(tiles)
    assert m.raster.shape == (16, 16, 3)
    assert m.raster[0, 0, 0] == 10 and m.raster[0, 15, 0] == 20
    assert m.raster[15, 0, 0] == 30 and m.raster[15, 15, 0] == 40


def test_mosaic_rejects_mixed_zooms(rand_tile):
    with pytest.raises(ValueError):
        mosaic({TileCoord(2, 0, 0): rand_tile(8), TileCoord(3, 0, 0): rand_tile(8)})


def test_mosaic_rejects_empty():
    with pytest.raises(ValueError):
        mosaic({})


# -- complete_quads ----------------------------------------------------------


def test_complete_quads_finds_only_full_groups():
    full_parent = TileCoord(3, 1, 1)
    partial_parent = TileCoord(3, 2, 2)
    coords = set(children(full_parent)) | set(children(partial_parent)[:3])
    quads = complete_quads(coords)
    assert set(quads) == {full_parent}
    assert list(quads[full_parent]) == children(full_parent)


def test_complete_quads_empty_and_dense():
    assert complete_quads([]) == {}
    level = [TileCoord(2, x, y) for x in range(4) for y in range(4)]
    quads = complete_quads(level)
    assert len(quads) == 4
    assert all(len(v) == 4 for v in quads.values())
