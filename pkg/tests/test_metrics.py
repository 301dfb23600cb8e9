"""SSIM/ESSI against per-window oracles, labeling, IOU, palette derivation."""

import numpy as np
import pytest

from oracles import ref_essi, ref_nearest_color, ref_sobel, ref_ssim
from rs2map.errors import ShapeError
from rs2map.generators import Palette
from rs2map.metrics import (
    class_iou,
    derive_palette,
    essi,
    gaussian_window,
    iou,
    kmeans_colors,
    label_map,
    sobel_edges,
    ssim,
    to_luma,
)

PALETTE = Palette((("background", (0, 0, 0)), ("road", (255, 255, 255)), ("water", (0, 0, 255))))


def _pair(rng, size=32):
    a = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
    b = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
    return a, b


# -- ssim --------------------------------------------------------------------


def test_gaussian_window_normalized():
    w = gaussian_window()
    assert w.shape == (11, 11)
    assert abs(w.sum() - 1.0) < 1e-12
    np.testing.assert_allclose(w, w.T)  # symmetric


def test_ssim_identity_is_one(rng):
    for _ in range(5):
        a, _ = _pair(rng)
        assert abs(ssim(a, a) - 1.0) < 1e-12


def test_ssim_symmetric(rng):
    for _ in range(10):
        a, b = _pair(rng)
        assert abs(ssim(a, b) - ssim(b, a)) < 1e-12


def test_ssim_matches_per_window_oracle(rng):
    for _ in range(5):
        a, b = _pair(rng, size=24)
        assert abs(ssim(a, b) - ref_ssim(a, b)) < 1e-6


def test_ssim_correlated_beats_random(rng):
    a, b = _pair(rng)
    noisy = np.clip(a.astype(int) + rng.integers(-10, 11, a.shape), 0, 255).astype(np.uint8)
    assert ssim(a, noisy) > ssim(a, b)


def test_ssim_range(rng):
    for _ in range(10):
        a, b = _pair(rng, size=16)
        v = ssim(a, b)
        assert -1.0 <= v <= 1.0


def test_ssim_rejects_mismatched_or_tiny_images(rng):
    a, b = _pair(rng, size=16)
    with pytest.raises(ShapeError):
        ssim(a, b[:8, :8])
    small = np.zeros((8, 8, 3), np.uint8)
    with pytest.raises(ShapeError):
        ssim(small, small)  # smaller than the 11x11 window


def test_ssim_accepts_grayscale(rng):
    g = rng.integers(0, 256, size=(20, 20), dtype=np.uint8)
    assert abs(ssim(g, g) - 1.0) < 1e-12


def test_to_luma_weights():
    px = np.array([[[100, 50, 200]]], dtype=np.uint8)
    expected = 0.299 * 100 + 0.587 * 50 + 0.114 * 200
    assert abs(to_luma(px)[0, 0] - expected) < 1e-12


# -- essi --------------------------------------------------------------------


def test_sobel_matches_oracle(rng):
    for _ in range(5):
        a, _ = _pair(rng, size=20)
        np.testing.assert_allclose(sobel_edges(a), ref_sobel(a), atol=1e-9)


def test_sobel_clamped_to_255():
    # horizontal step from 0 to 255 saturates the gradient
    img = np.zeros((16, 16, 3), np.uint8)
    img[:, 8:] = 255
    edges = sobel_edges(img)
    assert edges.max() == 255.0
    assert edges.min() >= 0.0


def test_essi_identity_and_symmetry(rng):
    a, b = _pair(rng)
    assert abs(essi(a, a) - 1.0) < 1e-12
    assert abs(essi(a, b) - essi(b, a)) < 1e-12


def test_essi_constant_vs_constant_is_one():
    a = np.full((20, 20, 3), 30, np.uint8)
    b = np.full((20, 20, 3), 200, np.uint8)
    # both edge maps are identically zero, so edge structure agrees fully
    assert abs(essi(a, b) - 1.0) < 1e-12
    assert ssim(a, b) < 0.5  # while plain ssim sees very different images


def test_essi_matches_composed_oracle(rng):
    for _ in range(5):
        a, b = _pair(rng, size=24)
        assert abs(essi(a, b) - ref_essi(a, b)) < 1e-6


# -- labeling + iou ----------------------------------------------------------


def test_label_map_matches_loop_oracle(rng):
    tile = rng.integers(0, 256, size=(12, 12, 3), dtype=np.uint8)
    colors = [rgb for _, rgb in PALETTE.entries]
    np.testing.assert_array_equal(label_map(tile, PALETTE), ref_nearest_color(tile, colors))


def test_label_map_tie_breaks_to_earliest_entry():
    pal = Palette((("a", (0, 0, 0)), ("b", (0, 0, 2))))
    # (0,0,1) is equidistant; the earlier entry must win
    px = np.array([[[0, 0, 1]]], dtype=np.uint8)
    assert label_map(px, pal)[0, 0] == 0


def test_label_map_example_distances():
    # (100,100,100): d(black)=30000, d(white)=72075, d(water)=44025
    px = np.array([[[100, 100, 100]]], dtype=np.uint8)
    assert label_map(px, PALETTE)[0, 0] == 0


def test_iou_simple_fraction():
    pred = np.array([[0, 1], [1, 1]])
    truth = np.array([[1, 1], [0, 1]])
    # class 1: intersection 2 (cells (0,1),(1,1)), union 4
    assert iou(pred, truth, 1) == pytest.approx(0.5)
    # class 0: intersection 0, union 2
    assert iou(pred, truth, 0) == pytest.approx(0.0)


def test_iou_identity_is_one(rng):
    mask = rng.integers(0, 3, size=(16, 16))
    for c in range(3):
        assert iou(mask, mask, c) == pytest.approx(1.0)


def test_iou_empty_union_is_undefined():
    z = np.zeros((4, 4), dtype=int)
    assert iou(z, z, 2) is None


def test_iou_third_case():
    # 1 shared pixel, 3 in the union
    pred = np.array([[1, 1, 0, 0]])
    truth = np.array([[0, 1, 1, 0]])
    assert iou(pred, truth, 1) == pytest.approx(1.0 / 3.0)


def test_class_iou_identity_tile(rng):
    tile = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
    result = class_iou(tile, tile, PALETTE)
    for label, value in result.items():
        assert value is None or value == pytest.approx(1.0)
    # random tiles hit all three nearest colors
    assert all(v == pytest.approx(1.0) for v in result.values())


# -- palette derivation ------------------------------------------------------


def test_kmeans_colors_deterministic_and_sorted(rng):
    pts = rng.integers(0, 256, size=(2000, 3))
    c1 = kmeans_colors(pts, k=4, seed=7)
    c2 = kmeans_colors(pts, k=4, seed=7)
    np.testing.assert_array_equal(c1, c2)
    lumas = 0.299 * c1[:, 0] + 0.587 * c1[:, 1] + 0.114 * c1[:, 2]
    assert list(lumas) == sorted(lumas)


def test_kmeans_recovers_separated_clusters(rng):
    centers = np.array([[10, 10, 10], [240, 240, 240], [20, 20, 230]])
    pts = np.concatenate(
        [c + rng.integers(-5, 6, size=(300, 3)) for c in centers]
    ).clip(0, 255)
    got = kmeans_colors(pts, k=3, seed=0)
    # one found center within a few units of each true center
    for c in centers:
        assert (np.abs(got.astype(int) - c).sum(axis=1)).min() < 15


def test_derive_palette_maps_named_clusters(rng):
    imgs = [
        np.full((8, 8, 3), (10, 10, 10), np.uint8),
        np.full((8, 8, 3), (250, 250, 250), np.uint8),
    ]
    pal = derive_palette(imgs, class_names={0: "background", 1: "road"}, k=2, seed=0)
    assert pal.labels == ("background", "road")
    # centers stay sorted by luma: background darker than road
    assert sum(pal.entries[0][1]) < sum(pal.entries[1][1])


def test_derive_palette_rejects_bad_cluster_index(rng):
    imgs = [np.full((8, 8, 3), 128, np.uint8)]
    with pytest.raises(ValueError):
        derive_palette(imgs, class_names={5: "road"}, k=2, seed=0)
