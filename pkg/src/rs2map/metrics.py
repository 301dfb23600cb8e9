"""Full-reference image quality metrics and class-mask comparison.

SSIM follows the standard formulation: mean local similarity over 11x11
Gaussian-weighted windows (sigma 1.5), K1=0.01, K2=0.03, dynamic range 255,
computed on luma. ESSI is the same statistic computed over Sobel gradient
magnitude maps, so it rewards agreement of edge structure rather than of
flat color. Class IOU works on nearest-palette-color label masks; maps
encode object classes as colors, so a palette is the label space.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import convolve2d, correlate2d

from .errors import ShapeError
from .generators import Palette, nearest_palette_index

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 255.0

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T


def to_luma(image: np.ndarray) -> np.ndarray:
    """Grayscale float64 view of an image; RGB collapses by Rec.601 luma."""
    a = np.asarray(image, dtype=np.float64)
    if a.ndim == 2:
        return a
    if a.ndim == 3 and a.shape[2] == 3:
        r, g, b = LUMA_WEIGHTS
        return r * a[:, :, 0] + g * a[:, :, 1] + b * a[:, :, 2]
    raise ShapeError(f"expected HxW or HxWx3 image, got shape {a.shape}")


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    window = np.outer(g, g)
    return window / window.sum()


def _check_pair(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ShapeError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape[:2]}"
        )


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local structural similarity; 1.0 means identical structure."""
    x = to_luma(a)
    y = to_luma(b)
    _check_pair(x, y)
    window = gaussian_window()
    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2

    mu_x = convolve2d(x, window, mode="valid")
    mu_y = convolve2d(y, window, mode="valid")
    mu_xx = mu_x * mu_x
    mu_yy = mu_y * mu_y
    mu_xy = mu_x * mu_y
    var_x = convolve2d(x * x, window, mode="valid") - mu_xx
    var_y = convolve2d(y * y, window, mode="valid") - mu_yy
    cov = convolve2d(x * y, window, mode="valid") - mu_xy

    ssim_map = ((2.0 * mu_xy + c1) * (2.0 * cov + c2)) / (
        (mu_xx + mu_yy + c1) * (var_x + var_y + c2)
    )
    return float(ssim_map.mean())


def sobel_edges(image: np.ndarray) -> np.ndarray:
    """3x3 Sobel gradient magnitude on luma, symmetric boundary, clamped to
    [0, 255]."""
    lum = to_luma(image)
    gx = correlate2d(lum, _SOBEL_X, mode="same", boundary="symm")
    gy = correlate2d(lum, _SOBEL_Y, mode="same", boundary="symm")
    return np.minimum(np.sqrt(gx * gx + gy * gy), 255.0)


def essi(a: np.ndarray, b: np.ndarray) -> float:
    """Edge structural similarity: SSIM over Sobel gradient magnitude maps.

    Two constant images have identically zero edge maps and therefore
    essi == 1 even when their colors differ.
    """
    _check_pair(to_luma(a), to_luma(b))
    return ssim(sobel_edges(a), sobel_edges(b))


# -- class masks -------------------------------------------------------------


def label_map(tile: np.ndarray, palette: Palette) -> np.ndarray:
    """Per-pixel class labels (palette indices) by nearest palette color."""
    return nearest_palette_index(tile, palette)


def iou(pred: np.ndarray, truth: np.ndarray, class_index: int) -> float | None:
    """Intersection over union of one class between two label masks.

    Returns None when the class is absent from both masks (empty union);
    callers exclude such values from averages.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ShapeError(f"mask shapes differ: {pred.shape} vs {truth.shape}")
    p = pred == class_index
    t = truth == class_index
    union = int(np.logical_or(p, t).sum())
    if union == 0:
        return None
    return float(np.logical_and(p, t).sum() / union)


def class_iou(pred_tile: np.ndarray, truth_tile: np.ndarray, palette: Palette) -> dict[str, float | None]:
    """IOU per palette class between two tiles after nearest-color labeling."""
    pred = label_map(pred_tile, palette)
    truth = label_map(truth_tile, palette)
    return {label: iou(pred, truth, i) for i, (label, _) in enumerate(palette.entries)}


# -- palette derivation ------------------------------------------------------


def kmeans_colors(pixels: np.ndarray, k: int = 8, iters: int = 20, seed: int = 0) -> np.ndarray:
    """Deterministic k-means over RGB pixels: seeded farthest-point init,
    fixed Lloyd iteration count. Returns k centers as uint8 rows sorted by
    luma so center identity is stable across runs."""
    pts = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    if len(pts) < k:
        raise ValueError(f"need at least {k} pixels, got {len(pts)}")
    rng = np.random.default_rng(seed)
    centers = np.empty((k, 3), dtype=np.float64)
    centers[0] = pts[rng.integers(len(pts))]
    d2 = ((pts - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        centers[i] = pts[int(np.argmax(d2))]
        d2 = np.minimum(d2, ((pts - centers[i]) ** 2).sum(axis=1))
    for _ in range(iters):
        dists = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = dists.argmin(axis=1)
        for i in range(k):
            members = pts[assign == i]
            if len(members):
                centers[i] = members.mean(axis=0)
    luma = centers @ np.array(LUMA_WEIGHTS)
    order = np.argsort(luma, kind="stable")
    rounded = np.clip(np.floor(centers[order] + 0.5), 0, 255).astype(np.uint8)
    return rounded


def derive_palette(
    images,
    class_names: dict[int, str],
    k: int = 8,
    iters: int = 20,
    seed: int = 0,
    sample_per_image: int = 4096,
) -> Palette:
    """Cluster sampled map pixels into k colors and name them.

    ``class_names`` maps center index (luma-sorted) to a class label and is
    operator-supplied after inspecting the centers; unnamed centers become
    ``cluster{i}``.
    """
    bad = [i for i in class_names if not 0 <= i < k]
    if bad:
        raise ValueError(f"class_names indices {bad} out of range for k={k}")
    rng = np.random.default_rng(seed)
    samples = []
    for img in images:
        flat = np.asarray(img).reshape(-1, 3)
        take = min(sample_per_image, len(flat))
        samples.append(flat[rng.choice(len(flat), size=take, replace=False)])
    if not samples:
        raise ValueError("need at least one image to derive a palette")
    centers = kmeans_colors(np.concatenate(samples), k=k, iters=iters, seed=seed)
    entries = []
    seen = set()
    for i, center in enumerate(centers):
        rgb = tuple(int(v) for v in center)
        if rgb in seen:  # merged clusters can coincide after rounding
            continue
        seen.add(rgb)
        entries.append((class_names.get(i, f"cluster{i}"), rgb))
    return Palette(entries=tuple(entries))
