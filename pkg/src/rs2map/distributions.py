"""Pixel distributions and Earth Mover's Distance.

The gap a generator has to bridge is the gap between its input and output
pixel distributions. Remote-sensing imagery and rendered maps at the same
zoom are far apart (cross-domain translation); maps at neighboring zooms
are close (near intra-domain). The per-zoom EMD table quantifies this and
is how the series strategy's cheaper edges show up in numbers.

EMD here is Wasserstein-1 between per-channel 256-bin intensity
histograms with ground distance ``|i - j| / 255``; in 1-D that has the
closed form ``sum |CDF1 - CDF2| / 255``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class PixelHistogram:
    """Per-channel histogram of 8-bit intensities: mass shape (3, bins)."""

    mass: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=np.float64)
        if mass.ndim != 2 or mass.shape[0] != 3:
            raise ValueError(f"mass must have shape (3, bins), got {mass.shape}")
        if (mass < 0).any():
            raise ValueError("histogram mass must be non-negative")
        if self.normalized:
            sums = mass.sum(axis=1)
            if not np.allclose(sums, 1.0, rtol=0, atol=NORMALIZATION_TOL):
                raise ValueError(f"normalized histogram channels must sum to 1, got {sums}")
        object.__setattr__(self, "mass", mass)

    @property
    def bins(self) -> int:
        return self.mass.shape[1]

    def channel(self, i: int) -> np.ndarray:
        return self.mass[i]


def pixel_histogram(images) -> PixelHistogram:
    """Pooled per-channel 256-bin distribution over a tile collection."""
    counts = np.zeros((3, 256), dtype=np.int64)
    n = 0
    for img in images:
        a = np.asarray(img)
        if a.ndim != 3 or a.shape[2] != 3:
            raise ValueError(f"expected HxWx3 images, got shape {a.shape}")
        for c in range(3):
            counts[c] += np.bincount(a[:, :, c].reshape(-1), minlength=256)
        n += 1
    if n == 0:
        raise ValueError("cannot build a histogram from an empty collection")
    return PixelHistogram(mass=counts / counts.sum(axis=1, keepdims=True))


def emd(p: np.ndarray, q: np.ndarray) -> float:
    """Wasserstein-1 between two normalized 1-D histograms.

    Ground distance between bins i and j is ``|i - j| / 255`` (the 8-bit
    intensity scale), independent of the bin count.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError(f"histograms must be 1-D and same length: {p.shape} vs {q.shape}")
    for name, h in (("first", p), ("second", q)):
        if (h < 0).any() or abs(h.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"{name} histogram is not normalized")
    return float(np.abs(np.cumsum(p - q)).sum() / 255.0)


def histogram_emd(h1: PixelHistogram, h2: PixelHistogram) -> float:
    """Image-level EMD: mean of the per-channel distances."""
    if h1.bins != h2.bins:
        raise ValueError(f"bin counts differ: {h1.bins} vs {h2.bins}")
    return float(np.mean([emd(h1.channel(c), h2.channel(c)) for c in range(3)]))


def emd_strategy_table(
    rsi_tiles: dict[int, list],
    map_tiles: dict[int, list],
    top_zoom: int | None = None,
) -> dict[str, dict[int, float]]:
    """Per-zoom translation cost of each strategy, as distribution EMD.

    parallel row: EMD(rsi@z, map@z) at every zoom — each level is its own
    cross-domain translation. series row: the same cross-domain cost at the
    top zoom only, then EMD(map@z+1, map@z) below it — the cost of each
    map-to-map step.
    """
    zooms = sorted(rsi_tiles, reverse=True)
    if top_zoom is None:
        top_zoom = max(zooms) if zooms else 0
    missing = [z for z in zooms if z not in map_tiles or not map_tiles[z] or not rsi_tiles[z]]
    if not zooms or missing:
        raise ValueError(f"missing rsi/map tiles for zooms: {missing or 'all'}")
    rsi_h = {z: pixel_histogram(rsi_tiles[z]) for z in zooms}
    map_h = {z: pixel_histogram(map_tiles[z]) for z in zooms}
    parallel = {z: histogram_emd(rsi_h[z], map_h[z]) for z in zooms}
    series = {}
    for z in zooms:
        if z == top_zoom:
            series[z] = parallel[z]
        else:
            if z + 1 not in map_h:
                raise ValueError(f"series row needs maps at zoom {z + 1} to score zoom {z}")
            series[z] = histogram_emd(map_h[z + 1], map_h[z])
    return {"parallel": parallel, "series": series}
