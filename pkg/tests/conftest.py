"""Shared fixtures: paper-published reference values and corpus builders."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rs2map.reporting import MetricRow

# Published per-zoom comparison values for both strategies.
PUBLISHED_ZOOMS = (17, 16, 15, 14, 13)

PUBLISHED_SERIES = {
    "ssim": (0.6164, 0.6731, 0.5720, 0.4605, 0.4941),
    "essi": (0.0573, 0.1488, 0.1438, 0.1056, 0.1778),
    "iou_road": (0.3244, 0.3329, 0.3319, 0.3132, 0.1732),
    "iou_water": (0.2200, 0.2347, 0.2999, 0.3812, 0.4745),
}

PUBLISHED_PARALLEL = {
    "ssim": (0.6164, 0.5821, 0.5884, 0.4037, 0.4123),
    "essi": (0.0573, 0.1142, 0.1046, 0.0802, 0.08245),
    "iou_road": (0.3244, 0.2162, 0.1836, 0.1732, 0.1632),
    "iou_water": (0.2200, 0.2125, 0.2058, 0.1507, 0.2633),
}

# The published "average increase" row those tables carry.
PUBLISHED_INCREASE = {"ssim": 11.69, "essi": 53.78, "iou_road": 55.42, "iou_water": 72.34}

# Published per-zoom distribution EMD (reference ordering only; absolute
# values are corpus-dependent).
PUBLISHED_EMD_PARALLEL = (0.005782, 0.006339, 0.006066, 0.005909, 0.005336)
PUBLISHED_EMD_SERIES = (0.005782, 0.001789, 0.000973, 0.000611, 0.000700)


def published_rows(strategy: str) -> list[MetricRow]:
    values = PUBLISHED_SERIES if strategy == "series" else PUBLISHED_PARALLEL
    return [
        MetricRow(
            zoom=z,
            strategy=strategy,
            **{m: values[m][i] for m in values},
        )
        for i, z in enumerate(PUBLISHED_ZOOMS)
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


@pytest.fixture
def rand_tile():
    gen = np.random.default_rng(99)

    def make(size=16):
        return gen.integers(0, 256, size=(size, size, 3), dtype=np.uint8)

    return make
