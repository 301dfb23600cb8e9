"""
What each strategy asks of its generators
=========================================

A generator's job is easier when its input and output pixel
distributions are close. Earth Mover's Distance over intensity
histograms quantifies that: the parallel strategy pays the full
imagery-to-map distance at every zoom, while the series strategy pays it
once at the top and then only map-to-map distances below.
"""

import tempfile
from pathlib import Path

import numpy as np

from rs2map import TileLoader, emd, emd_strategy_table, synthetic_corpus
from rs2map.reporting import emd_table_to_csv

# The 1-D closed form first: moving a point mass across the whole range
# costs exactly 1, and shrinking the move shrinks the cost linearly.
a, b = np.zeros(256), np.zeros(256)
a[0] = 1.0
b[255] = 1.0
print(f"point mass 0 -> 255: emd={emd(a, b):.4f}")
b[:] = 0
b[51] = 1.0
print(f"point mass 0 -> 51:  emd={emd(a, b):.4f}  (51/255 = {51 / 255:.4f})")

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp) / "corpus"
    manifest = synthetic_corpus(root, top_zoom=16, bottom_zoom=13,
                                tiles_per_side=8, tile_size=32, seed=7)
    loader = TileLoader(root, 32)
    zooms = range(16, 12, -1)
    rsi = {z: [loader(e) for e in manifest.select(kind="rsi", zoom=z)] for z in zooms}
    maps = {z: [loader(e) for e in manifest.select(kind="map", zoom=z)] for z in zooms}

    # Per-zoom translation cost for each strategy, as a small table.
    table = emd_strategy_table(rsi, maps, 16)
    print("\nper-zoom distribution distance each strategy must bridge:")
    print(emd_table_to_csv(table))

    worst = max(table["series"][z] / table["parallel"][z] for z in zooms if z != 16)
    print(f"below the top zoom, series never costs more than "
          f"{100 * worst:.1f}% of parallel on this corpus")
