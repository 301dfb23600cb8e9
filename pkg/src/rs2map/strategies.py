"""Orchestration of the two multi-scale generation strategies.

* parallel: an independent rsi->map generator per zoom level; every level
  is translated straight from that level's remote-sensing tiles.
* series: one rsi->map generator at the top zoom, then a chain of
  map-to-map generators; each lower level is produced by merge-downsampling
  complete quads of the level above and translating the merged tile.

Both produce a :class:`MultiScaleAtlas`. With deterministic generators a
run is byte-reproducible regardless of worker count: tiles are translated
in a pool but committed in sorted coord order.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Manifest, ManifestEntry
from .errors import ConfigError
from .generators import EdgeId, Registry
from .tile_io import read_tile, write_tile
from .tiles import TileCoord, children, complete_quads, merge_downsample


@dataclass(frozen=True)
class StrategyConfig:
    kind: str  # "series" or "parallel"
    top_zoom: int = 17
    bottom_zoom: int = 13

    def __post_init__(self):
        if self.kind not in ("series", "parallel"):
            raise ConfigError(f"strategy kind must be series or parallel, got {self.kind!r}")
        if self.top_zoom <= self.bottom_zoom:
            raise ConfigError(
                f"top_zoom {self.top_zoom} must exceed bottom_zoom {self.bottom_zoom}"
            )

    @property
    def zooms(self) -> list[int]:
        return list(range(self.top_zoom, self.bottom_zoom - 1, -1))

    @classmethod
    def from_config(cls, cfg: dict) -> "StrategyConfig":
        return cls(
            kind=cfg.get("kind", "series"),
            top_zoom=int(cfg.get("top_zoom", 17)),
            bottom_zoom=int(cfg.get("bottom_zoom", 13)),
        )


@dataclass(frozen=True)
class Provenance:
    strategy: str
    top_zoom: int
    bottom_zoom: int
    registry_hash: str
    manifest_hash: str
    seed: int = 0

    def as_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "top_zoom": self.top_zoom,
            "bottom_zoom": self.bottom_zoom,
            "registry_hash": self.registry_hash,
            "manifest_hash": self.manifest_hash,
            "seed": self.seed,
        }


@dataclass
class MultiScaleAtlas:
    """Generated map tiles for every zoom of one run."""

    levels: dict[int, dict[TileCoord, np.ndarray]]
    provenance: Provenance
    warnings: list[str] = field(default_factory=list)
    timings: dict[int, float] = field(default_factory=dict)

    def level_sizes(self) -> dict[int, int]:
        return {z: len(tiles) for z, tiles in self.levels.items()}


def registry_config_hash(registry_cfg: dict) -> str:
    blob = json.dumps(registry_cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _translate_level(handle, tiles: dict[TileCoord, np.ndarray], workers: int) -> dict[TileCoord, np.ndarray]:
    coords = sorted(tiles)
    if workers <= 1:
        return {c: handle.translate(tiles[c]) for c in coords}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        outs = list(pool.map(lambda c: handle.translate(tiles[c]), coords))
    return dict(zip(coords, outs))


def run_parallel(
    manifest: Manifest,
    registry: Registry,
    cfg: StrategyConfig,
    loader,
    workers: int = 1,
    split: str = "test",
    seed: int = 0,
) -> MultiScaleAtlas:
    """Translate each zoom level's rsi tiles independently.

    No data flows between zoom levels: level z is exactly
    ``{r2m@z(rsi) for rsi at z}``.
    """
    registry.validate_for("parallel", cfg.top_zoom, cfg.bottom_zoom)
    for z in cfg.zooms:
        if not manifest.select(kind="rsi", zoom=z, split=split):
            raise ConfigError(f"no {split} rsi tiles at zoom {z} for the parallel strategy")
    levels: dict[int, dict[TileCoord, np.ndarray]] = {}
    timings = {}
    for z in cfg.zooms:
        started = time.monotonic()
        entries = manifest.select(kind="rsi", zoom=z, split=split)
        inputs = {e.coord: loader(e) for e in sorted(entries, key=lambda e: e.coord)}
        levels[z] = _translate_level(registry[EdgeId.r2m(z)], inputs, workers)
        timings[z] = time.monotonic() - started
    return MultiScaleAtlas(
        levels=levels,
        provenance=_provenance("parallel", cfg, registry, manifest, seed),
        timings=timings,
    )


def series_step(level: dict[TileCoord, np.ndarray], handle, workers: int = 1):
    """One rung of the series chain: merge complete quads of ``level`` and
    translate each merged tile one zoom down.

    Returns ``(next_level, incomplete)``; parents with partial quads are
    dropped, never padded.
    """
    if handle.edge.kind != "m2m":
        raise ConfigError(f"series step needs an m2m edge, got {handle.edge}")
    zooms = {c.zoom for c in level}
    if zooms and zooms != {handle.edge.input_zoom}:
        raise ConfigError(
            f"edge {handle.edge} cannot consume tiles at zoom {sorted(zooms)}"
        )
    quads = complete_quads(level)
    incomplete = sorted(
        {p for p in {TileCoord(c.zoom - 1, c.x // 2, c.y // 2) for c in level} if p not in quads}
    )
    merged = {p: merge_downsample([level[q] for q in quad]) for p, quad in quads.items()}
    return _translate_level(handle, merged, workers), incomplete


def run_series(
    manifest: Manifest,
    registry: Registry,
    cfg: StrategyConfig,
    loader,
    workers: int = 1,
    split: str = "test",
    seed: int = 0,
) -> MultiScaleAtlas:
    """Translate top-zoom rsi tiles, then chain map-to-map steps downward.

    Only top-zoom remote-sensing tiles are ever read; every lower level is
    derived from the generated level above it.
    """
    registry.validate_for("series", cfg.top_zoom, cfg.bottom_zoom)
    top_entries = manifest.select(kind="rsi", zoom=cfg.top_zoom, split=split)
    if not top_entries:
        raise ConfigError(f"no {split} rsi tiles at top zoom {cfg.top_zoom}")
    warnings = []
    timings = {}

    started = time.monotonic()
    inputs = {e.coord: loader(e) for e in sorted(top_entries, key=lambda e: e.coord)}
    levels = {cfg.top_zoom: _translate_level(registry[EdgeId.r2m(cfg.top_zoom)], inputs, workers)}
    timings[cfg.top_zoom] = time.monotonic() - started

    for z in range(cfg.top_zoom, cfg.bottom_zoom, -1):
        started = time.monotonic()
        next_level, incomplete = series_step(levels[z], registry[EdgeId.m2m(z)], workers)
        timings[z - 1] = time.monotonic() - started
        if incomplete:
            warnings.append(
                f"zoom {z}: dropped {len(incomplete)} incomplete quad(s) descending to {z - 1}"
            )
        if not next_level:
            warnings.append(f"zoom {z - 1}: empty level, no complete quads above")
            break
        levels[z - 1] = next_level
    return MultiScaleAtlas(
        levels=levels,
        provenance=_provenance("series", cfg, registry, manifest, seed),
        warnings=warnings,
        timings=timings,
    )


def run_strategy(manifest, registry, cfg, loader, workers=1, split="test", seed=0) -> MultiScaleAtlas:
    runner = run_series if cfg.kind == "series" else run_parallel
    return runner(manifest, registry, cfg, loader, workers=workers, split=split, seed=seed)


def _provenance(kind, cfg, registry, manifest, seed=0) -> Provenance:
    reg_blob = ",".join(f"{e}:{registry[e].backend}" for e in registry.edges())
    return Provenance(
        strategy=kind,
        seed=seed,
        top_zoom=cfg.top_zoom,
        bottom_zoom=cfg.bottom_zoom,
        registry_hash=hashlib.sha256(reg_blob.encode()).hexdigest(),
        manifest_hash=manifest.sha256(),
    )


# -- persistence -------------------------------------------------------------


def save_atlas(atlas: MultiScaleAtlas, run_dir: str | Path) -> Path:
    """Write an atlas as a run directory mirroring the corpus layout.

    ``map/{zoom}/{x}/{y}.png`` per tile plus ``summary.json``. The run
    directory holds only deterministic facts (tiles, provenance, level
    sizes, warnings) so a rerun with the same config is byte-identical.
    Wall-clock timings are diagnostic, so they go to a sibling file
    ``<run_dir>.timings.json`` outside the determinism contract.
    """
    run_dir = Path(run_dir)
    for z in sorted(atlas.levels, reverse=True):
        for coord in sorted(atlas.levels[z]):
            write_tile(run_dir / "map" / str(z) / str(coord.x) / f"{coord.y}.png", atlas.levels[z][coord])
    summary = {
        "provenance": atlas.provenance.as_dict(),
        "levels": {str(z): n for z, n in sorted(atlas.level_sizes().items())},
        "warnings": list(atlas.warnings),
    }
    (run_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    timings_path = run_dir.parent / f"{run_dir.name or 'run'}.timings.json"
    timings_path.write_text(
        json.dumps({str(z): round(t, 6) for z, t in sorted(atlas.timings.items())}, indent=2) + "\n"
    )
    return run_dir


def load_atlas_tiles(run_dir: str | Path, tile_size=None) -> dict[int, dict[TileCoord, np.ndarray]]:
    """Read a saved run's generated tiles back into memory."""
    run_dir = Path(run_dir)
    levels: dict[int, dict[TileCoord, np.ndarray]] = {}
    for png in sorted((run_dir / "map").rglob("*.png")):
        z, x, y = png.parts[-3], png.parts[-2], png.stem
        coord = TileCoord(int(z), int(x), int(y))
        levels.setdefault(coord.zoom, {})[coord] = read_tile(png, tile_size)
    return levels


def load_run_summary(run_dir: str | Path) -> dict:
    return json.loads((Path(run_dir) / "summary.json").read_text())
