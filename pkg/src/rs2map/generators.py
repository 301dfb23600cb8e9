"""Translation generators and the edge registry.

A pipeline is a set of *edges*, each served by one generator: ``r2m@z``
translates a remote-sensing tile to a map tile at the same zoom, and
``m2m@z-(z-1)`` translates a merged map tile down one zoom level. Built-in
backends are deterministic pixel operations; the ``plugin`` backend runs an
external process speaking the wire protocol in :mod:`rs2map.plugin_host`,
which is where neural models live.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .tiles import DEFAULT_TILE_SIZE, validate_tile

_EDGE_RE = re.compile(r"^(r2m)@(\d+)$|^(m2m)@(\d+)-(\d+)$")


@dataclass(frozen=True, order=True)
class EdgeId:
    """One edge of the pipeline graph: ``r2m`` at a zoom, or ``m2m`` down one."""

    kind: str
    input_zoom: int
    output_zoom: int

    def __post_init__(self):
        if self.kind == "r2m":
            if self.input_zoom != self.output_zoom:
                raise ConfigError(
                    f"r2m edge must keep the zoom, got {self.input_zoom}->{self.output_zoom}"
                )
        elif self.kind == "m2m":
            if self.output_zoom != self.input_zoom - 1:
                raise ConfigError(
                    f"m2m edge must step down one zoom, got {self.input_zoom}->{self.output_zoom}"
                )
        else:
            raise ConfigError(f"unknown edge kind: {self.kind!r}")

    @classmethod
    def r2m(cls, zoom: int) -> "EdgeId":
        return cls("r2m", zoom, zoom)

    @classmethod
    def m2m(cls, input_zoom: int) -> "EdgeId":
        return cls("m2m", input_zoom, input_zoom - 1)

    @classmethod
    def parse(cls, text: str) -> "EdgeId":
        m = _EDGE_RE.match(text)
        if not m:
            raise ConfigError(f"bad edge id {text!r} (want 'r2m@Z' or 'm2m@Z-Y')")
        if m.group(1):
            return cls.r2m(int(m.group(2)))
        return cls("m2m", int(m.group(4)), int(m.group(5)))

    def __str__(self):
        if self.kind == "r2m":
            return f"r2m@{self.input_zoom}"
        return f"m2m@{self.input_zoom}-{self.output_zoom}"


def required_edges(kind: str, top_zoom: int, bottom_zoom: int) -> list[EdgeId]:
    """Edge set a strategy needs to cover zooms ``[bottom_zoom, top_zoom]``."""
    if top_zoom <= bottom_zoom:
        raise ConfigError(f"top_zoom {top_zoom} must exceed bottom_zoom {bottom_zoom}")
    if kind == "parallel":
        return [EdgeId.r2m(z) for z in range(top_zoom, bottom_zoom - 1, -1)]
    if kind == "series":
        return [EdgeId.r2m(top_zoom)] + [
            EdgeId.m2m(z) for z in range(top_zoom, bottom_zoom, -1)
        ]
    raise ConfigError(f"unknown strategy kind: {kind!r}")


@dataclass(frozen=True)
class Palette:
    """Ordered class palette: ``((label, (r, g, b)), ...)``.

    Order matters: nearest-color ties are broken in favour of the earliest
    entry.
    """

    entries: tuple[tuple[str, tuple[int, int, int]], ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("palette must not be empty")
        colors = [rgb for _, rgb in self.entries]
        if len(set(colors)) != len(colors):
            raise ValueError(f"palette colors must be pairwise distinct: {colors}")
        for label, rgb in self.entries:
            if len(rgb) != 3 or not all(0 <= v <= 255 for v in rgb):
                raise ValueError(f"bad palette color for {label!r}: {rgb}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.entries)

    def colors(self) -> np.ndarray:
        return np.array([rgb for _, rgb in self.entries], dtype=np.int32)

    @classmethod
    def from_config(cls, spec) -> "Palette":
        """Build from config data: a list of ``{"class": ..., "rgb": [r,g,b]}``."""
        entries = tuple((e["class"], tuple(int(v) for v in e["rgb"])) for e in spec)
        return cls(entries)


def nearest_palette_index(t: np.ndarray, palette: Palette) -> np.ndarray:
    """Per-pixel index of the nearest palette color (squared RGB distance,
    earliest entry wins ties)."""
    pix = np.asarray(t, dtype=np.int32)
    colors = palette.colors()
    best_d = np.full(pix.shape[:2], np.iinfo(np.int32).max, dtype=np.int32)
    best_i = np.zeros(pix.shape[:2], dtype=np.intp)
    for i, color in enumerate(colors):
        d = ((pix - color) ** 2).sum(axis=2)
        closer = d < best_d
        best_d[closer] = d[closer]
        best_i[closer] = i
    return best_i


def palette_project(t: np.ndarray, palette: Palette) -> np.ndarray:
    """Replace every pixel with its nearest palette color."""
    idx = nearest_palette_index(t, palette)
    colors = palette.colors().astype(np.uint8)
    return colors[idx]


def box_blur(t: np.ndarray, radius: int) -> np.ndarray:
    """Exact integer box blur with replicate padding; rounds half away from
    zero."""
    if radius < 1:
        return np.asarray(t, dtype=np.uint8).copy()
    k = 2 * radius + 1
    w = k * k
    padded = np.pad(np.asarray(t, dtype=np.int64), ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    # summed-area table per channel
    sat = padded.cumsum(axis=0).cumsum(axis=1)
    sat = np.pad(sat, ((1, 0), (1, 0), (0, 0)))
    h, wd = t.shape[:2]
    sums = (
        sat[k : k + h, k : k + wd]
        - sat[0:h, k : k + wd]
        - sat[k : k + h, 0:wd]
        + sat[0:h, 0:wd]
    )
    return ((2 * sums + w) // (2 * w)).astype(np.uint8)


def degrade_blur(t: np.ndarray, radius: int = 1, palette: Palette | None = None) -> np.ndarray:
    """Box blur followed by optional palette re-projection; a deliberately
    lossy stand-in for a map-to-map generator."""
    out = box_blur(t, radius)
    if palette is not None:
        out = palette_project(out, palette)
    return out


class GeneratorHandle:
    """A translation endpoint for one pipeline edge.

    ``translate`` is total on well-formed tiles of the configured size and
    preserves dimensions. Built-in backends are pure functions; the plugin
    backend forwards to an external process pool.
    """

    def __init__(self, edge: EdgeId, backend: str, fn, tile_size: int = DEFAULT_TILE_SIZE, closer=None):
        self.edge = edge
        self.backend = backend
        self.tile_size = tile_size
        self._fn = fn
        self._closer = closer

    def translate(self, t: np.ndarray) -> np.ndarray:
        t = validate_tile(t, self.tile_size)
        out = self._fn(t)
        out = np.asarray(out)
        if out.shape != t.shape:
            raise ShapeError(
                f"generator {self.edge} changed tile shape {t.shape} -> {out.shape}"
            )
        return out.astype(np.uint8, copy=False)

    def close(self):
        if self._closer is not None:
            self._closer()

    def __repr__(self):
        return f"GeneratorHandle({self.edge}, backend={self.backend!r})"


def translate(g: GeneratorHandle, t: np.ndarray) -> np.ndarray:
    return g.translate(t)


def _build_handle(edge: EdgeId, spec: dict, palettes: dict[str, Palette], tile_size: int) -> GeneratorHandle:
    backend = spec.get("backend", "identity")
    if backend == "identity":
        return GeneratorHandle(edge, backend, lambda t: t, tile_size)
    if backend == "palette_project":
        pal = _resolve_palette(spec, palettes, edge)
        return GeneratorHandle(edge, backend, lambda t: palette_project(t, pal), tile_size)
    if backend == "degrade_blur":
        radius = int(spec.get("radius", 1))
        pal = _resolve_palette(spec, palettes, edge) if "palette" in spec else None
        return GeneratorHandle(edge, backend, lambda t: degrade_blur(t, radius, pal), tile_size)
    if backend == "plugin":
        from .plugin_host import PluginPool

        cmd = spec.get("cmd")
        if not cmd:
            raise ConfigError(f"plugin backend for {edge} needs a 'cmd' list")
        pool = PluginPool(
            cmd,
            edge,
            tile_size,
            processes=int(spec.get("pool", 1)),
            timeout=spec.get("timeout"),
        )
        return GeneratorHandle(edge, backend, pool.translate, tile_size, closer=pool.close)
    raise ConfigError(f"unknown backend {backend!r} for edge {edge}")


def _resolve_palette(spec, palettes, edge):
    ref = spec.get("palette")
    if isinstance(ref, str):
        if ref not in palettes:
            raise ConfigError(f"edge {edge} references unknown palette {ref!r}")
        return palettes[ref]
    if isinstance(ref, (list, tuple)):
        return Palette.from_config(ref)
    raise ConfigError(f"edge {edge} needs a palette (name or inline list)")


class Registry:
    """Edge -> generator mapping for one run."""

    def __init__(self, handles: dict[EdgeId, GeneratorHandle]):
        self.handles = handles

    def __getitem__(self, edge: EdgeId) -> GeneratorHandle:
        return self.handles[edge]

    def __contains__(self, edge: EdgeId) -> bool:
        return edge in self.handles

    def edges(self) -> list[EdgeId]:
        return sorted(self.handles)

    def validate_for(self, kind: str, top_zoom: int, bottom_zoom: int) -> None:
        missing = [e for e in required_edges(kind, top_zoom, bottom_zoom) if e not in self.handles]
        if missing:
            raise ConfigError(
                f"registry is missing edges required by the {kind} strategy: "
                + ", ".join(str(e) for e in missing),
                missing_edges=missing,
            )

    def close(self):
        for h in self.handles.values():
            h.close()


def load_registry(config: dict, tile_size: int = DEFAULT_TILE_SIZE, require: tuple[str, int, int] | None = None) -> Registry:
    """Build the edge registry from its config section.

    ``config`` holds ``edges`` (edge id -> backend spec) and optionally
    ``palettes`` (name -> palette list). When ``require`` is given as
    ``(strategy_kind, top_zoom, bottom_zoom)``, coverage is validated and a
    :class:`ConfigError` lists any missing edges.
    """
    palettes = {
        name: Palette.from_config(spec)
        for name, spec in config.get("palettes", {}).items()
    }
    handles = {}
    for edge_text, spec in config.get("edges", {}).items():
        edge = EdgeId.parse(edge_text)
        handles[edge] = _build_handle(edge, spec, palettes, tile_size)
    registry = Registry(handles)
    if require is not None:
        registry.validate_for(*require)
    return registry
