"""Tile corpus acquisition, manifests, splits, and training-pair construction.

On disk a corpus is ``{root}/{city}/{kind}/{zoom}/{x}/{y}.png`` with kind
``rsi`` (remote-sensing imagery) or ``map`` (rendered map tiles). The
manifest is a canonical tab-separated text file, one line per tile, sorted
by (city, kind, zoom, x, y) so that diffs and content hashes are stable.

Two pair kinds feed generator training and evaluation:

* RM pair: an rsi tile and the real map tile at the same coord.
* MM pair: the merge-downsampled quad of generated maps at zoom n paired
  with the real map tile of the parent coord at zoom n-1.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FetchError, IntegrityError
from .tile_io import decode_png, encode_png, read_tile, write_tile
from .tiles import TileCoord, children, complete_quads, merge_downsample

KINDS = ("rsi", "map")
SPLITS = ("train", "test")
DEFAULT_TEST_CITIES = ("mexico_city", "tokyo")
DEFAULT_ZOOMS = (13, 17)  # inclusive bottom..top

_MANIFEST_FIELDS = ("city", "kind", "zoom", "x", "y", "split", "checksum", "path")


def tile_relpath(city: str, kind: str, coord: TileCoord) -> str:
    return f"{city}/{kind}/{coord.zoom}/{coord.x}/{coord.y}.png"


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass(frozen=True, order=True)
class ManifestEntry:
    city: str
    kind: str
    coord: TileCoord
    split: str
    checksum: str
    path: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.path != tile_relpath(self.city, self.kind, self.coord):
            raise ValueError(
                f"path {self.path!r} does not match layout for "
                f"{self.city}/{self.kind}/{self.coord}"
            )

    @property
    def zoom(self) -> int:
        return self.coord.zoom


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        ordered = tuple(sorted(self.entries, key=_entry_key))
        object.__setattr__(self, "entries", ordered)

    def __len__(self):
        return len(self.entries)

    def select(self, kind=None, zoom=None, split=None, city=None):
        return [
            e
            for e in self.entries
            if (kind is None or e.kind == kind)
            and (zoom is None or e.zoom == zoom)
            and (split is None or e.split == split)
            and (city is None or e.city == city)
        ]

    def lookup(self, kind: str, coord: TileCoord, split=None) -> ManifestEntry | None:
        for e in self.entries:
            if e.kind == kind and e.coord == coord and (split is None or e.split == split):
                return e
        return None

    def zooms(self, kind=None, split=None) -> list[int]:
        return sorted({e.zoom for e in self.select(kind=kind, split=split)})

    def canonical_bytes(self) -> bytes:
        lines = []
        for e in self.entries:
            c = e.coord
            lines.append(
                "\t".join(
                    (e.city, e.kind, str(c.zoom), str(c.x), str(c.y), e.split, e.checksum, e.path)
                )
            )
        return ("\n".join(lines) + "\n" if lines else "").encode()

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()

    def write(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(self.canonical_bytes())

    @classmethod
    def read(cls, path: str | Path) -> "Manifest":
        entries = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != len(_MANIFEST_FIELDS):
                raise ValueError(f"{path}:{lineno}: expected {len(_MANIFEST_FIELDS)} fields")
            city, kind, z, x, y, split, checksum, relpath = parts
            entries.append(
                ManifestEntry(
                    city=city,
                    kind=kind,
                    coord=TileCoord(int(z), int(x), int(y)),
                    split=split,
                    checksum=checksum,
                    path=relpath,
                )
            )
        return cls(entries=tuple(entries))


def _entry_key(e: ManifestEntry):
    return (e.city, e.kind, e.coord.zoom, e.coord.x, e.coord.y)


def split_for_city(city: str, test_cities=DEFAULT_TEST_CITIES) -> str:
    return "test" if city in set(test_cities) else "train"


class TileLoader:
    """Reads manifest entries' pixels from a corpus root. Strategy runs and
    evaluation go through one of these, so tests can wrap it to observe
    exactly which tiles a pipeline touches."""

    def __init__(self, root: str | Path, tile_size: int | None = None, verify=False):
        self.root = Path(root)
        self.tile_size = tile_size
        self.verify = verify

    def __call__(self, entry: ManifestEntry) -> np.ndarray:
        path = self.root / entry.path
        if self.verify and sha256_file(path) != entry.checksum:
            raise IntegrityError(f"checksum mismatch for {path}")
        return read_tile(path, self.tile_size)


# -- ingest ------------------------------------------------------------------


def ingest(root: str | Path, test_cities=DEFAULT_TEST_CITIES) -> Manifest:
    """Scan a corpus tree into a manifest.

    Files that do not fit the layout or do not decode are skipped with a
    warning recorded on the returned manifest. An empty tree is an empty
    manifest, not an error.
    """
    root = Path(root)
    entries = []
    warnings = []
    if not root.exists():
        return Manifest(entries=(), warnings=(f"corpus root {root} does not exist",))
    for png in sorted(root.rglob("*.png")):
        rel = png.relative_to(root)
        parts = rel.parts
        if len(parts) != 5:
            warnings.append(f"skipping {rel}: not in city/kind/zoom/x/y.png layout")
            continue
        city, kind, z, x, ystem = parts[0], parts[1], parts[2], parts[3], Path(parts[4]).stem
        if kind not in KINDS:
            warnings.append(f"skipping {rel}: unknown kind {kind!r}")
            continue
        try:
            coord = TileCoord(int(z), int(x), int(ystem))
        except ValueError as exc:
            warnings.append(f"skipping {rel}: {exc}")
            continue
        try:
            decode_png(png.read_bytes())
        except Exception as exc:
            warnings.append(f"skipping {rel}: undecodable image ({exc})")
            continue
        entries.append(
            ManifestEntry(
                city=city,
                kind=kind,
                coord=coord,
                split=split_for_city(city, test_cities),
                checksum=sha256_file(png),
                path=str(rel),
            )
        )
    return Manifest(entries=tuple(entries), warnings=tuple(warnings))


# -- fetching ----------------------------------------------------------------


@dataclass(frozen=True)
class TileSource:
    """A slippy-map tile endpoint with politeness limits."""

    url_template: str
    rate: float = 4.0  # max requests per second
    retries: int = 2
    user_agent: str = "rs2map/0.1"

    def __post_init__(self):
        for ph in ("{z}", "{x}", "{y}"):
            if ph not in self.url_template:
                raise ValueError(f"url_template must contain {ph}: {self.url_template!r}")
        if self.rate <= 0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        if self.retries < 0:
            raise ValueError(f"retries must be >= 0, got {self.retries}")

    def url(self, coord: TileCoord) -> str:
        return self.url_template.format(z=coord.zoom, x=coord.x, y=coord.y)

    @classmethod
    def from_config(cls, cfg: dict) -> "TileSource":
        return cls(
            url_template=cfg["url_template"],
            rate=float(cfg.get("rate", 4.0)),
            retries=int(cfg.get("retries", 2)),
            user_agent=cfg.get("user_agent", "rs2map/0.1"),
        )


@dataclass(frozen=True)
class TileRect:
    """Inclusive rectangle of tile coords at one zoom."""

    zoom: int
    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise ValueError(f"empty rectangle: {self}")
        TileCoord(self.zoom, self.x0, self.y0)
        TileCoord(self.zoom, self.x1, self.y1)

    def at_zoom(self, zoom: int) -> "TileRect":
        """The rectangle of tiles at ``zoom`` covering this one."""
        if zoom == self.zoom:
            return self
        if zoom < self.zoom:
            shift = self.zoom - zoom
            return TileRect(zoom, self.x0 >> shift, self.y0 >> shift, self.x1 >> shift, self.y1 >> shift)
        shift = zoom - self.zoom
        return TileRect(
            zoom,
            self.x0 << shift,
            self.y0 << shift,
            ((self.x1 + 1) << shift) - 1,
            ((self.y1 + 1) << shift) - 1,
        )

    def coords(self):
        for y in range(self.y0, self.y1 + 1):
            for x in range(self.x0, self.x1 + 1):
                yield TileCoord(self.zoom, x, y)


def _default_http_get(src: TileSource):
    import requests

    session = requests.Session()
    session.headers["User-Agent"] = src.user_agent

    def get(url: str) -> bytes:
        resp = session.get(url, timeout=30)
        resp.raise_for_status()
        return resp.content

    return get


class _Throttle:
    def __init__(self, rate: float):
        self.interval = 1.0 / rate
        self._next = 0.0

    def wait(self):
        now = time.monotonic()
        if now < self._next:
            time.sleep(self._next - now)
            now = time.monotonic()
        self._next = now + self.interval


def fetch_tiles(
    src: TileSource,
    region: TileRect,
    zooms,
    root: str | Path,
    city: str,
    kind: str,
    http_get=None,
    manifest: Manifest | None = None,
    test_cities=DEFAULT_TEST_CITIES,
) -> list[ManifestEntry]:
    """Download every tile covering ``region`` at each requested zoom.

    Existing files are kept: if a prior manifest records the tile, its
    checksum must still match (otherwise :class:`IntegrityError`), and no
    request is issued. Downloads are throttled to ``src.rate`` requests per
    second and retried up to ``src.retries`` times; coords that still fail
    are collected into one :class:`FetchError`.

    ``http_get`` takes a URL and returns image bytes; it defaults to a
    requests session and exists so tests can inject a fake server.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    root = Path(root)
    get = http_get or _default_http_get(src)
    throttle = _Throttle(src.rate)
    split = split_for_city(city, test_cities)
    prior = {}
    if manifest is not None:
        prior = {(e.kind, e.coord): e for e in manifest.select(city=city)}

    entries = []
    failed = []
    for zoom in sorted(zooms, reverse=True):
        for coord in region.at_zoom(zoom).coords():
            relpath = tile_relpath(city, kind, coord)
            path = root / relpath
            if path.exists():
                checksum = sha256_file(path)
                known = prior.get((kind, coord))
                if known is not None and known.checksum != checksum:
                    raise IntegrityError(
                        f"existing file {relpath} has checksum {checksum[:12]}..., "
                        f"manifest says {known.checksum[:12]}..."
                    )
                entries.append(
                    ManifestEntry(city=city, kind=kind, coord=coord, split=split, checksum=checksum, path=relpath)
                )
                continue
            data = None
            for _ in range(src.retries + 1):
                throttle.wait()
                try:
                    data = get(src.url(coord))
                    break
                except Exception:
                    data = None
            if data is None:
                failed.append(coord)
                continue
            try:
                tile = decode_png(data)
            except Exception:
                failed.append(coord)
                continue
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(encode_png(tile))
            entries.append(
                ManifestEntry(
                    city=city, kind=kind, coord=coord, split=split, checksum=sha256_file(path), path=relpath
                )
            )
    if failed:
        raise FetchError(
            "failed to fetch " + ", ".join(str(c) for c in failed),
            failed=failed,
        )
    return sorted(entries, key=_entry_key)


# -- pairs -------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratedRef:
    """Reference to a tile produced by this toolkit rather than the corpus."""

    coord: TileCoord
    path: str | None = None
    image: np.ndarray | None = field(default=None, compare=False)


@dataclass(frozen=True)
class PairSample:
    kind: str  # "RM" or "MM"
    input_ref: ManifestEntry | GeneratedRef
    target_ref: ManifestEntry
    input_zoom: int
    target_zoom: int

    def __post_init__(self):
        if self.kind == "RM":
            if self.input_zoom != self.target_zoom:
                raise ValueError("RM pair must keep the zoom")
            if isinstance(self.input_ref, ManifestEntry) and self.input_ref.kind != "rsi":
                raise ValueError("RM input must be an rsi tile")
        elif self.kind == "MM":
            if self.input_zoom != self.target_zoom + 1:
                raise ValueError("MM pair must step down exactly one zoom")
        else:
            raise ValueError(f"pair kind must be RM or MM, got {self.kind!r}")
        if self.target_ref.kind != "map":
            raise ValueError("pair target must be a map tile")


def build_rm_pairs(manifest: Manifest, zoom: int, split=None):
    """One RM pair per coord with both an rsi and a map tile at ``zoom``.

    Returns ``(pairs, unpaired)`` where ``unpaired`` lists entries lacking a
    counterpart.
    """
    rsi = {e.coord: e for e in manifest.select(kind="rsi", zoom=zoom, split=split)}
    maps = {e.coord: e for e in manifest.select(kind="map", zoom=zoom, split=split)}
    pairs = []
    for coord in sorted(set(rsi) & set(maps)):
        pairs.append(
            PairSample(kind="RM", input_ref=rsi[coord], target_ref=maps[coord], input_zoom=zoom, target_zoom=zoom)
        )
    unpaired = [rsi[c] for c in sorted(set(rsi) - set(maps))]
    unpaired += [maps[c] for c in sorted(set(maps) - set(rsi))]
    return pairs, unpaired


def build_mm_pairs(
    generated: dict[TileCoord, np.ndarray],
    manifest: Manifest,
    target_zoom: int | None = None,
    out_dir: str | Path | None = None,
    split=None,
):
    """MM pairs from generated maps at zoom n and real maps at zoom n-1.

    For each parent coord whose four children are all present in
    ``generated`` and which has a real map tile, the pair input is the
    merge-downsampled quad. Merged inputs are written under ``out_dir``
    when given, so training sets are inspectable files rather than
    recomputed arrays. Returns ``(pairs, incomplete)`` where ``incomplete``
    lists parent coords whose quad was only partially generated.
    """
    if not generated:
        return [], []
    zooms = {c.zoom for c in generated}
    if len(zooms) != 1:
        raise ValueError(f"generated tiles span multiple zooms: {sorted(zooms)}")
    n = zooms.pop()
    if target_zoom is None:
        target_zoom = n - 1
    if target_zoom != n - 1:
        raise ValueError(f"target_zoom must be {n - 1} for generated tiles at zoom {n}")

    quads = complete_quads(generated)
    incomplete = sorted({c for c in {_parent_of(c) for c in generated} if c not in quads})
    real = {e.coord: e for e in manifest.select(kind="map", zoom=target_zoom, split=split)}
    pairs = []
    for parent_coord in sorted(quads):
        target = real.get(parent_coord)
        if target is None:
            continue
        merged = merge_downsample([generated[q] for q in quads[parent_coord]])
        path = None
        if out_dir is not None:
            path = str(Path(out_dir) / f"{parent_coord.zoom}/{parent_coord.x}/{parent_coord.y}.png")
            write_tile(path, merged)
        pairs.append(
            PairSample(
                kind="MM",
                input_ref=GeneratedRef(coord=parent_coord, path=path, image=merged),
                target_ref=target,
                input_zoom=n,
                target_zoom=target_zoom,
            )
        )
    return pairs, incomplete


def _parent_of(c: TileCoord) -> TileCoord:
    return TileCoord(c.zoom - 1, c.x // 2, c.y // 2)


# -- stats -------------------------------------------------------------------


def corpus_stats(manifest: Manifest) -> dict:
    """Per-zoom, per-split, per-kind counts plus RM-capable coord counts."""
    stats: dict[int, dict] = {}
    for zoom in manifest.zooms():
        row = {}
        for split in SPLITS:
            rsi = {e.coord for e in manifest.select(kind="rsi", zoom=zoom, split=split)}
            maps = {e.coord for e in manifest.select(kind="map", zoom=zoom, split=split)}
            row[split] = {"rsi": len(rsi), "map": len(maps), "rm": len(rsi & maps)}
        stats[zoom] = row
    return stats


def render_stats(stats: dict) -> str:
    """Fixed-width text table of corpus capacity by zoom and split."""
    header = f"{'ZOOM':>4}  {'SPLIT':<6} {'RSI':>7} {'MAP':>7} {'RM-PAIRS':>9}"
    lines = [header, "-" * len(header)]
    for zoom in sorted(stats, reverse=True):
        for split in SPLITS:
            c = stats[zoom][split]
            lines.append(f"{zoom:>4}  {split:<6} {c['rsi']:>7} {c['map']:>7} {c['rm']:>9}")
    return "\n".join(lines)
