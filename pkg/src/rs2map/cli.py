"""Command-line surface: fetch, ingest, pairs, translate, evaluate, emd, report.

One declarative JSON config drives every command. Paths inside the config
resolve relative to the config file so invocations work from any
directory. Exit codes are part of the contract: 0 success, 1 runtime
failure, 2 configuration error; diagnostics go to stderr, itemized one per
line where an error carries details (missing edges, failed coords,
coverage gaps).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .corpus import (
    DEFAULT_TEST_CITIES,
    Manifest,
    TileLoader,
    TileRect,
    TileSource,
    build_mm_pairs,
    build_rm_pairs,
    corpus_stats,
    fetch_tiles,
    ingest,
    render_stats,
)
from .distributions import emd_strategy_table
from .errors import (
    BackendError,
    ConfigError,
    CoverageError,
    FetchError,
    IntegrityError,
    MosaicError,
)
from .evaluation import build_report, evaluate_run_dir
from .generators import Palette, load_registry
from .reporting import METRIC_NAMES, Report, emd_table_to_csv, trend_svg
from .strategies import (
    StrategyConfig,
    load_atlas_tiles,
    run_strategy,
    save_atlas,
)
from .tiles import DEFAULT_TILE_SIZE

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

CONFIG_SECTIONS = ("corpus", "source", "registry", "strategy", "metrics", "output")


class RunConfig:
    """A loaded config file plus the flag overrides that apply to it."""

    def __init__(self, doc: dict, base: Path, workers: int | None = None, seed: int | None = None):
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        unknown = set(doc) - set(CONFIG_SECTIONS) - {"workers", "seed"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        self.doc = doc
        self.base = base
        self.workers = workers if workers is not None else int(doc.get("workers", 1))
        self.seed = seed if seed is not None else int(doc.get("seed", 0))
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    @classmethod
    def load(cls, path: str | None, workers=None, seed=None) -> "RunConfig":
        if not path:
            raise ConfigError("this command needs --config")
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {p} is not valid JSON: {e}") from e
        return cls(doc, p.resolve().parent, workers=workers, seed=seed)

    def _section(self, name: str, required=True) -> dict:
        sect = self.doc.get(name)
        if sect is None:
            if required:
                raise ConfigError(f"config is missing the {name!r} section")
            return {}
        if not isinstance(sect, dict):
            raise ConfigError(f"config section {name!r} must be an object")
        return sect

    def _path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    # corpus ---------------------------------------------------------------

    @property
    def corpus_root(self) -> Path:
        sect = self._section("corpus")
        if "root" not in sect:
            raise ConfigError("corpus section needs a 'root' path")
        root = self._path(sect["root"])
        if not root.is_dir():
            raise ConfigError(f"corpus root does not exist: {root}")
        return root

    @property
    def tile_size(self) -> int:
        return int(self._section("corpus").get("tile_size", DEFAULT_TILE_SIZE))

    @property
    def test_cities(self):
        return tuple(self._section("corpus").get("test_cities", DEFAULT_TEST_CITIES))

    @property
    def split(self) -> str:
        return self._section("corpus").get("split", "test")

    @property
    def manifest_path(self) -> Path:
        sect = self._section("corpus")
        return self._path(sect.get("manifest", str(Path(sect["root"]) / "manifest.tsv")))

    def manifest(self) -> Manifest:
        path = self.manifest_path
        if not path.is_file():
            raise ConfigError(f"manifest not found at {path}; run the ingest command first")
        return Manifest.read(path)

    def loader(self) -> TileLoader:
        return TileLoader(self.corpus_root, tile_size=self.tile_size)

    # other sections -------------------------------------------------------

    def source(self) -> TileSource:
        sect = self._section("source")
        try:
            return TileSource.from_config(sect)
        except (KeyError, ValueError) as e:
            raise ConfigError(f"bad source section: {e}") from e

    def strategy(self, kind: str | None = None, zooms: str | None = None) -> StrategyConfig:
        sect = dict(self._section("strategy"))
        if kind:
            sect["kind"] = kind
        if zooms:
            top, bottom = parse_zoom_range(zooms)
            sect["top_zoom"], sect["bottom_zoom"] = top, bottom
        return StrategyConfig.from_config(sect)

    @property
    def registry_config(self) -> dict:
        return self._section("registry")

    def registry(self, require=None):
        return load_registry(self.registry_config, tile_size=self.tile_size, require=require)

    def metric_selection(self) -> list[str]:
        sect = self._section("metrics", required=False)
        selection = sect.get("selection", list(METRIC_NAMES))
        bad = [m for m in selection if m not in METRIC_NAMES]
        if bad:
            raise ConfigError(f"unknown metrics in selection: {bad} (known: {list(METRIC_NAMES)})")
        return list(selection)

    def metric_palette(self) -> Palette:
        sect = self._section("metrics", required=False)
        ref = sect.get("palette")
        if isinstance(ref, str):
            named = self._section("registry", required=False).get("palettes", {})
            if ref not in named:
                raise ConfigError(f"metrics palette {ref!r} not found under registry palettes")
            return Palette.from_config(named[ref])
        if isinstance(ref, (list, tuple)):
            return Palette.from_config(ref)
        raise ConfigError("metrics section needs a 'palette' (name or inline class list)")

    @property
    def output_dir(self) -> Path:
        return self._path(self._section("output", required=False).get("dir", "out"))


def parse_zoom_range(text: str) -> tuple[int, int]:
    """'17-13' (either order) -> (top, bottom)."""
    parts = text.split("-")
    if len(parts) != 2:
        raise ConfigError(f"bad zoom range {text!r}, want 'TOP-BOTTOM' like '17-13'")
    try:
        a, b = int(parts[0]), int(parts[1])
    except ValueError as e:
        raise ConfigError(f"bad zoom range {text!r}: {e}") from e
    return max(a, b), min(a, b)


def run_name(kind: str, cfg: RunConfig, strat: StrategyConfig, manifest: Manifest) -> str:
    """Deterministic run-directory name from everything that shapes output."""
    blob = json.dumps(
        {
            "strategy": {"kind": kind, "top": strat.top_zoom, "bottom": strat.bottom_zoom},
            "registry": cfg.registry_config,
            "manifest": manifest.sha256(),
            "split": cfg.split,
            "tile_size": cfg.tile_size,
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode()
    return f"{kind}-{hashlib.sha256(blob).hexdigest()[:12]}"


# -- commands ----------------------------------------------------------------


def cmd_fetch(args) -> int:
    cfg = RunConfig.load(args.config)
    src = cfg.source()
    try:
        z, x0, y0, x1, y1 = (int(v) for v in args.rect.split("/"))
        region = TileRect(z, x0, y0, x1, y1)
    except ValueError as e:
        raise ConfigError(f"bad --rect {args.rect!r}, want 'Z/X0/Y0/X1/Y1': {e}") from e
    top, bottom = parse_zoom_range(args.zooms)
    root = cfg.corpus_root
    prior = Manifest.read(cfg.manifest_path) if cfg.manifest_path.is_file() else None
    entries = fetch_tiles(
        src,
        region,
        range(bottom, top + 1),
        root,
        args.city,
        args.kind,
        manifest=prior,
        test_cities=cfg.test_cities,
    )
    manifest = ingest(root, test_cities=cfg.test_cities)
    manifest.write(cfg.manifest_path)
    print(f"fetched {len(entries)} tiles; manifest now lists {len(manifest)}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    cfg = RunConfig.load(args.config)
    manifest = ingest(cfg.corpus_root, test_cities=cfg.test_cities)
    for w in manifest.warnings:
        print(f"warning: {w}", file=sys.stderr)
    manifest.write(cfg.manifest_path)
    print(render_stats(corpus_stats(manifest)))
    print(f"manifest: {cfg.manifest_path} ({len(manifest)} tiles, sha256 {manifest.sha256()[:12]})")
    return EXIT_OK


def cmd_pairs(args) -> int:
    cfg = RunConfig.load(args.config)
    manifest = cfg.manifest()
    split = args.split or cfg.split
    if args.pair_kind == "rm":
        pairs, unpaired = build_rm_pairs(manifest, args.zoom, split=split)
        for p in pairs:
            print(f"{cfg.corpus_root / p.input_ref.path}\t{cfg.corpus_root / p.target_ref.path}")
        if unpaired:
            print(f"warning: {len(unpaired)} tiles at zoom {args.zoom} lack a counterpart", file=sys.stderr)
        return EXIT_OK
    if not args.run:
        raise ConfigError("mm pairs need --run pointing at a translate run directory")
    levels = load_atlas_tiles(args.run, tile_size=cfg.tile_size)
    child_zoom = args.zoom + 1
    if child_zoom not in levels:
        raise CoverageError(
            f"run {args.run} has no generated tiles at zoom {child_zoom}",
            gaps={child_zoom: "no generated tiles in run"},
        )
    out_dir = cfg.output_dir / "mm-pairs" / str(args.zoom)
    pairs, incomplete = build_mm_pairs(
        levels[child_zoom], manifest, target_zoom=args.zoom, out_dir=out_dir, split=split
    )
    for p in pairs:
        print(f"{p.input_ref.path}\t{cfg.corpus_root / p.target_ref.path}")
    if incomplete:
        print(f"warning: {len(incomplete)} incomplete quad(s) at zoom {child_zoom}", file=sys.stderr)
    return EXIT_OK


def cmd_translate(args) -> int:
    cfg = RunConfig.load(args.config, workers=args.workers, seed=args.seed)
    strat = cfg.strategy(kind=args.strategy, zooms=args.zooms)
    registry = cfg.registry(require=(strat.kind, strat.top_zoom, strat.bottom_zoom))
    manifest = cfg.manifest()
    try:
        atlas = run_strategy(
            manifest,
            registry,
            strat,
            cfg.loader(),
            workers=cfg.workers,
            split=cfg.split,
            seed=cfg.seed,
        )
    finally:
        registry.close()
    run_dir = cfg.output_dir / run_name(strat.kind, cfg, strat, manifest)
    save_atlas(atlas, run_dir)
    for w in atlas.warnings:
        print(f"warning: {w}", file=sys.stderr)
    sizes = ", ".join(f"{z}:{n}" for z, n in sorted(atlas.level_sizes().items(), reverse=True))
    print(f"run: {run_dir}", file=sys.stderr)
    print(f"levels: {sizes}", file=sys.stderr)
    print(run_dir)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = RunConfig.load(args.config, seed=args.seed)
    selection = cfg.metric_selection()
    manifest = cfg.manifest()
    out_dir = Path(args.out) if args.out else cfg.output_dir / "report"
    out_dir.mkdir(parents=True, exist_ok=True)
    provenance = {
        "manifest_hash": manifest.sha256(),
        "series_run": str(args.series_run),
        "parallel_run": str(args.parallel_run),
        "seed": cfg.seed,
        "selection": selection,
    }
    if not selection:
        report = Report(provenance=provenance)
        (out_dir / "report.json").write_text(report.to_json())
        print(out_dir)
        return EXIT_OK

    strat = cfg.strategy(zooms=args.zooms)
    palette = cfg.metric_palette()
    loader = cfg.loader()
    series_rows = evaluate_run_dir(
        args.series_run, manifest, loader, palette, strategy="series", zooms=strat.zooms, split=cfg.split
    )
    parallel_rows = evaluate_run_dir(
        args.parallel_run, manifest, loader, palette, strategy="parallel", zooms=strat.zooms, split=cfg.split
    )
    emd_table = _corpus_emd_table(cfg, manifest, loader, strat)
    report = build_report(series_rows, parallel_rows, emd_table=emd_table, provenance=provenance)

    (out_dir / "report.json").write_text(report.to_json())
    (out_dir / "rows.csv").write_text(report.rows_to_csv())
    (out_dir / "emd.csv").write_text(emd_table_to_csv(emd_table))
    if len(report.zooms()) >= 2:
        (out_dir / "trends.svg").write_text(trend_svg(report))
    else:
        print("note: fewer than two zooms, skipping trend chart", file=sys.stderr)
    for metric, pct in sorted(report.improvements.items()):
        print(f"average increase {metric}: {pct:+.2f}%", file=sys.stderr)
    print(out_dir)
    return EXIT_OK


def _corpus_emd_table(cfg: RunConfig, manifest: Manifest, loader: TileLoader, strat: StrategyConfig):
    rsi_tiles = {}
    map_tiles = {}
    missing = []
    for z in strat.zooms:
        rsi = [loader(e) for e in manifest.select(kind="rsi", zoom=z, split=cfg.split)]
        maps = [loader(e) for e in manifest.select(kind="map", zoom=z, split=cfg.split)]
        if not rsi or not maps:
            missing.append(z)
        rsi_tiles[z], map_tiles[z] = rsi, maps
    if missing:
        raise CoverageError(
            f"corpus lacks rsi or map tiles at zooms {missing} in split {cfg.split!r}",
            gaps={z: "no rsi or map tiles" for z in missing},
        )
    return emd_strategy_table(rsi_tiles, map_tiles, strat.top_zoom)


def cmd_emd(args) -> int:
    cfg = RunConfig.load(args.config)
    strat = cfg.strategy(zooms=args.zooms)
    table = _corpus_emd_table(cfg, cfg.manifest(), cfg.loader(), strat)
    if args.format == "structured":
        text = json.dumps(
            {k: {str(z): v for z, v in sorted(t.items())} for k, t in sorted(table.items())},
            indent=2,
            sort_keys=True,
        ) + "\n"
    elif args.format == "csv":
        text = emd_table_to_csv(table)
    else:
        raise ConfigError(f"emd output supports csv or structured, not {args.format!r}")
    _emit(text, args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.input)
    if not path.is_file():
        raise ConfigError(f"report file not found: {path}")
    report = Report.from_json(path.read_text())
    if args.format == "structured":
        text = report.to_json()
    elif args.format == "csv":
        text = report.rows_to_csv()
    elif args.format == "svg":
        text = trend_svg(report)
    else:
        raise ConfigError(f"unknown format {args.format!r}")
    _emit(text, args.out)
    return EXIT_OK


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rs2map",
        description="Multi-scale map generation pipelines and their evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="JSON run config")

    p = sub.add_parser("fetch", help="download tiles for a region into the corpus")
    common(p)
    p.add_argument("--city", required=True)
    p.add_argument("--kind", required=True, choices=["rsi", "map"])
    p.add_argument("--rect", required=True, help="tile rectangle as Z/X0/Y0/X1/Y1")
    p.add_argument("--zooms", required=True, help="zoom range TOP-BOTTOM")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("ingest", help="scan the corpus tree and write the manifest")
    common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("pairs", help="list training pairs at a zoom")
    common(p)
    p.add_argument("--zoom", type=int, required=True, help="pair zoom (target zoom for mm)")
    p.add_argument("--pair-kind", choices=["rm", "mm"], default="rm")
    p.add_argument("--split", choices=["train", "test"])
    p.add_argument("--run", help="translate run directory (mm pairs only)")
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("translate", help="run a generation strategy over the corpus")
    common(p)
    p.add_argument("--strategy", choices=["series", "parallel"])
    p.add_argument("--zooms", help="zoom range TOP-BOTTOM")
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("evaluate", help="score two runs against real maps and write a report")
    common(p)
    p.add_argument("--series-run", required=True)
    p.add_argument("--parallel-run", required=True)
    p.add_argument("--zooms", help="zoom range TOP-BOTTOM")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="report directory (default <output.dir>/report)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("emd", help="per-zoom distribution distances for both strategies")
    common(p)
    p.add_argument("--zooms", help="zoom range TOP-BOTTOM")
    p.add_argument("--format", choices=["csv", "structured"], default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_emd)

    p = sub.add_parser("report", help="re-emit a saved report as csv, structured text, or svg")
    p.add_argument("--in", dest="input", required=True, help="report.json from evaluate")
    p.add_argument("--format", choices=["csv", "structured", "svg"], default="structured")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        for edge in getattr(e, "missing_edges", ()):
            print(f"  missing edge: {edge}", file=sys.stderr)
        return EXIT_CONFIG
    except CoverageError as e:
        print(f"error: {e}", file=sys.stderr)
        for zoom, why in sorted(e.gaps.items()):
            print(f"  zoom {zoom}: {why}", file=sys.stderr)
        return EXIT_RUNTIME
    except FetchError as e:
        print(f"error: {e}", file=sys.stderr)
        for coord in e.failed:
            print(f"  failed: {coord}", file=sys.stderr)
        return EXIT_RUNTIME
    except (BackendError, IntegrityError, MosaicError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
