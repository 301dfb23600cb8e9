"""Manifests, ingest, fetching with a fake server, and pair construction."""

import numpy as np
import pytest

from rs2map.corpus import (
    GeneratedRef,
    Manifest,
    ManifestEntry,
    PairSample,
    TileLoader,
    TileRect,
    TileSource,
    build_mm_pairs,
    build_rm_pairs,
    corpus_stats,
    fetch_tiles,
    ingest,
    render_stats,
    split_for_city,
    tile_relpath,
)
from rs2map.errors import FetchError, IntegrityError, ShapeError
from rs2map.tile_io import encode_png, read_tile, write_tile
from rs2map.tiles import TileCoord, children, merge_downsample

from oracles import ref_merge_box


def _tile(rng, size=8):
    return rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)


def _seed_corpus(root, rng, city="ayutthaya", kinds=("rsi", "map"), zoom=14, n=2, size=8):
    """n by n block of tiles for each kind; returns coord -> kind -> array."""
    grid = {}
    for y in range(n):
        for x in range(n):
            coord = TileCoord(zoom, x, y)
            grid[coord] = {}
            for kind in kinds:
                t = _tile(rng, size)
                write_tile(root / tile_relpath(city, kind, coord), t)
                grid[coord][kind] = t
    return grid


# -- manifest ----------------------------------------------------------------


def test_entry_rejects_bad_kind_split_path():
    coord = TileCoord(14, 1, 2)
    good = dict(city="pune", kind="rsi", coord=coord, split="train",
                checksum="0" * 64, path=tile_relpath("pune", "rsi", coord))
    ManifestEntry(**good)
    with pytest.raises(ValueError, match="kind"):
        ManifestEntry(**{**good, "kind": "dem"})
    with pytest.raises(ValueError, match="split"):
        ManifestEntry(**{**good, "split": "validation"})
    with pytest.raises(ValueError, match="layout"):
        ManifestEntry(**{**good, "path": "pune/rsi/14/2/1.png"})


def test_manifest_sorts_entries_and_canonical_bytes():
    def entry(city, kind, z, x, y):
        c = TileCoord(z, x, y)
        return ManifestEntry(city=city, kind=kind, coord=c, split="train",
                             checksum="a" * 64, path=tile_relpath(city, kind, c))

    scrambled = (
        entry("b", "rsi", 14, 1, 0),
        entry("a", "map", 15, 0, 0),
        entry("a", "map", 14, 2, 2),
        entry("b", "rsi", 14, 0, 1),
        entry("a", "rsi", 14, 0, 0),
    )
    m = Manifest(entries=scrambled)
    keys = [(e.city, e.kind, e.zoom, e.coord.x, e.coord.y) for e in m.entries]
    assert keys == sorted(keys)
    text = m.canonical_bytes().decode()
    assert text.endswith("\n")
    first = text.splitlines()[0].split("\t")
    assert first == ["a", "map", "14", "2", "2", "train", "a" * 64, "a/map/14/2/2.png"]
    assert Manifest(entries=()).canonical_bytes() == b""


def test_manifest_write_read_round_trip(tmp_path, rng):
    root = tmp_path / "corpus"
    _seed_corpus(root, rng)
    m = ingest(root)
    path = tmp_path / "manifest.tsv"
    m.write(path)
    again = Manifest.read(path)
    assert again.entries == m.entries
    assert again.sha256() == m.sha256()
    # the canonical form is a fixed point of serialization
    again.write(path)
    assert Manifest.read(path).canonical_bytes() == m.canonical_bytes()


def test_manifest_read_rejects_short_line(tmp_path):
    path = tmp_path / "manifest.tsv"
    path.write_text("a\trsi\t14\n")
    with pytest.raises(ValueError, match="fields"):
        Manifest.read(path)


def test_select_lookup_zooms(tmp_path, rng):
    root = tmp_path / "corpus"
    _seed_corpus(root, rng, city="ayutthaya", zoom=14)
    _seed_corpus(root, rng, city="mexico_city", zoom=13, n=1)
    m = ingest(root)
    assert len(m.select(kind="rsi", zoom=14)) == 4
    assert len(m.select(city="mexico_city")) == 2
    assert m.zooms() == [13, 14]
    assert m.zooms(split="test") == [13]
    hit = m.lookup("map", TileCoord(14, 1, 1))
    assert hit is not None and hit.city == "ayutthaya"
    assert m.lookup("map", TileCoord(14, 3, 3)) is None


def test_split_for_city_defaults():
    assert split_for_city("tokyo") == "test"
    assert split_for_city("mexico_city") == "test"
    assert split_for_city("ayutthaya") == "train"
    assert split_for_city("tokyo", test_cities=("pune",)) == "train"


# -- ingest ------------------------------------------------------------------


def test_ingest_skips_misfits_with_warnings(tmp_path, rng):
    root = tmp_path / "corpus"
    grid = _seed_corpus(root, rng)
    (root / "stray.png").write_bytes(encode_png(_tile(rng)))
    write_tile(root / "ayutthaya/dem/14/0/0.png", _tile(rng))
    bad = root / "ayutthaya/rsi/14/9/9.png"
    bad.parent.mkdir(parents=True, exist_ok=True)
    bad.write_bytes(b"not a png")
    m = ingest(root)
    assert len(m) == 2 * len(grid)
    assert len(m.warnings) == 3
    assert any("layout" in w for w in m.warnings)
    assert any("unknown kind" in w for w in m.warnings)
    assert any("undecodable" in w for w in m.warnings)


def test_ingest_missing_root_is_empty_with_warning(tmp_path):
    m = ingest(tmp_path / "nope")
    assert len(m) == 0 and len(m.warnings) == 1


def test_ingest_checksums_match_files(tmp_path, rng):
    root = tmp_path / "corpus"
    _seed_corpus(root, rng, n=1)
    m = ingest(root)
    import hashlib

    for e in m.entries:
        assert e.checksum == hashlib.sha256((root / e.path).read_bytes()).hexdigest()


def test_reingest_is_fixed_point(tmp_path, rng):
    root = tmp_path / "corpus"
    _seed_corpus(root, rng)
    first = ingest(root)
    second = ingest(root)
    assert first.entries == second.entries
    assert first.sha256() == second.sha256()


# -- loader ------------------------------------------------------------------


def test_loader_reads_and_verifies(tmp_path, rng):
    root = tmp_path / "corpus"
    grid = _seed_corpus(root, rng, n=1)
    m = ingest(root)
    entry = m.select(kind="rsi")[0]
    loader = TileLoader(root, tile_size=8, verify=True)
    np.testing.assert_array_equal(loader(entry), grid[entry.coord]["rsi"])
    # tampering after ingest must be caught when verify is on
    write_tile(root / entry.path, _tile(rng))
    with pytest.raises(IntegrityError, match="checksum"):
        loader(entry)
    relaxed = TileLoader(root, tile_size=8, verify=False)
    assert relaxed(entry).shape == (8, 8, 3)


def test_loader_enforces_tile_size(tmp_path, rng):
    root = tmp_path / "corpus"
    _seed_corpus(root, rng, n=1, size=8)
    m = ingest(root)
    strict = TileLoader(root, tile_size=16)
    with pytest.raises(ShapeError):
        strict(m.entries[0])


# -- source and rectangles ---------------------------------------------------


def test_tile_source_validation():
    src = TileSource(url_template="https://tiles.test/{z}/{x}/{y}.png")
    assert src.url(TileCoord(14, 3, 5)) == "https://tiles.test/14/3/5.png"
    with pytest.raises(ValueError, match="url_template"):
        TileSource(url_template="https://tiles.test/{z}/{x}.png")
    with pytest.raises(ValueError, match="rate"):
        TileSource(url_template="https://t/{z}/{x}/{y}", rate=0)
    with pytest.raises(ValueError, match="retries"):
        TileSource(url_template="https://t/{z}/{x}/{y}", retries=-1)
    cfg = TileSource.from_config({"url_template": "https://t/{z}/{x}/{y}", "rate": 9})
    assert cfg.rate == 9.0 and cfg.retries == 2


def test_tile_rect_zoom_projection():
    rect = TileRect(14, 2, 4, 3, 5)
    assert rect.at_zoom(14) is rect
    up = rect.at_zoom(15)
    assert (up.x0, up.y0, up.x1, up.y1) == (4, 8, 7, 11)
    down = rect.at_zoom(13)
    assert (down.x0, down.y0, down.x1, down.y1) == (1, 2, 1, 2)
    # projecting up then down recovers the rectangle
    assert up.at_zoom(14) == rect
    assert len(list(up.coords())) == 16
    with pytest.raises(ValueError, match="empty"):
        TileRect(14, 3, 0, 2, 0)


# -- fetch -------------------------------------------------------------------


def _fake_server(rng, size=8):
    """URL -> deterministic PNG bytes; counts requests per URL."""
    calls = {}
    images = {}

    def get(url):
        calls[url] = calls.get(url, 0) + 1
        if url not in images:
            images[url] = encode_png(_tile(rng, size))
        return images[url]

    return get, calls


def test_fetch_writes_layout_and_is_idempotent(tmp_path, rng):
    src = TileSource(url_template="https://t/{z}/{x}/{y}", rate=10000)
    get, calls = _fake_server(rng)
    rect = TileRect(14, 0, 0, 1, 1)
    entries = fetch_tiles(src, rect, [14, 13], tmp_path, "pune", "rsi", http_get=get)
    # 4 tiles at 14 plus the single covering tile at 13
    assert len(entries) == 5
    assert sum(calls.values()) == 5
    assert sorted(e.coord.zoom for e in entries) == [13, 14, 14, 14, 14]
    for e in entries:
        assert (tmp_path / e.path).exists()
        assert e.split == "train"
    again = fetch_tiles(src, rect, [14, 13], tmp_path, "pune", "rsi", http_get=get)
    assert sum(calls.values()) == 5  # nothing re-requested
    assert again == entries


def test_fetch_respects_prior_manifest_checksums(tmp_path, rng):
    src = TileSource(url_template="https://t/{z}/{x}/{y}", rate=10000)
    get, _ = _fake_server(rng)
    rect = TileRect(14, 0, 0, 0, 0)
    entries = fetch_tiles(src, rect, [14], tmp_path, "pune", "rsi", http_get=get)
    manifest = Manifest(entries=tuple(entries))
    fetch_tiles(src, rect, [14], tmp_path, "pune", "rsi", http_get=get, manifest=manifest)
    write_tile(tmp_path / entries[0].path, _tile(rng))
    with pytest.raises(IntegrityError, match="checksum"):
        fetch_tiles(src, rect, [14], tmp_path, "pune", "rsi", http_get=get, manifest=manifest)


def test_fetch_collects_failures_after_retries(tmp_path, rng):
    src = TileSource(url_template="https://t/{z}/{x}/{y}", rate=10000, retries=2)
    attempts = {}

    def get(url):
        attempts[url] = attempts.get(url, 0) + 1
        raise OSError("connection refused")

    rect = TileRect(14, 0, 0, 1, 0)
    with pytest.raises(FetchError) as e:
        fetch_tiles(src, rect, [14], tmp_path, "pune", "rsi", http_get=get)
    assert len(e.value.failed) == 2
    assert all(n == 3 for n in attempts.values())  # initial try plus 2 retries
    assert "(14, 1, 0)" in str(e.value) or "14/1/0" in str(e.value) or "x=1" in str(e.value)


def test_fetch_treats_undecodable_bytes_as_failure(tmp_path):
    src = TileSource(url_template="https://t/{z}/{x}/{y}", rate=10000, retries=0)
    rect = TileRect(14, 0, 0, 0, 0)
    with pytest.raises(FetchError):
        fetch_tiles(src, rect, [14], tmp_path, "pune", "rsi", http_get=lambda url: b"junk")
    assert not (tmp_path / "pune/rsi/14/0/0.png").exists()


def test_fetch_rejects_unknown_kind(tmp_path):
    src = TileSource(url_template="https://t/{z}/{x}/{y}")
    with pytest.raises(ValueError, match="kind"):
        fetch_tiles(src, TileRect(14, 0, 0, 0, 0), [14], tmp_path, "pune", "dem", http_get=lambda u: b"")


# -- pairs -------------------------------------------------------------------


def test_pair_sample_validation():
    coord = TileCoord(14, 0, 0)
    rsi = ManifestEntry(city="a", kind="rsi", coord=coord, split="train",
                        checksum="0" * 64, path=tile_relpath("a", "rsi", coord))
    mp = ManifestEntry(city="a", kind="map", coord=coord, split="train",
                       checksum="0" * 64, path=tile_relpath("a", "map", coord))
    PairSample(kind="RM", input_ref=rsi, target_ref=mp, input_zoom=14, target_zoom=14)
    with pytest.raises(ValueError, match="zoom"):
        PairSample(kind="RM", input_ref=rsi, target_ref=mp, input_zoom=15, target_zoom=14)
    with pytest.raises(ValueError, match="rsi"):
        PairSample(kind="RM", input_ref=mp, target_ref=mp, input_zoom=14, target_zoom=14)
    with pytest.raises(ValueError, match="one zoom"):
        PairSample(kind="MM", input_ref=GeneratedRef(coord=coord), target_ref=mp,
                   input_zoom=16, target_zoom=14)
    with pytest.raises(ValueError, match="target"):
        PairSample(kind="RM", input_ref=rsi, target_ref=rsi, input_zoom=14, target_zoom=14)
    with pytest.raises(ValueError, match="RM or MM"):
        PairSample(kind="XY", input_ref=rsi, target_ref=mp, input_zoom=14, target_zoom=14)


def test_rm_pairs_counts_and_unpaired(tmp_path, rng):
    root = tmp_path / "corpus"
    _seed_corpus(root, rng, n=2, zoom=14)
    write_tile(root / tile_relpath("ayutthaya", "rsi", TileCoord(14, 5, 5)), _tile(rng))
    write_tile(root / tile_relpath("ayutthaya", "map", TileCoord(14, 6, 6)), _tile(rng))
    m = ingest(root)
    pairs, unpaired = build_rm_pairs(m, 14)
    assert len(pairs) == 4
    assert [p.input_ref.kind for p in pairs] == ["rsi"] * 4
    assert sorted(e.coord for e in unpaired) == [TileCoord(14, 5, 5), TileCoord(14, 6, 6)]
    none_here, _ = build_rm_pairs(m, 13)
    assert none_here == []


def test_mm_pairs_merge_matches_oracle(tmp_path, rng):
    root = tmp_path / "corpus"
    parent = TileCoord(13, 1, 1)
    parent_tile = _tile(rng)
    write_tile(root / tile_relpath("ayutthaya", "map", parent), parent_tile)
    m = ingest(root)
    generated = {c: _tile(rng) for c in children(parent)}
    pairs, incomplete = build_mm_pairs(generated, m, out_dir=tmp_path / "mm")
    assert incomplete == []
    assert len(pairs) == 1
    pair = pairs[0]
    assert pair.kind == "MM" and pair.target_ref.coord == parent
    quad = [generated[c] for c in children(parent)]
    np.testing.assert_array_equal(pair.input_ref.image, merge_downsample(quad))
    np.testing.assert_array_equal(pair.input_ref.image, ref_merge_box(quad))
    # materialized input round-trips byte for byte
    np.testing.assert_array_equal(read_tile(pair.input_ref.path), pair.input_ref.image)


def test_mm_pairs_partial_quad_is_incomplete(tmp_path, rng):
    root = tmp_path / "corpus"
    parent = TileCoord(13, 0, 0)
    write_tile(root / tile_relpath("ayutthaya", "map", parent), _tile(rng))
    m = ingest(root)
    generated = {c: _tile(rng) for c in children(parent)[:3]}
    pairs, incomplete = build_mm_pairs(generated, m)
    assert pairs == []
    assert incomplete == [parent]


def test_mm_pairs_skip_parents_without_real_map(tmp_path, rng):
    root = tmp_path / "corpus"
    write_tile(root / tile_relpath("ayutthaya", "map", TileCoord(13, 0, 0)), _tile(rng))
    m = ingest(root)
    generated = {}
    for parent in (TileCoord(13, 0, 0), TileCoord(13, 1, 0)):
        generated.update({c: _tile(rng) for c in children(parent)})
    pairs, incomplete = build_mm_pairs(generated, m)
    assert len(pairs) == 1 and incomplete == []


def test_mm_pairs_dense_counting(tmp_path, rng):
    # 8x8 generated block at zoom 14 over a full 4x4 real block at 13:
    # every parent quad is complete, so exactly 16 pairs come out.
    root = tmp_path / "corpus"
    for y in range(4):
        for x in range(4):
            write_tile(root / tile_relpath("a", "map", TileCoord(13, x, y)), _tile(rng))
    m = ingest(root)
    generated = {TileCoord(14, x, y): _tile(rng) for x in range(8) for y in range(8)}
    pairs, incomplete = build_mm_pairs(generated, m)
    assert len(pairs) == 16 and incomplete == []


def test_mm_pairs_reject_mixed_or_wrong_zoom(rng):
    g14 = {TileCoord(14, 0, 0): _tile(rng)}
    g15 = {TileCoord(15, 0, 0): _tile(rng)}
    with pytest.raises(ValueError, match="multiple zooms"):
        build_mm_pairs({**g14, **g15}, Manifest(entries=()))
    with pytest.raises(ValueError, match="target_zoom"):
        build_mm_pairs(g14, Manifest(entries=()), target_zoom=12)
    assert build_mm_pairs({}, Manifest(entries=())) == ([], [])


# -- stats -------------------------------------------------------------------


def test_corpus_stats_recount(tmp_path, rng):
    root = tmp_path / "corpus"
    _seed_corpus(root, rng, city="ayutthaya", zoom=14, n=2)
    _seed_corpus(root, rng, city="tokyo", zoom=14, n=1)
    write_tile(root / tile_relpath("tokyo", "rsi", TileCoord(13, 0, 0)), _tile(rng))
    m = ingest(root)
    stats = corpus_stats(m)
    assert stats[14]["train"] == {"rsi": 4, "map": 4, "rm": 4}
    assert stats[14]["test"] == {"rsi": 1, "map": 1, "rm": 1}
    assert stats[13]["test"] == {"rsi": 1, "map": 0, "rm": 0}
    text = render_stats(stats)
    assert "RM-PAIRS" in text
    assert text.splitlines()[2].split()[0] == "14"  # highest zoom first
