"""Metric rows, improvement aggregation, report files, and SVG trend charts.

A report bundles everything one evaluation produced: per-zoom metric rows
for both strategies, the per-zoom EMD table, the series-over-parallel
average improvement per metric, and provenance hashes tying the numbers
back to their run directories. Reports serialize to a structured JSON
document (lossless) and the metric rows additionally to CSV with the fixed
column order zoom, strategy, ssim, essi, iou_road, iou_water.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

METRIC_NAMES = ("ssim", "essi", "iou_road", "iou_water")
CSV_COLUMNS = ("zoom", "strategy") + METRIC_NAMES
STRATEGIES = ("series", "parallel")


@dataclass(frozen=True)
class MetricRow:
    zoom: int
    strategy: str
    ssim: float | None = None
    essi: float | None = None
    iou_road: float | None = None
    iou_water: float | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        for name in ("ssim", "essi"):
            v = getattr(self, name)
            if v is not None and not -1.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [-1, 1], got {v}")
        for name in ("iou_road", "iou_water"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def get(self, metric: str) -> float | None:
        if metric not in METRIC_NAMES:
            raise ValueError(f"unknown metric {metric!r}")
        return getattr(self, metric)


def round_half_up(value: float, places: int = 2) -> float:
    """Decimal rounding, halves away from zero (not banker's)."""
    q = Decimal(1).scaleb(-places)
    return float(Decimal(value).quantize(q, rounding=ROUND_HALF_UP))


def aggregate_improvement(series_rows, parallel_rows, metric: str) -> float:
    """Average percent increase of series over parallel for one metric.

    Rows must cover the same zooms. The shared top zoom is excluded (both
    strategies start from the same top-level translation, so it carries no
    signal). The result is the mean over the remaining zooms of
    ``(series/parallel - 1) * 100``, rounded to two decimals. Zooms where
    the parallel value is zero or either value is undefined are excluded
    with a warning.
    """
    s = {r.zoom: r.get(metric) for r in series_rows}
    p = {r.zoom: r.get(metric) for r in parallel_rows}
    if set(s) != set(p):
        raise ValueError(f"zoom coverage differs: {sorted(s)} vs {sorted(p)}")
    if len(s) < 2:
        raise ValueError("need at least two zoom levels to aggregate an improvement")
    top = max(s)
    increases = []
    for zoom in sorted(z for z in s if z != top):
        sv, pv = s[zoom], p[zoom]
        if sv is None or pv is None:
            warnings.warn(f"zoom {zoom}: {metric} undefined, excluded from the average")
            continue
        if pv == 0:
            warnings.warn(f"zoom {zoom}: parallel {metric} is zero, excluded from the average")
            continue
        increases.append((sv / pv - 1.0) * 100.0)
    if not increases:
        raise ValueError(f"no zooms left to average for {metric}")
    return round_half_up(sum(increases) / len(increases), 2)


@dataclass
class Report:
    rows: list[MetricRow] = field(default_factory=list)
    emd_table: dict[str, dict[int, float]] = field(default_factory=dict)
    improvements: dict[str, float] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def rows_for(self, strategy: str) -> list[MetricRow]:
        return sorted((r for r in self.rows if r.strategy == strategy), key=lambda r: -r.zoom)

    def zooms(self) -> list[int]:
        return sorted({r.zoom for r in self.rows}, reverse=True)

    # -- structured (JSON) ---------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "rows": [
                {
                    "zoom": r.zoom,
                    "strategy": r.strategy,
                    **{m: r.get(m) for m in METRIC_NAMES},
                }
                for r in sorted(self.rows, key=lambda r: (-r.zoom, r.strategy))
            ],
            "emd_table": {
                strat: {str(z): v for z, v in sorted(table.items())}
                for strat, table in sorted(self.emd_table.items())
            },
            "improvements": dict(sorted(self.improvements.items())),
            "provenance": self.provenance,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Report":
        doc = json.loads(text)
        rows = [
            MetricRow(
                zoom=int(r["zoom"]),
                strategy=r["strategy"],
                **{m: r.get(m) for m in METRIC_NAMES},
            )
            for r in doc.get("rows", [])
        ]
        emd_table = {
            strat: {int(z): float(v) for z, v in table.items()}
            for strat, table in doc.get("emd_table", {}).items()
        }
        return cls(
            rows=rows,
            emd_table=emd_table,
            improvements=doc.get("improvements", {}),
            provenance=doc.get("provenance", {}),
        )

    # -- CSV (metric rows only) ----------------------------------------------

    def rows_to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in sorted(self.rows, key=lambda r: (-r.zoom, r.strategy)):
            writer.writerow(
                [r.zoom, r.strategy] + ["" if r.get(m) is None else repr(r.get(m)) for m in METRIC_NAMES]
            )
        return buf.getvalue()

    @staticmethod
    def rows_from_csv(text: str) -> list[MetricRow]:
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header: {header}")
        rows = []
        for rec in reader:
            if not rec:
                continue
            values = {m: (None if v == "" else float(v)) for m, v in zip(METRIC_NAMES, rec[2:])}
            rows.append(MetricRow(zoom=int(rec[0]), strategy=rec[1], **values))
        return rows


def emd_table_to_csv(emd_table: dict[str, dict[int, float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    zooms = sorted({z for table in emd_table.values() for z in table}, reverse=True)
    writer.writerow(["strategy"] + [str(z) for z in zooms])
    for strat in sorted(emd_table):
        writer.writerow([strat] + [repr(emd_table[strat][z]) for z in zooms])
    return buf.getvalue()


# -- SVG trend charts --------------------------------------------------------

_CHART_W, _CHART_H = 420, 260
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 56, 16, 28, 36
_COLORS = {"series": "#c0392b", "parallel": "#2865a8"}


def trend_svg(report: Report) -> str:
    """One deterministic SVG document with a line chart per metric.

    X runs over descending zoom levels; one polyline per strategy. Points
    with undefined values are simply omitted. Identical reports produce
    identical bytes.
    """
    zooms = report.zooms()
    if len(zooms) < 2:
        raise ValueError(f"need at least two zoom levels to plot a trend, got {zooms}")
    cols = 2
    rows_n = (len(METRIC_NAMES) + cols - 1) // cols
    width = cols * _CHART_W
    height = rows_n * _CHART_H
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for i, metric in enumerate(METRIC_NAMES):
        ox = (i % cols) * _CHART_W
        oy = (i // cols) * _CHART_H
        parts.append(_chart(report, metric, zooms, ox, oy))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _chart(report: Report, metric: str, zooms: list[int], ox: int, oy: int) -> str:
    x0, y0 = ox + _MARGIN_L, oy + _MARGIN_T
    plot_w = _CHART_W - _MARGIN_L - _MARGIN_R
    plot_h = _CHART_H - _MARGIN_T - _MARGIN_B
    values = [
        r.get(metric)
        for strat in STRATEGIES
        for r in report.rows_for(strat)
        if r.get(metric) is not None
    ]
    vmin = min(values) if values else 0.0
    vmax = max(values) if values else 1.0
    if vmax - vmin < 1e-12:
        vmin, vmax = vmin - 0.5, vmax + 0.5
    pad = 0.05 * (vmax - vmin)
    vmin, vmax = vmin - pad, vmax + pad

    def xpos(zi: int) -> float:
        return x0 + plot_w * zi / (len(zooms) - 1)

    def ypos(v: float) -> float:
        return y0 + plot_h * (1.0 - (v - vmin) / (vmax - vmin))

    out = [
        f'<g class="chart" data-metric="{metric}">',
        f'<text x="{x0 + plot_w / 2:.2f}" y="{oy + 16}" text-anchor="middle" font-weight="bold">{metric}</text>',
        f'<line x1="{x0}" y1="{y0 + plot_h}" x2="{x0 + plot_w}" y2="{y0 + plot_h}" stroke="#444"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y0 + plot_h}" stroke="#444"/>',
        f'<text x="{x0 - 6}" y="{y0 + 4}" text-anchor="end">{vmax:.4f}</text>',
        f'<text x="{x0 - 6}" y="{y0 + plot_h + 4}" text-anchor="end">{vmin:.4f}</text>',
    ]
    for zi, zoom in enumerate(zooms):
        out.append(
            f'<text x="{xpos(zi):.2f}" y="{y0 + plot_h + 16}" text-anchor="middle">{zoom}</text>'
        )
    for strat in STRATEGIES:
        by_zoom = {r.zoom: r.get(metric) for r in report.rows_for(strat)}
        pts = [
            f"{xpos(zi):.2f},{ypos(by_zoom[zoom]):.2f}"
            for zi, zoom in enumerate(zooms)
            if by_zoom.get(zoom) is not None
        ]
        if pts:
            out.append(
                f'<polyline class="{strat}" data-metric="{metric}" points="{" ".join(pts)}" '
                f'fill="none" stroke="{_COLORS[strat]}" stroke-width="1.5"/>'
            )
    lx = x0 + plot_w - 70
    for k, strat in enumerate(STRATEGIES):
        ly = y0 + 8 + 14 * k
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{_COLORS[strat]}" stroke-width="1.5"/>')
        out.append(f'<text x="{lx + 22}" y="{ly + 4}">{strat}</text>')
    out.append("</g>")
    return "\n".join(out)
