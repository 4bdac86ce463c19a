"""Static report artifacts: metric CSVs, a JSON manifest and SVG line charts.

All output is byte-deterministic for identical inputs: numbers are printed
with fixed precision and nothing time-dependent is written.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from ..errors import InvalidSpec
from ..records import ExperimentRecord

FORMATS = ("csv", "json-manifest", "svg-lines")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#7f7f7f")

W, H, PAD = 480, 300, 48


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def svg_lines(series, title, xlabel, ylabel) -> str:
    """Line chart of ``series = [(label, xs, ys), ...]`` as an SVG string."""
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys) if math.isfinite(y)]
    if not pts:
        raise InvalidSpec("nothing to plot")
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def sx(x):
        return PAD + (x - x0) / (x1 - x0) * (W - 2 * PAD)

    def sy(y):
        return H - PAD - (y - y0) / (y1 - y0) * (H - 2 * PAD)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
           f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
           f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>']
    for t in _ticks(x0, x1):
        out.append(f'<text x="{sx(t):.2f}" y="{H - PAD + 14}" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{PAD - 4}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:.3g}</text>')
    out.append(f'<text x="{W / 2:.1f}" y="{H - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="14" y="{H / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {H / 2:.1f})">{ylabel}</text>')
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys) if math.isfinite(y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = PAD + 14 * i
        out.append(f'<text x="{W - PAD + 4}" y="{ly:.0f}" fill="{color}" font-size="10">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _label(rec, i):
    m = rec.manifest
    return str(m.get("label") or m.get("name", "run")) + f" #{i}"


def emit_report(records, out_dir, formats=FORMATS, summary_rows=None, x_column="value"):
    """Write report files for ``records`` into ``out_dir``; returns the paths.

    csv: one ``metrics_XX.csv`` per record. json-manifest: ``manifest.json``
    listing every record's manifest. svg-lines: accuracy and NAPL against
    epoch, plus accuracy and NAPL against the sweep variable if
    ``summary_rows`` are given.
    """
    records = list(records)
    if not records:
        raise InvalidSpec("no records to report")
    if any(not isinstance(r, ExperimentRecord) or not r.rows for r in records):
        raise InvalidSpec("every record needs at least one row")
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise InvalidSpec(f"unknown report formats {sorted(unknown)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        path = out / name
        path.write_text(text)
        written.append(path)

    if "csv" in formats:
        for i, rec in enumerate(records):
            put(f"metrics_{i:02d}.csv", rec.to_csv())
    if "json-manifest" in formats:
        doc = [{k: v for k, v in r.manifest.items() if k != "wall_time_s"} for r in records]
        put("manifest.json", json.dumps(doc, indent=1, sort_keys=True, default=str) + "\n")
    if "svg-lines" in formats:
        for col, title in (("test_acc", "Test accuracy"), ("napl", "NAPL")):
            series = [(_label(r, i), r.column("epoch"), r.column(col)) for i, r in enumerate(records)]
            put(f"{col}_vs_epoch.svg", svg_lines(series, title, "epoch", col))
        if summary_rows:
            ok = sorted((r for r in summary_rows if r["status"] == "ok"),
                        key=lambda r: float(r[x_column]))
            for col in ("final_test_acc", "final_napl"):
                by_seed = {}
                for r in ok:
                    by_seed.setdefault(r["seed"], ([], []))
                    by_seed[r["seed"]][0].append(float(r[x_column]))
                    by_seed[r["seed"]][1].append(float(r[col]))
                series = [(f"seed {s}", xs, ys) for s, (xs, ys) in sorted(by_seed.items())]
                if series:
                    put(f"{col}_vs_{x_column}.svg", svg_lines(series, col, x_column, col))
    return written
