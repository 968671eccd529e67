"""CSV and SVG reports for experiment grids.

CSV columns: ``cell, axis, value, direction, variant, mean_f1, f1_fold0 ..
f1_fold{k-1}, seed, error``. One row per (cell, variant). Floats are written
with ``repr`` so reading the file back reproduces them exactly. Wall-clock
time is deliberately excluded so replayed runs produce identical bytes.
"""
from __future__ import annotations

import csv
import json
from html import escape

import numpy as np

from crossaug.eval.experiment import ExperimentResult

SERIES_COLOURS = {"baseline": "#444444", "ae": "#1f77b4", "vae": "#d62728"}
DASHES = {"A": "", "B": "6,4"}


def _fold_count(results) -> int:
    return max((len(v) for r in results for v in r.fold_f1.values()), default=0)


def write_csv(results: list[ExperimentResult], path) -> None:
    if not results:
        raise ValueError("no results to report")
    k = _fold_count(results)
    header = ["cell", "axis", "value", "direction", "variant", "mean_f1"]
    header += [f"f1_fold{i}" for i in range(k)] + ["seed", "error"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in results:
            if r.error and not r.fold_f1:
                w.writerow([r.cell, r.axis, r.value, r.direction, "", "", *[""] * k, r.seed, r.error])
                continue
            means = r.mean_f1
            for variant, folds in r.fold_f1.items():
                row = [r.cell, r.axis, r.value, r.direction, variant,
                       repr(means[variant]) if variant in means else ""]
                row += [repr(float(v)) for v in folds] + [""] * (k - len(folds))
                w.writerow(row + [r.seed, r.error or ""])


def read_csv(path) -> list[ExperimentResult]:
    """Rebuild results from :func:`write_csv` output (timings are not stored)."""
    results: dict[str, ExperimentResult] = {}
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            r = results.get(row["cell"])
            if r is None:
                r = results[row["cell"]] = ExperimentResult(
                    row["cell"], row["axis"], int(row["value"]), row["direction"],
                    seed=int(row["seed"]), error=row["error"] or None)
            if row["variant"]:
                folds = [float(row[k]) for k in sorted(
                    (k for k in row if k.startswith("f1_fold")), key=lambda k: int(k[7:])) if row[k]]
                r.fold_f1[row["variant"]] = folds
    return list(results.values())


def write_timings(results, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump({r.cell: r.seconds for r in results}, f, indent=1)


def write_svg(results: list[ExperimentResult], path, title: str = "F1 by grid value",
              width: int = 640, height: int = 400) -> None:
    """Line chart: x = grid value, one series per (variant, direction)."""
    if not results:
        raise ValueError("no results to report")
    xs = sorted({r.value for r in results})
    series: dict[tuple[str, str], dict[int, float]] = {}
    for r in results:
        for variant, mean in r.mean_f1.items():
            series.setdefault((variant, r.direction), {})[r.value] = mean
    values = [v for s in series.values() for v in s.values()] or [0.0, 1.0]
    lo, hi = min(values), max(values)
    pad = max((hi - lo) * 0.1, 0.005)
    lo, hi = max(0.0, lo - pad), min(1.0, hi + pad)
    if hi <= lo:
        lo, hi = max(0.0, lo - 0.01), min(1.0, hi + 0.01)
    left, right, top, bottom = 70, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def px(i):
        return left + (pw * i / (len(xs) - 1) if len(xs) > 1 else pw / 2)

    def py(v):
        return top + ph * (1.0 - (v - lo) / (hi - lo))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{left + pw / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>']
    axis = results[0].axis
    for i, x in enumerate(xs):
        out.append(f'<g class="xtick"><line x1="{px(i):.1f}" y1="{top + ph}" x2="{px(i):.1f}" '
                   f'y2="{top + ph + 5}" stroke="black"/><text x="{px(i):.1f}" y="{top + ph + 18}" '
                   f'text-anchor="middle">{x}</text></g>')
    for t in np.linspace(lo, hi, 5):
        out.append(f'<g class="ytick"><line x1="{left - 5}" y1="{py(t):.1f}" x2="{left}" y2="{py(t):.1f}" '
                   f'stroke="black"/><text x="{left - 8}" y="{py(t) + 4:.1f}" text-anchor="end">'
                   f'{t:.3f}</text></g>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">'
               f'{"common columns" if axis == "n" else "rows from dataset B"}</text>')
    out.append(f'<text transform="translate(18 {top + ph / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle">mean F1</text>')
    for j, ((variant, direction), pts) in enumerate(sorted(series.items())):
        colour = SERIES_COLOURS.get(variant, "#2ca02c")
        coords = " ".join(f"{px(xs.index(x)):.1f},{py(v):.1f}" for x, v in sorted(pts.items()))
        dash = f' stroke-dasharray="{DASHES[direction]}"' if DASHES.get(direction) else ""
        label = f"{variant} ({direction})"
        out.append(f'<polyline class="series" data-label="{escape(label)}" points="{coords}" '
                   f'fill="none" stroke="{colour}" stroke-width="2"{dash}/>')
        ly = top + 10 + 18 * j
        out.append(f'<line x1="{left + pw + 15}" y1="{ly}" x2="{left + pw + 40}" y2="{ly}" '
                   f'stroke="{colour}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{left + pw + 45}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(out) + "\n")


def emit_report(results, out_dir, fmt=("csv", "svg"), stem: str = "report", title=None) -> list[str]:
    import os

    if not results:
        raise ValueError("no results to report")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if "csv" in fmt:
        written.append(os.path.join(out_dir, f"{stem}.csv"))
        write_csv(results, written[-1])
    if "svg" in fmt:
        written.append(os.path.join(out_dir, f"{stem}.svg"))
        write_svg(results, written[-1], title or "F1 by grid value")
    return written
