"""Planner-curve serialization: CSV with a reproducibility header and a
static SVG rendering, log storage against log failure probability.
"""

from __future__ import annotations

import csv
import io
import math
from typing import Iterable, Sequence, TextIO

from .analysis import PlanPoint

CSV_COLUMNS = ("family", "m", "k", "s", "lam_i", "lam_t", "num",
               "storage_bits", "log2_eps_prime", "log2_honest_fp")

_PP_COLUMNS = ("m", "k", "s", "lam_i", "lam_t", "num")

_FAMILY_COLORS = {
    "bloom": "#1f6fb4",
    "cuckoo": "#c23b22",
    "prf_wrapped_cuckoo": "#2b8a3e",
}


def curve_rows(points: Iterable[PlanPoint]) -> list[dict]:
    """Typed row dicts over CSV_COLUMNS; inapplicable pp fields are None."""
    rows = []
    for p in points:
        row = {c: None for c in CSV_COLUMNS}
        row["family"] = p.family
        for key, value in p.pp.items():
            row[key] = value
        row["storage_bits"] = p.storage_bits
        row["log2_eps_prime"] = math.log2(p.eps_prime)
        row["log2_honest_fp"] = math.log2(p.honest_fp)
        rows.append(row)
    return rows


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)  # shortest exact round-trip
    return str(value)


def write_curve_csv(points: Sequence[PlanPoint], fh: TextIO,
                    meta: dict | None = None) -> None:
    if not points:
        raise ValueError("no points to emit")
    for key, value in (meta or {}).items():
        fh.write(f"# {key}: {value}\n")
    writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for row in curve_rows(points):
        writer.writerow({c: _format_cell(v) for c, v in row.items()})


def parse_curve_csv(fh: TextIO) -> tuple[list[dict], dict]:
    """Read back an emitted curve: typed rows plus the header metadata."""
    meta: dict = {}
    body = io.StringIO()
    for line in fh:
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        else:
            body.write(line)
    body.seek(0)
    rows = []
    for raw in csv.DictReader(body):
        row: dict = {"family": raw["family"]}
        for c in _PP_COLUMNS:
            row[c] = int(raw[c]) if raw[c] else None
        row["storage_bits"] = int(raw["storage_bits"])
        row["log2_eps_prime"] = float(raw["log2_eps_prime"])
        row["log2_honest_fp"] = float(raw["log2_honest_fp"])
        rows.append(row)
    return rows, meta


def _ticks(lo: float, hi: float, want: int = 6) -> list[float]:
    if hi <= lo:
        return [lo]
    raw_step = (hi - lo) / max(want - 1, 1)
    step = max(1, round(raw_step))
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-9:
        out.append(t)
        t += step
    return out or [lo]


def write_curve_svg(points: Sequence[PlanPoint], fh: TextIO,
                    meta: dict | None = None,
                    width: int = 680, height: int = 440) -> None:
    """Log-log curve: solid adversarial and dashed honest series per family."""
    if not points:
        raise ValueError("no points to emit")
    margin_l, margin_r, margin_t, margin_b = 64, 150, 28, 46
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b

    by_family: dict[str, list[PlanPoint]] = {}
    for p in sorted(points, key=lambda p: p.storage_bits):
        by_family.setdefault(p.family, []).append(p)

    xs = [math.log2(p.storage_bits) for p in points]
    ys = ([math.log2(p.eps_prime) for p in points]
          + [math.log2(p.honest_fp) for p in points])
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    def sx(v: float) -> float:
        return margin_l + (v - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v: float) -> float:
        return margin_t + (y_hi - v) / (y_hi - y_lo) * plot_h

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    if meta:
        blurb = " ".join(f"{k}={v}" for k, v in meta.items())
        out.append(f'<title>{blurb}</title>')

    # axes
    out.append(f'<line x1="{margin_l}" y1="{margin_t + plot_h}" '
               f'x2="{margin_l + plot_w}" y2="{margin_t + plot_h}" '
               f'stroke="#333"/>')
    out.append(f'<line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" '
               f'y2="{margin_t + plot_h}" stroke="#333"/>')
    for t in _ticks(x_lo, x_hi):
        x = sx(t)
        out.append(f'<line x1="{x:.1f}" y1="{margin_t + plot_h}" '
                   f'x2="{x:.1f}" y2="{margin_t + plot_h + 4}" stroke="#333"/>')
        out.append(f'<text x="{x:.1f}" y="{margin_t + plot_h + 17}" '
                   f'font-size="11" text-anchor="middle">2^{t:.0f}</text>')
    for t in _ticks(y_lo, y_hi):
        y = sy(t)
        out.append(f'<line x1="{margin_l - 4}" y1="{y:.1f}" x2="{margin_l}" '
                   f'y2="{y:.1f}" stroke="#333"/>')
        out.append(f'<text x="{margin_l - 7}" y="{y + 4:.1f}" font-size="11" '
                   f'text-anchor="end">2^{t:.0f}</text>')
    out.append(f'<text x="{margin_l + plot_w / 2:.1f}" y="{height - 8}" '
               f'font-size="12" text-anchor="middle">storage (bits)</text>')
    out.append(f'<text x="14" y="{margin_t + plot_h / 2:.1f}" font-size="12" '
               f'text-anchor="middle" transform="rotate(-90 14 '
               f'{margin_t + plot_h / 2:.1f})">failure probability</text>')

    legend_y = margin_t + 8
    for family, pts in by_family.items():
        color = _FAMILY_COLORS.get(family, "#555")
        adv = " ".join(f"{sx(math.log2(p.storage_bits)):.1f},"
                       f"{sy(math.log2(p.eps_prime)):.1f}" for p in pts)
        hon = " ".join(f"{sx(math.log2(p.storage_bits)):.1f},"
                       f"{sy(math.log2(p.honest_fp)):.1f}" for p in pts)
        out.append(f'<polyline points="{adv}" fill="none" stroke="{color}" '
                   f'stroke-width="1.8" class="adversarial {family}"/>')
        out.append(f'<polyline points="{hon}" fill="none" stroke="{color}" '
                   f'stroke-width="1.4" stroke-dasharray="5 4" '
                   f'class="honest {family}"/>')
        for p in pts:
            out.append(f'<circle cx="{sx(math.log2(p.storage_bits)):.1f}" '
                       f'cy="{sy(math.log2(p.eps_prime)):.1f}" r="2.4" '
                       f'fill="{color}"/>')
            out.append(f'<circle cx="{sx(math.log2(p.storage_bits)):.1f}" '
                       f'cy="{sy(math.log2(p.honest_fp)):.1f}" r="2.0" '
                       f'fill="none" stroke="{color}"/>')
        lx = margin_l + plot_w + 10
        out.append(f'<line x1="{lx}" y1="{legend_y}" x2="{lx + 22}" '
                   f'y2="{legend_y}" stroke="{color}" stroke-width="1.8"/>')
        out.append(f'<text x="{lx + 27}" y="{legend_y + 4}" font-size="11">'
                   f'{family} adversarial</text>')
        legend_y += 16
        out.append(f'<line x1="{lx}" y1="{legend_y}" x2="{lx + 22}" '
                   f'y2="{legend_y}" stroke="{color}" stroke-width="1.4" '
                   f'stroke-dasharray="5 4"/>')
        out.append(f'<text x="{lx + 27}" y="{legend_y + 4}" font-size="11">'
                   f'{family} honest</text>')
        legend_y += 20

    out.append("</svg>")
    fh.write("\n".join(out) + "\n")
