"""Rendering: per-attribute block tables, scatter data and SVG plots, distribution bars."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable

from .bias import SLICES, BiasReport, BiasRow, ErrorPair, RPKind, RPValue
from .stats import DistributionSummary, TopCorrelations


class OutputFormat(enum.Enum):
    TEXT = "text"
    JSON = "json"
    CSV = "csv"
    SVG = "svg"


@dataclass(frozen=True)
class RenderOptions:
    format: OutputFormat = OutputFormat.TEXT
    percent_decimals: int = 2
    legacy_sentinels: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "format", OutputFormat(self.format))
        if self.percent_decimals < 0:
            raise ValueError("percent_decimals must be >= 0")


MODERN_SENTINELS = {
    RPKind.NEG_GROUP_PERFECT: "n/a (negative group perfect)",
    RPKind.BOTH_PERFECT: "n/a (both perfect)",
    RPKind.DEGENERATE: "n/a (degenerate group)",
}
LEGACY_SENTINELS = {
    RPKind.NEG_GROUP_PERFECT: "All wrong",
    RPKind.BOTH_PERFECT: "All correct",
    RPKind.DEGENERATE: "-",
}
MISSING_CELL = "-"

COLUMNS = tuple(f"{s.value}_{src}" for s in SLICES for src in ("data", "control"))
ROW_CLASSES = ("Positive", "Negative", "Rel. Perf.")


def format_percent(fraction: float, decimals: int = 2) -> str:
    """``-0.927 -> '-92.70%'``; negative zero prints as ``0.00%``."""
    return _num(100.0 * fraction, decimals) + "%"


def format_rp(value: RPValue, options: RenderOptions = RenderOptions()) -> str:
    if value.is_finite:
        assert value.value is not None
        return format_percent(value.value, options.percent_decimals)
    table = LEGACY_SENTINELS if options.legacy_sentinels else MODERN_SENTINELS
    return table[value.kind]


def parse_cell(cell: str) -> float | str:
    """Inverse of the cell formatting: a fraction for percentages, else the sentinel text."""
    s = cell.strip()
    if s.endswith("%"):
        return float(s[:-1].replace("−", "-")) / 100.0
    return s


def _block(row: BiasRow, options: RenderOptions) -> list[list[str]]:
    d = options.percent_decimals

    def err(p: ErrorPair | None, pos: bool) -> str:
        if p is None:
            return MISSING_CELL
        return format_percent(p.err_pos if pos else p.err_neg, d)

    pos, neg, rel = [], [], []
    for s in SLICES:
        for src in ("data", "control"):
            p = row.pair(src, s)
            pos.append(err(p, True))
            neg.append(err(p, False))
            rel.append(format_rp(row.rp(src, s), options))
    return [pos, neg, rel]


def table_cells(report: BiasReport, options: RenderOptions = RenderOptions()) -> list[tuple[str, str, list[str]]]:
    """``(attribute, class, six cells)`` for every printed row."""
    out = []
    for row in report.rows:
        for cls, cells in zip(ROW_CLASSES, _block(row, options)):
            out.append((row.attribute, cls, cells))
    return out


def render_table(report: BiasReport, options: RenderOptions = RenderOptions()) -> str:
    """Per-attribute block table as text, CSV or JSON (JSON is the full report)."""
    fmt = options.format
    if fmt is OutputFormat.JSON:
        return report.to_json()
    if fmt is OutputFormat.SVG:
        raise ValueError("tables have no SVG rendering; use emit_scatter")
    cells = table_cells(report, options)
    if fmt is OutputFormat.CSV:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["attribute", "class", *COLUMNS])
        for attr, cls, vals in cells:
            w.writerow([attr, cls, *vals])
        return buf.getvalue()
    header = ["Attribute", "Class", *(c.replace("_", " ").title() for c in COLUMNS)]
    body = [[attr if cls == ROW_CLASSES[0] else "", cls, *vals] for attr, cls, vals in cells]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header, *body]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> list[tuple[str, str, list[str]]]:
    """Read back a text table from :func:`render_table` using its header column offsets."""
    lines = text.splitlines()
    rule = lines[1]
    starts = [i for i, ch in enumerate(rule) if ch == "-" and (i == 0 or rule[i - 1] == " ")]
    bounds = list(zip(starts, starts[1:] + [None]))
    out = []
    attr = ""
    for line in lines[2:]:
        fields = [line[a:b].strip() for a, b in bounds]
        if fields[0]:
            attr = fields[0]
        out.append((attr, fields[1], fields[2:]))
    return out


# ---------------------------------------------------------------- scatter


class ScatterKind(enum.Enum):
    RP_VS_CRP = "rp-vs-crp"  # x = CRP, y = RP (data)
    PDRP_VS_DDRP = "pdrp-vs-ddrp"  # x = DDRP, y = PDRP


AXIS_LABELS = {
    ScatterKind.RP_VS_CRP: ("CRP (corrected relative performance, %)", "RP (relative performance, %)"),
    ScatterKind.PDRP_VS_DDRP: ("DDRP (CRP on fake data, %)", "PDRP (CRP on pristine data, %)"),
}


@dataclass(frozen=True)
class ScatterPoint:
    attribute: str
    x: float  # percent
    y: float


@dataclass(frozen=True)
class ScatterData:
    kind: ScatterKind
    points: list[ScatterPoint]
    sentinels: list[tuple[str, RPValue, RPValue]]  # rows without finite coordinates

    def to_csv(self, decimals: int = 2) -> str:
        lines = ["attribute,x,y"]
        for p in self.points:
            lines.append(f"{_csv_name(p.attribute)},{_num(p.x, decimals)},{_num(p.y, decimals)}")
        return "\n".join(lines) + "\n"

    def sentinels_csv(self) -> str:
        lines = ["attribute,x_kind,y_kind"]
        for name, x, y in self.sentinels:
            lines.append(f"{_csv_name(name)},{x.kind.value},{y.kind.value}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "points": [{"attribute": p.attribute, "x": p.x, "y": p.y} for p in self.points],
            "sentinels": [{"attribute": n, "x": x.to_dict(), "y": y.to_dict()} for n, x, y in self.sentinels],
        }


def _csv_name(name: str) -> str:
    if any(c in name for c in ',"\n'):
        return '"' + name.replace('"', '""') + '"'
    return name


def _num(v: float, decimals: int) -> str:
    text = f"{v:.{decimals}f}"
    return text.lstrip("-") if float(text) == 0 else text


def scatter_data(report: BiasReport, kind: ScatterKind | str) -> ScatterData:
    kind = ScatterKind(kind)
    points, sentinels = [], []
    for row in report.rows:
        if kind is ScatterKind.RP_VS_CRP:
            x, y = row.crp, row.rp_data
        else:
            x, y = row.ddrp, row.pdrp
        if x.is_finite and y.is_finite:
            points.append(ScatterPoint(row.attribute, 100.0 * x.value, 100.0 * y.value))  # type: ignore[operator]
        else:
            sentinels.append((row.attribute, x, y))
    return ScatterData(kind, points, sentinels)


def emit_scatter(report: BiasReport, kind: ScatterKind | str, options: RenderOptions = RenderOptions()) -> str:
    data = scatter_data(report, kind)
    fmt = options.format
    if fmt is OutputFormat.SVG:
        return scatter_svg(data)
    if fmt is OutputFormat.JSON:
        return json.dumps(data.to_dict(), indent=2) + "\n"
    return data.to_csv(options.percent_decimals)


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


def _f(v: float) -> str:
    return f"{v:.2f}"


def _nice_limit(values: Iterable[float]) -> float:
    m = max((abs(v) for v in values), default=0.0)
    if m == 0:
        return 100.0
    step = 10 ** math.floor(math.log10(m))
    return math.ceil(m * 1.1 / step) * step


def scatter_svg(
    data: ScatterData,
    x_limit: float | None = None,
    y_limit: float | None = None,
    width: int = 640,
    height: int = 520,
) -> str:
    """Deterministic SVG: symmetric axes, bisectrix y = x, shaded same-sign quadrants I and III."""
    xl = x_limit or _nice_limit(p.x for p in data.points)
    yl = y_limit or _nice_limit(p.y for p in data.points)
    left, right, top, bottom = 70, 20, 20, 90
    pw, ph = width - left - right, height - top - bottom

    def sx(x: float) -> float:
        return left + (x + xl) / (2 * xl) * pw

    def sy(y: float) -> float:
        return top + (yl - y) / (2 * yl) * ph

    x_label, y_label = AXIS_LABELS[data.kind]
    cx, cy = sx(0), sy(0)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{_f(cx)}" y="{top}" width="{_f(left + pw - cx)}" height="{_f(cy - top)}" fill="#e8f2e8"/>',
        f'<rect x="{left}" y="{_f(cy)}" width="{_f(cx - left)}" height="{_f(top + ph - cy)}" fill="#f6e6e6"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<line x1="{left}" y1="{_f(cy)}" x2="{left + pw}" y2="{_f(cy)}" stroke="#888"/>',
        f'<line x1="{_f(cx)}" y1="{top}" x2="{_f(cx)}" y2="{top + ph}" stroke="#888"/>',
    ]
    # bisectrix clipped to the plot box
    lim = min(xl, yl)
    out.append(
        f'<line x1="{_f(sx(-lim))}" y1="{_f(sy(-lim))}" x2="{_f(sx(lim))}" y2="{_f(sy(lim))}" '
        'stroke="#1f4e9c" stroke-dasharray="6 4"/>'
    )
    for frac in (-1.0, -0.5, 0.0, 0.5, 1.0):
        out.append(f'<text x="{_f(sx(frac * xl))}" y="{top + ph + 16}" text-anchor="middle">{_num(frac * xl, 0)}</text>')
        out.append(f'<text x="{left - 6}" y="{_f(sy(frac * yl) + 4)}" text-anchor="end">{_num(frac * yl, 0)}</text>')
    out.append(f'<text x="{_f(left + pw / 2)}" y="{top + ph + 34}" text-anchor="middle">{_esc(x_label)}</text>')
    out.append(
        f'<text x="16" y="{_f(top + ph / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_f(top + ph / 2)})">{_esc(y_label)}</text>'
    )
    for p in data.points:
        px = min(max(p.x, -xl), xl)
        py = min(max(p.y, -yl), yl)
        out.append(
            f'<circle cx="{_f(sx(px))}" cy="{_f(sy(py))}" r="3.5" fill="#c0392b">'
            f"<title>{_esc(p.attribute)} ({_num(p.x, 2)}, {_num(p.y, 2)})</title></circle>"
        )
        out.append(f'<text x="{_f(sx(px) + 5)}" y="{_f(sy(py) - 5)}" font-size="9">{_esc(p.attribute)}</text>')
    ly = top + ph + 52
    out.append(f'<line x1="{left}" y1="{ly}" x2="{left + 24}" y2="{ly}" stroke="#1f4e9c" stroke-dasharray="6 4"/>')
    out.append(f'<text x="{left + 30}" y="{ly + 4}">bisectrix y = x</text>')
    out.append(f'<rect x="{left + 140}" y="{ly - 6}" width="12" height="12" fill="#e8f2e8"/>')
    out.append(f'<text x="{left + 158}" y="{ly + 4}">quadrant I</text>')
    out.append(f'<rect x="{left + 240}" y="{ly - 6}" width="12" height="12" fill="#f6e6e6"/>')
    out.append(f'<text x="{left + 258}" y="{ly + 4}">quadrant III</text>')
    out.append(
        f'<text x="{left}" y="{ly + 22}">{len(data.points)} attributes plotted; '
        f"{len(data.sentinels)} without finite coordinates omitted</text>"
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------- distributions


def distribution_svg(summary: DistributionSummary, width: int = 640, bar_height: int = 14) -> str:
    """Stacked horizontal bars: positive (green), negative (red), undefined (grey)."""
    label_w, right, top = 170, 60, 10
    pw = width - label_w - right
    height = top * 2 + len(summary.names) * (bar_height + 4) + 24
    pct = summary.percentages
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    colors = ("#2e8b57", "#c0392b", "#bbbbbb")
    for i, name in enumerate(summary.names):
        y = top + i * (bar_height + 4)
        out.append(f'<text x="{label_w - 6}" y="{y + bar_height - 3}" text-anchor="end">{_esc(name)}</text>')
        x = float(label_w)
        for k in range(3):
            w = pw * pct[i, k] / 100.0
            out.append(f'<rect x="{_f(x)}" y="{y}" width="{_f(w)}" height="{bar_height}" fill="{colors[k]}"/>')
            x += w
        out.append(f'<text x="{label_w + pw + 4}" y="{y + bar_height - 3}">{pct[i, 0]:.2f}%</text>')
    ly = height - 10
    for k, text in enumerate(("positive", "negative", "undefined")):
        lx = label_w + 110 * k
        out.append(f'<rect x="{lx}" y="{ly - 9}" width="10" height="10" fill="{colors[k]}"/>')
        out.append(f'<text x="{lx + 14}" y="{ly}">{text}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def correlations_csv(top: TopCorrelations, decimals: int | None = None) -> str:
    """``attr_a,attr_b,pearson,support``: positive pairs, then negative pairs."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["attr_a", "attr_b", "pearson", "support"])
    for p in [*top.positive, *top.negative]:
        r = repr(p.pearson) if decimals is None else f"{p.pearson:.{decimals}f}"
        w.writerow([p.attr_a, p.attr_b, r, p.support])
    return buf.getvalue()

