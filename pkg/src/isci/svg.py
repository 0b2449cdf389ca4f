"""Minimal self-contained SVG line charts for sweep results.

Only polylines, circles and text are used. Output bytes depend on nothing but
the input values, so identical results render identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

from .experiments import SIMPLIFIED, MODELS, SweepResult, degradation_table

PANEL_W, PANEL_H = 420, 300
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 130, 34, 48
COLORS = {"fm": "#1f77b4", "fr": "#d62728", "iN": "#2ca02c", "dN": "#9467bd"}
DASHES = ("", "6,3", "2,2", "8,3,2,3", "1,3")
LOG_DECADES = 2.0


@dataclass
class Series:
    label: str
    x: list
    y: list
    color: str = "#000000"
    dash: str = ""


def _fmt(v):
    return f"{v:.2f}"


def _tick_label(v):
    if v == 0:
        return "0"
    a = abs(v)
    if 1e-3 <= a < 1e4:
        return f"{v:.4g}"
    return f"{v:.0e}".replace("e-0", "e-").replace("e+0", "e")


def _nice_ticks(lo, hi, count=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _use_log(values):
    vals = [v for v in values if math.isfinite(v)]
    if not vals or min(vals) <= 0:
        return False
    return math.log10(max(vals) / min(vals)) > LOG_DECADES


class _Axis:
    def __init__(self, values, log, pixels, flip=False):
        vals = [v for v in values if math.isfinite(v) and (v > 0 or not log)]
        self.log = log
        self.pixels = pixels
        self.flip = flip
        if not vals:
            vals = [0.0, 1.0] if not log else [1.0, 10.0]
        lo, hi = min(vals), max(vals)
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
            lo, hi = math.floor(lo), math.ceil(hi)
            if hi == lo:
                hi = lo + 1
        elif hi == lo:
            pad = abs(lo) * 0.1 or 1.0
            lo, hi = lo - pad, hi + pad
        else:
            pad = 0.05 * (hi - lo)
            lo, hi = lo - pad, hi + pad
        self.lo, self.hi = lo, hi

    def keep(self, v):
        return math.isfinite(v) and (v > 0 or not self.log)

    def map(self, v):
        u = math.log10(v) if self.log else v
        f = (u - self.lo) / (self.hi - self.lo)
        return self.pixels * (1 - f) if self.flip else self.pixels * f

    def ticks(self):
        if self.log:
            lo, hi = int(self.lo), int(self.hi)
            step = max(1, (hi - lo + 5) // 6)
            return [10.0 ** e for e in range(lo, hi + 1, step)]
        return _nice_ticks(self.lo, self.hi)


def chart(series, title, xlabel, ylabel, ox=0, oy=0, log_y=None, log_x=None):
    """SVG elements of one chart panel with its top-left corner at ``(ox, oy)``."""
    xs = [v for s in series for v in s.x]
    ys = [v for s in series for v in s.y]
    log_x = _use_log(xs) if log_x is None else log_x
    log_y = _use_log(ys) if log_y is None else log_y
    w = PANEL_W - MARGIN_L - MARGIN_R
    h = PANEL_H - MARGIN_T - MARGIN_B
    ax, ay = _Axis(xs, log_x, w), _Axis(ys, log_y, h, flip=True)
    x0, y0 = ox + MARGIN_L, oy + MARGIN_T
    out = [f'<g font-family="sans-serif" font-size="11">']
    out.append(f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(w)}" height="{_fmt(h)}" '
               f'fill="none" stroke="#000000" stroke-width="1"/>')
    for t in ax.ticks():
        px = x0 + ax.map(t)
        out.append(f'<polyline points="{_fmt(px)},{_fmt(y0 + h)} {_fmt(px)},{_fmt(y0 + h + 4)}" stroke="#000000"/>')
        out.append(f'<text x="{_fmt(px)}" y="{_fmt(y0 + h + 16)}" text-anchor="middle">{escape(_tick_label(t))}</text>')
    for t in ay.ticks():
        py = y0 + ay.map(t)
        out.append(f'<polyline points="{_fmt(x0 - 4)},{_fmt(py)} {_fmt(x0 + w)},{_fmt(py)}" '
                   f'stroke="#dddddd" stroke-width="0.5"/>')
        out.append(f'<text x="{_fmt(x0 - 6)}" y="{_fmt(py + 4)}" text-anchor="end">{escape(_tick_label(t))}</text>')
    out.append(f'<text x="{_fmt(x0 + w / 2)}" y="{_fmt(oy + 20)}" text-anchor="middle" font-size="13">'
               f'{escape(title)}</text>')
    out.append(f'<text x="{_fmt(x0 + w / 2)}" y="{_fmt(y0 + h + 36)}" text-anchor="middle">{escape(xlabel)}</text>')
    cy = y0 + h / 2
    out.append(f'<text x="{_fmt(ox + 14)}" y="{_fmt(cy)}" text-anchor="middle" '
               f'transform="rotate(-90 {_fmt(ox + 14)} {_fmt(cy)})">{escape(ylabel)}</text>')

    for k, s in enumerate(series):
        pts = [(x0 + ax.map(x), y0 + ay.map(y)) for x, y in zip(s.x, s.y) if ax.keep(x) and ay.keep(y)]
        dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
        if len(pts) > 1:
            path = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{s.color}" stroke-width="1.5"{dash}/>')
        for px, py in pts:
            out.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="2.5" fill="{s.color}"/>')
        ly = y0 + 8 + 14 * k
        lx = x0 + w + 10
        out.append(f'<polyline points="{_fmt(lx)},{_fmt(ly)} {_fmt(lx + 18)},{_fmt(ly)}" stroke="{s.color}" '
                   f'stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{_fmt(lx + 22)}" y="{_fmt(ly + 4)}">{escape(s.label)}</text>')
    out.append("</g>")
    return out


def figure(panels, columns=2) -> str:
    """Arrange ``panels`` (keyword dicts for :func:`chart`) on a grid."""
    cols = min(columns, len(panels)) or 1
    rows = math.ceil(len(panels) / cols)
    W, H = cols * PANEL_W, rows * PANEL_H
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="#ffffff"/>']
    for i, p in enumerate(panels):
        out.extend(chart(ox=(i % cols) * PANEL_W, oy=(i // cols) * PANEL_H, **p))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _axis_label(axis_name):
    return "symbol SNR (dB)" if axis_name == "snr_db" else "spread factor (dimensionless)"


def _groups(records, axis_name):
    """Series keys: models, split by SNR on a spread axis."""
    snrs = sorted({r["snr_db"] for r in records}) if axis_name == "delta_D" else [None]
    return snrs


def _series(records, column, models, knowledge, axis_name, label_knowledge=False):
    out = []
    snrs = _groups(records, axis_name)
    for j, snr in enumerate(snrs):
        for model in models:
            rows = [r for r in records if r["model"] == model
                    and (knowledge is None or r.get("knowledge") == knowledge)
                    and (snr is None or r["snr_db"] == snr)]
            if not rows:
                continue
            rows.sort(key=lambda r: r["axis_value"])
            label = model
            if label_knowledge and knowledge:
                label += " (known)" if knowledge == "full" else " (pilots)"
            if snr is not None:
                label += f", {snr:g} dB"
            dash = DASHES[j % len(DASHES)] if snr is not None else (DASHES[1] if knowledge == "full" and label_knowledge else "")
            out.append(Series(label, [r["axis_value"] for r in rows], [r[column] for r in rows],
                              COLORS.get(model, "#000000"), dash))
    return out


def capacity_panels(result: SweepResult):
    recs = [r for r in result.records if r["knowledge"] == "partial"]
    xl = _axis_label(result.axis_name)
    return [dict(series=_series(recs, "cap_mc", MODELS, "partial", result.axis_name),
                 title="Ergodic capacity (pilot-based CSI)", xlabel=xl, ylabel="capacity (bits/frame)")]


def sensing_panels(result: SweepResult):
    xl = _axis_label(result.axis_name)
    recs = result.records
    series = (_series(recs, "D", MODELS, "partial", result.axis_name, label_knowledge=True)
              + _series(recs, "D_known", MODELS, "full", result.axis_name, label_knowledge=True))
    if result.axis_name == "delta_D":
        return [dict(series=_series(recs, "D", MODELS, "partial", result.axis_name),
                     title="Sensing error, pilots only", xlabel=xl, ylabel="sensing error (linear)"),
                dict(series=_series(recs, "D_known", MODELS, "full", result.axis_name),
                     title="Sensing error, known symbols", xlabel=xl, ylabel="sensing error (linear)")]
    return [dict(series=series, title="Sensing error", xlabel=xl, ylabel="sensing error (linear)")]


def degradation_panels(result: SweepResult):
    table = degradation_table(result)
    xl = _axis_label(result.axis_name)
    spec = (("cap_diff", "(a) capacity loss", "C_s - C_fm (bits/frame)"),
            ("cap_lower_diff", "(b) worst-case capacity loss", "C^L_s - C_fm (bits/frame)"),
            ("D_ratio", "(c) pilot-based sensing error", "D_s / D_fm (ratio)"),
            ("D_known_ratio", "(d) known-symbol sensing error", "D_s / D_fm, known (ratio)"))
    return [dict(series=_series(table, col, SIMPLIFIED, None, result.axis_name), title=t, xlabel=xl, ylabel=yl)
            for col, t, yl in spec]


PANELS = {"capacity": capacity_panels, "sensing": sensing_panels, "degradation": degradation_panels}


def emit_svg(result: SweepResult, panel: str, path) -> Path:
    """Render one figure family (``capacity``, ``sensing`` or ``degradation``)."""
    if not result.records:
        raise ValueError("cannot chart an empty result")
    if panel not in PANELS:
        raise ValueError(f"unknown panel selection {panel!r}; expected one of {tuple(PANELS)}")
    text = figure(PANELS[panel](result))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
