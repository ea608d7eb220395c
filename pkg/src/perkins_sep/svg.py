"""Hand-written SVG pictures of a vh-barrier and its doubled-axis form."""

from __future__ import annotations

import math

from .barriers import VhBarrier, to_dbarrier, Side

VIOLET = "#8a2be2"
HOT_PINK = "#ff69b4"
W, H, PAD = 360, 360, 36


def _fmt(x: float) -> str:
    return format(x, ".6g")


class _Frame:
    def __init__(self, lo: float, hi: float, x0: float = 0.0):
        span = hi - lo or 1.0
        self.lo, self.hi = lo - 0.1 * span, hi + 0.1 * span
        self.x0 = x0

    def px(self, v: float) -> float:
        return self.x0 + PAD + (v - self.lo) / (self.hi - self.lo) * (W - 2 * PAD)

    def py(self, v: float) -> float:
        return H - PAD - (v - self.lo) / (self.hi - self.lo) * (H - 2 * PAD)


def _line(x1, y1, x2, y2, colour, width=2.5, dash=None) -> str:
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
        f'stroke="{colour}" stroke-width="{width}"{extra}/>'
    )


def _text(x, y, s, size=11, anchor="middle") -> str:
    return f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" text-anchor="{anchor}">{s}</text>'


def _plane_panel(b: VhBarrier, lo: float, hi: float) -> list[str]:
    f = _Frame(lo, hi)
    out = [
        _line(f.px(f.lo), f.py(f.lo), f.px(f.hi), f.py(f.lo), "black", 1),
        _line(f.px(f.lo), f.py(f.lo), f.px(f.lo), f.py(f.hi), "black", 1),
        _line(f.px(f.lo), f.py(f.lo), f.px(f.hi), f.py(f.hi), "#999999", 1, "4 3"),
        _text(W / 2, H - 6, "running max"),
        f'<text x="12" y="{H / 2}" font-size="11" text-anchor="middle" '
        f'transform="rotate(-90 12 {H / 2})">running min</text>',
    ]
    for x, d in b.v_lines:
        out.append(_line(f.px(x), f.py(max(d, f.lo)), f.px(x), f.py(x), VIOLET))
    for y, r in b.h_lines:
        out.append(_line(f.px(y), f.py(y), f.px(min(r, f.hi)), f.py(y), HOT_PINK))
        out.append(_line(f.px(y), f.py(y), f.px(y), f.py(f.lo), HOT_PINK, 1.5, "5 3"))
    return out


def _doubled_panel(b: VhBarrier, lo: float, hi: float) -> list[str]:
    """Left half: reversed copy of the axis; right half: the axis itself."""
    db = to_dbarrier(b)
    f = _Frame(lo, hi, x0=W)
    half = (W - 2 * PAD) / 2
    left0 = W + PAD
    mid = left0 + half

    def dx(point):
        t = (point.value - f.lo) / (f.hi - f.lo)
        t = min(max(t, 0.0), 1.0)
        return mid - t * half if point.side is Side.LEFT else mid + t * half

    out = [
        _line(left0, f.py(f.lo), left0 + 2 * half, f.py(f.lo), "black", 1),
        _line(mid, f.py(f.lo), mid, f.py(f.hi), "#999999", 1, "4 3"),
        _text(left0 + half / 2, H - 6, "reversed"),
        _text(mid + half / 2, H - 6, "forward"),
    ]
    for level in db.levels():
        edge = db.rightmost[level]
        colour = VIOLET if edge.side is Side.LEFT else HOT_PINK
        out.append(_line(left0, f.py(level), dx(edge), f.py(level), colour))
    return out


def barrier_svg(b: VhBarrier, *, doubled: bool = True, extra_levels=()) -> str:
    coords = [c for c in b.coordinates() if math.isfinite(c)] + list(extra_levels)
    lo, hi = (min(coords), max(coords)) if coords else (-1.0, 1.0)
    width = 2 * W if doubled else W
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{H}" viewBox="0 0 {width} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    parts += _plane_panel(b, lo, hi)
    if doubled:
        parts += _doubled_panel(b, lo, hi)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
