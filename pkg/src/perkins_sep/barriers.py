"""Target sets for barrier stopping rules.

A vh-barrier lives in the (running max, running min) half-plane ``max >= min``.
It is a union of

* v-lines ``{x} x [depth, x]``: hit when the path sets a new maximum ``x``
  while its minimum is still at or above ``depth``;
* h-lines at level ``y`` with right end ``r``: the horizontal segment
  ``[y, r] x {y}`` (a new minimum ``y`` while the maximum is at most ``r``)
  together with the tail ``{y} x (-inf, y]`` reached when the maximum
  climbs to ``y`` from below.

The doubled axis ``D`` glues a reversed copy of the reals (``Left``) in front
of the reals (``Right``).  On ``D x R`` a vh-barrier becomes a single region
that is downward closed in the first coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import total_ordering

from .errors import ParseError


def _merge_lines(lines, pick):
    merged: dict[float, float] = {}
    for level, extent in lines:
        level, extent = float(level), float(extent)
        merged[level] = pick(merged[level], extent) if level in merged else extent
    return tuple(sorted(merged.items()))


@dataclass(frozen=True)
class VhBarrier:
    """Union of v-lines ``(max_level, depth)`` and h-lines ``(min_level, right_end)``.

    Lines are canonicalized on construction: sorted by level, with lines at
    a common level merged (deepest v-line, widest h-line).  Two barriers
    describing the same set of lines therefore compare equal.
    """

    v_lines: tuple[tuple[float, float], ...] = ()
    h_lines: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        for x, d in self.v_lines:
            if not d <= x:
                raise ValueError(f"v-line at {x} has depth {d} above its level")
        for y, r in self.h_lines:
            if not y <= r:
                raise ValueError(f"h-line at {y} has right end {r} left of its level")
            if math.isnan(y) or math.isinf(y):
                raise ValueError("h-line level must be finite")
        object.__setattr__(self, "v_lines", _merge_lines(self.v_lines, min))
        object.__setattr__(self, "h_lines", _merge_lines(self.h_lines, max))

    def is_empty(self) -> bool:
        return not self.v_lines and not self.h_lines

    def coordinates(self) -> list[float]:
        out = []
        for x, d in self.v_lines:
            out.append(x)
            if math.isfinite(d):
                out.append(d)
        for y, r in self.h_lines:
            out.append(y)
            if math.isfinite(r):
                out.append(r)
        return out

    def map_coordinates(self, f) -> "VhBarrier":
        def g(v):
            return v if math.isinf(v) else f(v)

        return VhBarrier(
            tuple((g(x), g(d)) for x, d in self.v_lines),
            tuple((g(y), g(r)) for y, r in self.h_lines),
        )

    def to_json(self) -> dict:
        return {
            "v_lines": [{"max": x, "depth": d} for x, d in self.v_lines],
            "h_lines": [{"min": y, "right": r} for y, r in self.h_lines],
        }

    @classmethod
    def from_json(cls, doc) -> "VhBarrier":
        if not isinstance(doc, dict) or not set(doc) <= {"v_lines", "h_lines"}:
            raise ParseError("barrier document must have only 'v_lines' and 'h_lines'")
        try:
            v = [(float(e["max"]), float(e["depth"])) for e in doc.get("v_lines", [])]
            h = [(float(e["min"]), float(e["right"])) for e in doc.get("h_lines", [])]
            for e in doc.get("v_lines", []):
                if set(e) != {"max", "depth"}:
                    raise ParseError(f"bad v-line {e!r}")
            for e in doc.get("h_lines", []):
                if set(e) != {"min", "right"}:
                    raise ParseError(f"bad h-line {e!r}")
            return cls(tuple(v), tuple(h))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"malformed barrier: {exc}") from exc


def vh_hit(b: VhBarrier, max_: float, min_: float) -> bool:
    """Closed membership test of the point ``(max_, min_)`` in ``b``."""
    if max_ < min_:
        raise ValueError("running max below running min")
    for x, d in b.v_lines:
        if max_ == x and d <= min_ <= x:
            return True
    for y, r in b.h_lines:
        if min_ == y and y <= max_ <= r:
            return True
        if max_ == y and min_ <= y:
            return True
    return False


def union(a: VhBarrier, b: VhBarrier) -> VhBarrier:
    return VhBarrier(a.v_lines + b.v_lines, a.h_lines + b.h_lines)


def structure_issues(b: VhBarrier) -> list[str]:
    """Departures from the decreasing-boundary shape of a point-start barrier.

    Moving outwards from the start, v-lines must reach at least as deep and
    h-lines at least as far right as their inner neighbours.
    """
    issues = []
    for (x0, d0), (x1, d1) in zip(b.v_lines, b.v_lines[1:]):
        if d1 > d0:
            issues.append(f"v-line at {x1} (depth {d1}) is shallower than v-line at {x0} (depth {d0})")
    for (y0, r0), (y1, r1) in zip(b.h_lines, b.h_lines[1:]):
        if r0 < r1:
            issues.append(f"h-line at {y0} (right {r0}) is shorter than h-line at {y1} (right {r1})")
    return issues


class Side(Enum):
    LEFT = "L"
    RIGHT = "R"


@total_ordering
@dataclass(frozen=True)
class DPoint:
    """Point of the doubled axis; ``Left`` values are ordered in reverse."""

    side: Side
    value: float

    def _key(self):
        if self.side is Side.LEFT:
            return (0, -self.value)
        return (1, self.value)

    def __lt__(self, other: "DPoint") -> bool:
        return self._key() < other._key()

    def __repr__(self):
        return f"{'Left' if self.side is Side.LEFT else 'Right'}({self.value!r})"


def Left(value: float) -> DPoint:
    return DPoint(Side.LEFT, float(value))


def Right(value: float) -> DPoint:
    return DPoint(Side.RIGHT, float(value))


def dpoint_cmp(a: DPoint, b: DPoint) -> int:
    """Three-way comparison under the doubled-axis order."""
    ka, kb = a._key(), b._key()
    return (ka > kb) - (ka < kb)


def psi_upper(max_: float, min_: float) -> tuple[DPoint, float]:
    """Image of a phase-space point in the left half, at level ``max_``."""
    return Left(min_), max_


def psi_lower(max_: float, min_: float) -> tuple[DPoint, float]:
    """Image of a phase-space point in the right half, at level ``min_``."""
    return Right(max_), min_


@dataclass(frozen=True)
class DBarrier:
    """Region ``{(d, level) : d <=_D rightmost[level]}`` in ``D x R``."""

    rightmost: dict[float, DPoint] = field(default_factory=dict)

    def contains(self, d: DPoint, level: float) -> bool:
        edge = self.rightmost.get(level)
        return edge is not None and d <= edge

    def is_empty(self) -> bool:
        return not self.rightmost

    def levels(self) -> list[float]:
        return sorted(self.rightmost)

    def coordinates(self) -> list[float]:
        out = []
        for level, edge in self.rightmost.items():
            out.append(level)
            if math.isfinite(edge.value):
                out.append(edge.value)
        return out


def to_dbarrier(b: VhBarrier) -> DBarrier:
    """Translate a vh-barrier into its inverse-barrier form on ``D x R``."""
    out: dict[float, DPoint] = {}

    def extend(level, edge):
        if level not in out or out[level] < edge:
            out[level] = edge

    for x, d in b.v_lines:
        extend(x, Left(d))
    for y, r in b.h_lines:
        extend(y, Right(r))
    return DBarrier(out)


class TimeSpaceKind(Enum):
    ROOT = "root"
    INVERSE = "inverse"


@dataclass(frozen=True)
class TimeSpaceBarrier:
    """Per-level time thresholds for Root (``t >= threshold``) or Rost (``t <= threshold``) regions."""

    kind: TimeSpaceKind
    levels: tuple[float, ...] = ()
    thresholds: tuple[float, ...] = ()

    def __post_init__(self):
        levels = tuple(float(x) for x in self.levels)
        ths = tuple(float(t) for t in self.thresholds)
        if len(levels) != len(ths):
            raise ValueError("levels and thresholds differ in length")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("levels must be strictly increasing")
        if any(t < 0 or math.isnan(t) for t in ths):
            raise ValueError("thresholds must be non-negative")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "thresholds", ths)

    def threshold(self, level: float) -> float | None:
        for x, t in zip(self.levels, self.thresholds):
            if x == level:
                return t
        return None

    def contains(self, time: float, level: float) -> bool:
        t = self.threshold(level)
        if t is None:
            return False
        if self.kind is TimeSpaceKind.ROOT:
            return time >= t
        return time <= t

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "levels": list(self.levels),
            "thresholds": [t if math.isfinite(t) else "inf" for t in self.thresholds],
        }

    @classmethod
    def from_json(cls, doc) -> "TimeSpaceBarrier":
        if not isinstance(doc, dict) or set(doc) != {"kind", "levels", "thresholds"}:
            raise ParseError("time-space barrier needs exactly 'kind', 'levels', 'thresholds'")
        try:
            ths = [math.inf if t == "inf" else float(t) for t in doc["thresholds"]]
            return cls(TimeSpaceKind(doc["kind"]), tuple(doc["levels"]), tuple(ths))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"malformed time-space barrier: {exc}") from exc

