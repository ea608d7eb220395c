"""Checks and comparisons on stopped laws.

Extremum laws are read off the recorded (grid-level) extrema.  A path that
is not stopped at a new maximum has a true maximum strictly above its
recorded one, so ``P[max <= g]`` is exact at every grid level ``g``:
it collects the records below ``g`` plus records stopped exactly at a
maximum equal to ``g``.  Refining the grid (``extra_levels``) refines the
reported CDF without changing the stopped law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .barriers import VhBarrier, psi_lower, psi_upper, to_dbarrier, union
from .engine import (
    CriticalGrid,
    JointAtom,
    StoppedLaw,
    dbarrier_tables,
    exact_stopped_law,
    mc_stopped_law,
    perkins_tables,
    sample_event_paths,
    tables_from_predicate,
)
from .measures import DiscreteMeasure, moment, tv_distance
from .rules import MAX_MIN_RULES, HobsonPedersen, Perkins, should_stop

__all__ = [
    "AuxiliaryFunction",
    "CdfStep",
    "DominanceVerdict",
    "LoynesReport",
    "ObjectiveVector",
    "common_levels",
    "compare_rules",
    "dominance",
    "dpath_check",
    "duration_gap",
    "extrema_cdf",
    "joint_tv",
    "loynes_check",
    "monotonicity_audit",
    "objective_vector",
    "standard_battery",
    "verify_embedding",
]

DOMINANCE_TOL = 1e-9


def verify_embedding(law: StoppedLaw, mu: DiscreteMeasure) -> float:
    """Total variation between the endpoint law and ``mu``."""
    return tv_distance(law.endpoint_law(), mu)


def duration_gap(law: StoppedLaw, lam: DiscreteMeasure) -> float:
    """``E[tau] - (m2(endpoint law) - m2(lam))``; zero for integrable embeddings."""
    return law.expected_duration - (moment(law.endpoint_law(), 2) - moment(lam, 2))


def _level_merger(values, tol: float):
    """Map each value to the first member of its chain of neighbours within ``tol``."""
    rep: dict[float, float] = {}
    head = prev = None
    for v in sorted(set(values)):
        if prev is None or v - prev > tol:
            head = v
        rep[v] = head
        prev = v
    return rep


def joint_tv(a: StoppedLaw, b: StoppedLaw, coord_tol: float = 0.0) -> float:
    """Total variation between joint laws of (endpoint, max, min).

    Recorded levels closer than ``coord_tol`` are identified first, so two
    barriers that differ only by solver round-off compare as equal laws.
    """
    atoms = a.joint + b.joint
    rep = _level_merger([c for x in atoms for c in (x.endpoint, x.max, x.min)], coord_tol)
    acc: dict[tuple[float, float, float], float] = {}
    for sign, law in ((1.0, a), (-1.0, b)):
        for atom in law.joint:
            key = (rep[atom.endpoint], rep[atom.max], rep[atom.min])
            acc[key] = acc.get(key, 0.0) + sign * atom.mass
    return 0.5 * math.fsum(abs(v) for v in acc.values())


class Extremum(Enum):
    MAX = "max"
    MIN = "min"


@dataclass(frozen=True)
class CdfStep:
    """CDF known at ``levels``; evaluated as a right-continuous step function."""

    levels: tuple[float, ...]
    values: tuple[float, ...]

    def __call__(self, x: float) -> float:
        i = int(np.searchsorted(self.levels, x, side="right")) - 1
        return 0.0 if i < 0 else self.values[i]

    def on(self, levels) -> "CdfStep":
        return CdfStep(tuple(levels), tuple(self(x) for x in levels))

    def to_csv_rows(self):
        return [(format(x, ".17g"), format(v, ".17g")) for x, v in zip(self.levels, self.values)]


def extrema_cdf(law: StoppedLaw, which: Extremum | str) -> CdfStep:
    """``P[max <= g]`` or ``P[min <= g]`` at every level ``g`` of the law's grid."""
    which = Extremum(which)
    levels = sorted(set(law.grid) | {a.max for a in law.joint} | {a.min for a in law.joint})
    values = []
    for g in levels:
        if which is Extremum.MAX:
            mass = (a.mass for a in law.joint if a.max < g or (a.max == g and a.endpoint == g))
        else:
            mass = (a.mass for a in law.joint if a.min <= g)
        values.append(min(1.0, math.fsum(mass)))
    return CdfStep(tuple(levels), tuple(values))


@dataclass(frozen=True)
class DominanceVerdict:
    kind: str
    at: float | None = None

    EQUAL = "Equal"
    FIRST = "FirstSmaller"
    SECOND = "SecondSmaller"
    CROSSING = "Crossing"

    def __str__(self):
        return self.kind if self.at is None else f"{self.kind}({self.at!r})"

    def swapped(self) -> "DominanceVerdict":
        flip = {self.FIRST: self.SECOND, self.SECOND: self.FIRST}
        return DominanceVerdict(flip.get(self.kind, self.kind), self.at)


def dominance(a: CdfStep, b: CdfStep, tol: float = DOMINANCE_TOL) -> DominanceVerdict:
    """First-order dominance from CDFs: larger CDF means stochastically smaller."""
    levels = sorted(set(a.levels) | set(b.levels))
    diff = np.array([a(x) - b(x) for x in levels])
    if not len(levels) or np.max(np.abs(diff)) <= tol:
        return DominanceVerdict(DominanceVerdict.EQUAL)
    if np.all(diff >= -tol):
        return DominanceVerdict(DominanceVerdict.FIRST)
    if np.all(diff <= tol):
        return DominanceVerdict(DominanceVerdict.SECOND)
    pos = np.flatnonzero(diff > tol)
    neg = np.flatnonzero(diff < -tol)
    return DominanceVerdict(DominanceVerdict.CROSSING, float(levels[max(pos[0], neg[0])]))


@dataclass(frozen=True)
class AuxiliaryFunction:
    """Bounded, continuous, strictly increasing test function."""

    tag: str
    breakpoints: tuple[float, ...] = ()
    scale: float = 1.0

    def __post_init__(self):
        if self.tag not in ("tanh", "atan", "pl"):
            raise ValueError(f"unknown auxiliary function {self.tag!r}")
        if self.tag == "pl":
            bps = tuple(sorted(set(float(b) for b in self.breakpoints)))
            if len(bps) < 2:
                raise ValueError("piecewise-linear map needs at least two breakpoints")
            object.__setattr__(self, "breakpoints", bps)
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def scaled(self, c: float) -> "AuxiliaryFunction":
        return AuxiliaryFunction(self.tag, self.breakpoints, self.scale * c)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.tag == "tanh":
            y = np.tanh(x)
        elif self.tag == "atan":
            y = (2.0 / math.pi) * np.arctan(x)
        else:
            bps = np.array(self.breakpoints)
            k = len(bps)
            vals = np.arange(1, k + 1) / (k + 1)
            inner = np.interp(x, bps, vals)
            below = vals[0] * np.exp(np.minimum(x - bps[0], 0.0))
            above = 1.0 - (1.0 - vals[-1]) * np.exp(-np.maximum(x - bps[-1], 0.0))
            y = np.where(x < bps[0], below, np.where(x > bps[-1], above, inner))
        return self.scale * y

    def __str__(self):
        return self.tag if self.scale == 1.0 else f"{self.scale:g}*{self.tag}"


def standard_battery(levels) -> list[AuxiliaryFunction]:
    """``tanh``, scaled ``atan`` and a piecewise-linear map through ``levels``."""
    levels = sorted(set(float(x) for x in levels))
    if len(levels) < 2:
        levels = [levels[0] - 1.0, levels[0] + 1.0] if levels else [-1.0, 1.0]
    return [AuxiliaryFunction("tanh"), AuxiliaryFunction("atan"), AuxiliaryFunction("pl", tuple(levels))]


@dataclass(frozen=True)
class ObjectiveVector:
    """``(E phi(max), -E phi(min), -E phi(max) X^2, -E phi(-min) X^2)``, minimized in order."""

    g1: float
    g2: float
    g3: float
    g4: float

    def as_tuple(self):
        return (self.g1, self.g2, self.g3, self.g4)

    def lex_compare(self, other: "ObjectiveVector", tol: float = DOMINANCE_TOL) -> int:
        """-1 if ``self`` is lexicographically smaller, 1 if larger, 0 if tied."""
        for a, b in zip(self.as_tuple(), other.as_tuple()):
            if a < b - tol:
                return -1
            if a > b + tol:
                return 1
        return 0


def objective_vector(law: StoppedLaw, phi: AuxiliaryFunction) -> ObjectiveVector:
    w = np.array([a.mass for a in law.joint])
    e = np.array([a.endpoint for a in law.joint])
    mx = np.array([a.max for a in law.joint])
    mn = np.array([a.min for a in law.joint])

    def total(v):
        return math.fsum((w * v).tolist())

    return ObjectiveVector(
        total(phi(mx)),
        -total(phi(mn)),
        -total(phi(mx) * e**2),
        -total(phi(-mn) * e**2),
    )


def monotonicity_audit(law: StoppedLaw) -> list[JointAtom]:
    """Positive-time records that stopped strictly inside their range."""
    return [
        a for a in law.joint
        if a.mass > 0 and a.max != a.min and a.endpoint != a.max and a.endpoint != a.min
    ]


# ---------------------------------------------------------------- barrier checks


@dataclass
class LoynesReport:
    tv_r_union: float
    tv_s_union: float
    tv_r_s: float
    joint_tv_r_s: float | None
    pathwise_violations: int
    n_paths: int
    union_tv_to_mu: float | None = None

    def passed(self, tol: float = 1e-9) -> bool:
        ok = self.pathwise_violations == 0
        if self.joint_tv_r_s is not None:
            ok &= self.joint_tv_r_s <= tol
        return ok

    def to_json(self) -> dict:
        return dict(self.__dict__)


def common_levels(*sources, midpoints: bool = True) -> list[float]:
    """Union of coordinates (measures, barriers, rules), optionally with midpoints."""
    pts: set[float] = set()
    for src in sources:
        if isinstance(src, DiscreteMeasure):
            pts.update(src.locations)
        elif hasattr(src, "coordinates"):
            pts.update(c for c in src.coordinates() if math.isfinite(c))
        else:
            pts.update(float(x) for x in src)
    levels = sorted(pts)
    if midpoints:
        levels = sorted(set(levels) | {0.5 * (a + b) for a, b in zip(levels, levels[1:])})
    return levels


def _pathwise_hits(grid, paths, barrier: VhBarrier) -> np.ndarray:
    b = barrier.map_coordinates(grid.snap)
    return paths.first_hit(perkins_tables(grid, b))


def loynes_check(
    R: VhBarrier,
    S: VhBarrier,
    lam: DiscreteMeasure,
    nu: DiscreteMeasure,
    *,
    mu: DiscreteMeasure | None = None,
    n_paths: int = 10_000,
    seed: int = 0,
) -> LoynesReport:
    """Compare two barriers with their union, in law and path by path."""
    extra = common_levels(R, S, lam, nu, midpoints=False)
    laws = [exact_stopped_law(Perkins(b, nu), lam, extra) for b in (R, S, union(R, S))]
    ends = [law.endpoint_law() for law in laws]
    grid = CriticalGrid(extra)
    paths = sample_event_paths(grid, lam, n_paths, seed)
    hits = [_pathwise_hits(grid, paths, b) for b in (R, S, union(R, S))]
    big = grid.levels.size + 1
    t_r, t_s, t_u = (np.where(h < 0, big, h) for h in hits)
    violations = int(np.count_nonzero(t_u != np.minimum(t_r, t_s)))
    same_target = tv_distance(ends[0], ends[1]) <= 1e-9
    return LoynesReport(
        tv_distance(ends[0], ends[2]),
        tv_distance(ends[1], ends[2]),
        tv_distance(ends[0], ends[1]),
        joint_tv(laws[0], laws[1], coord_tol=1e-9) if same_target else None,
        violations,
        n_paths,
        tv_distance(ends[2], mu) if mu is not None else None,
    )


def dpath_check(barrier: VhBarrier, lam: DiscreteMeasure, *, n_paths: int = 10_000, seed: int = 0) -> int:
    """Count paths where the barrier hit differs from the earlier of its two ``D x R`` hits."""
    grid = CriticalGrid(common_levels(barrier, lam, midpoints=False))
    b = barrier.map_coordinates(grid.snap)
    db = to_dbarrier(b)
    paths = sample_event_paths(grid, lam, n_paths, seed)
    direct = tables_from_predicate(grid, lambda s: should_stop(Perkins(b), s), interior=False)
    hits = [
        paths.first_hit(t)
        for t in (dbarrier_tables(grid, db, (psi_upper,)), dbarrier_tables(grid, db, (psi_lower,)), direct)
    ]
    big = grid.levels.size + 1
    t_up, t_lo, t_r = (np.where(h < 0, big, h) for h in hits)
    return int(np.count_nonzero(t_r != np.minimum(t_up, t_lo)))


# ---------------------------------------------------------------- rule comparison


@dataclass
class Comparison:
    names: list[str]
    laws: dict[str, StoppedLaw]
    max_matrix: list[list[DominanceVerdict]]
    min_matrix: list[list[DominanceVerdict]]
    objectives: dict[str, dict[str, ObjectiveVector]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "rules": self.names,
            "max_dominance": [[str(v) for v in row] for row in self.max_matrix],
            "min_dominance": [[str(v) for v in row] for row in self.min_matrix],
            "objectives": {
                name: {phi: list(vec.as_tuple()) for phi, vec in per.items()}
                for name, per in self.objectives.items()
            },
            "expected_duration": {name: law.expected_duration for name, law in self.laws.items()},
        }


def compare_rules(rules: dict, lam: DiscreteMeasure, *, mc_paths: int = 10**6, seed: int = 42,
                  dt: float = 1e-4, threads: int = 1) -> Comparison:
    """Stopped laws of several rules on a shared refined grid, compared pairwise."""
    extra = common_levels(lam, *rules.values())
    laws = {}
    for name, rule in rules.items():
        if isinstance(rule, MAX_MIN_RULES) and not isinstance(rule, HobsonPedersen):
            laws[name] = exact_stopped_law(rule, lam, extra)
        else:
            laws[name] = mc_stopped_law(rule, lam, mc_paths, seed, dt=dt, extra_levels=extra, threads=threads)
    names = list(rules)
    cdf_max = {n: extrema_cdf(laws[n], Extremum.MAX) for n in names}
    cdf_min = {n: extrema_cdf(laws[n], Extremum.MIN) for n in names}
    max_m = [[dominance(cdf_max[a], cdf_max[b]) for b in names] for a in names]
    min_m = [[dominance(cdf_min[a], cdf_min[b]) for b in names] for a in names]
    battery = standard_battery(extra)
    objectives = {n: {str(phi): objective_vector(laws[n], phi) for phi in battery} for n in names}
    return Comparison(names, laws, max_m, min_m, objectives)
