"""Exact and Monte Carlo stopped laws for barrier rules.

Rules that only look at (position, running max, running min) stop at
first passages of finitely many levels: barrier coordinates and atoms.
Between two passages Brownian motion leaves an interval through one of its
ends with gambler's-ruin probabilities, so the embedded chain over the
critical grid is exact.  The chain state after an event is the pair of
recorded extrema plus which of the two the path currently sits on.

Recorded extrema are grid levels.  After a passage the true maximum lies
strictly between the recorded one and the next level up (likewise for the
minimum), so hit tests are evaluated at the midpoint of that gap; every
barrier coordinate is a grid level, hence any interior point gives the same
answer.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .barriers import DBarrier, VhBarrier, psi_lower, psi_upper
from .errors import MassLeak, NonTerminating, PathBudgetExceeded
from .measures import DiscreteMeasure, TOL
from .rules import (
    HobsonPedersen,
    Perkins,
    Root,
    Rost,
    StoppingRule,
    should_stop,
)
from .state import Event, ExtremaState

__all__ = [
    "CriticalGrid",
    "Event",
    "ExtremaState",
    "JointAtom",
    "StoppedLaw",
    "dbarrier_stopped_law",
    "exact_stopped_law",
    "exit_split",
    "mc_stopped_law",
    "sample_event_paths",
]

DEFAULT_CHUNK = 1 << 15


def exit_split(x: float, a: float, b: float) -> tuple[float, float, float]:
    """Exit of ``(a, b)`` from ``x``: ``(p_down, p_up, expected exit time)``."""
    if not a < b:
        raise ValueError(f"degenerate interval ({a}, {b})")
    if not a < x < b:
        raise ValueError(f"start {x} outside ({a}, {b})")
    p_up = (x - a) / (b - a)
    return 1.0 - p_up, p_up, (x - a) * (b - x)


class CriticalGrid:
    """Sorted, deduplicated levels at which the chain can change state."""

    def __init__(self, values, tol: float = TOL):
        vals = sorted(float(v) for v in values if math.isfinite(v))
        levels: list[float] = []
        for v in vals:
            if not levels or v - levels[-1] > tol:
                levels.append(v)
        self.tol = tol
        self.levels = np.array(levels, dtype=float)
        n = len(levels)
        above = np.empty(n)
        below = np.empty(n)
        if n:
            above[:-1] = 0.5 * (self.levels[:-1] + self.levels[1:])
            above[-1] = self.levels[-1] + 1.0
            below[1:] = above[:-1]
            below[0] = self.levels[0] - 1.0
        self.rep_above = above
        self.rep_below = below
        self._lookup = {v: i for i, v in enumerate(levels)}

    def __len__(self):
        return len(self.levels)

    def index(self, x: float) -> int:
        hit = self._lookup.get(x)
        if hit is not None:
            return hit
        i = int(np.searchsorted(self.levels, x))
        best = None
        for j in (i - 1, i):
            if 0 <= j < len(self.levels) and abs(self.levels[j] - x) <= self.tol:
                best = j
        if best is None:
            raise KeyError(f"{x!r} is not a grid level")
        return best

    def snap(self, x: float) -> float:
        return float(self.levels[self.index(x)])

    @classmethod
    def for_rule(cls, rule, lam: DiscreteMeasure, extra=()):
        return cls(list(lam.locations) + list(rule.coordinates()) + list(extra))


@dataclass(frozen=True)
class JointAtom:
    endpoint: float
    max: float
    min: float
    mass: float


@dataclass(frozen=True)
class StoppedLaw:
    """Joint law of (endpoint, recorded max, recorded min) plus ``E[tau]``.

    Recorded extrema are grid levels (see module docstring).  Records with
    ``max == min`` are stops at time zero.
    """

    joint: tuple[JointAtom, ...]
    expected_duration: float
    atom_mass_at_zero: DiscreteMeasure = field(default_factory=DiscreteMeasure)
    grid: tuple[float, ...] = ()
    n_paths: int | None = None

    def total_mass(self) -> float:
        return math.fsum(a.mass for a in self.joint)

    def endpoint_law(self) -> DiscreteMeasure:
        return DiscreteMeasure.from_pairs((a.endpoint, a.mass) for a in self.joint)

    def max_law(self) -> DiscreteMeasure:
        return DiscreteMeasure.from_pairs((a.max, a.mass) for a in self.joint)

    def min_law(self) -> DiscreteMeasure:
        return DiscreteMeasure.from_pairs((a.min, a.mass) for a in self.joint)

    def reflect(self) -> "StoppedLaw":
        return StoppedLaw(
            tuple(sorted(
                (JointAtom(0.0 - a.endpoint, 0.0 - a.min, 0.0 - a.max, a.mass) for a in self.joint),
                key=lambda a: (a.endpoint, a.max, a.min),
            )),
            self.expected_duration,
            self.atom_mass_at_zero.reflect(),
            tuple(sorted(0.0 - g for g in self.grid)),
            self.n_paths,
        )

    def to_json(self) -> dict:
        doc = {
            "joint": [
                {"endpoint": a.endpoint, "max": a.max, "min": a.min, "mass": a.mass} for a in self.joint
            ],
            "expected_duration": self.expected_duration,
            "atom_mass_at_zero": self.atom_mass_at_zero.to_json(),
            "grid": list(self.grid),
        }
        if self.n_paths is not None:
            doc["n_paths"] = self.n_paths
        return doc

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["endpoint", "max", "min", "mass"])
        for a in self.joint:
            w.writerow([format(v, ".17g") for v in (a.endpoint, a.max, a.min, a.mass)])
        return buf.getvalue()


# ---------------------------------------------------------------- stop tables


@dataclass
class StopTables:
    """Boolean stop decisions indexed by grid positions.

    ``new_max[j, m]``: arriving at level ``j`` as a new maximum with recorded
    minimum ``m``.  ``new_min[M, j]``: arriving at ``j`` as a new minimum with
    recorded maximum ``M``.  ``interior[k, M, m]`` (optional): arriving at
    ``k`` strictly inside the recorded range.
    """

    start: np.ndarray
    new_max: np.ndarray
    new_min: np.ndarray
    interior: np.ndarray | None = None


def tables_from_predicate(grid: CriticalGrid, pred, interior: bool = True) -> StopTables:
    """Evaluate ``pred(ExtremaState)`` at every chain event on ``grid``."""
    g, up, dn = grid.levels.tolist(), grid.rep_above.tolist(), grid.rep_below.tolist()
    n = len(g)
    start = np.array([pred(ExtremaState(x, x, x, Event.START)) for x in g], dtype=bool)
    new_max = np.zeros((n, n), dtype=bool)
    new_min = np.zeros((n, n), dtype=bool)
    for j in range(n):
        for m in range(j):
            new_max[j, m] = pred(ExtremaState(g[j], g[j], dn[m], Event.NEW_MAX))
    for M in range(n):
        for j in range(M):
            new_min[M, j] = pred(ExtremaState(g[j], up[M], g[j], Event.NEW_MIN))
    inner = None
    if interior:
        inner = np.zeros((n, n, n), dtype=bool)
        for M in range(n):
            for m in range(M + 1):
                for k in range(m, M + 1):
                    inner[k, M, m] = pred(ExtremaState(g[k], up[M], dn[m], Event.INTERIOR))
    return StopTables(start, new_max, new_min, inner)


def perkins_tables(grid: CriticalGrid, barrier: VhBarrier) -> StopTables:
    """Vectorized equivalent of ``tables_from_predicate`` for a Perkins rule."""
    n = len(grid)
    up, dn = grid.rep_above, grid.rep_below
    new_max = np.zeros((n, n), dtype=bool)
    new_min = np.zeros((n, n), dtype=bool)
    for x, d in barrier.v_lines:
        new_max[grid.index(x), :] |= (dn >= d) & (dn <= x)
    for y, r in barrier.h_lines:
        iy = grid.index(y)
        new_min[:, iy] |= (up >= y) & (up <= r)
        new_max[iy, :] |= dn <= y
    return StopTables(np.zeros(n, dtype=bool), np.tril(new_max, -1), np.tril(new_min, -1))


def dbarrier_tables(grid: CriticalGrid, db: DBarrier, images=(psi_upper, psi_lower)) -> StopTables:
    """Stop tables routed through the embeddings into ``D x R``.

    By default every event is tested in both halves: the left image at
    level ``max`` and the right image at level ``min``.  Passing a single
    image gives the hitting rule of that half alone.
    """
    g, up, dn = grid.levels.tolist(), grid.rep_above.tolist(), grid.rep_below.tolist()
    n = len(g)

    def hit(mx, mn):
        return any(db.contains(*image(mx, mn)) for image in images)

    new_max = np.zeros((n, n), dtype=bool)
    new_min = np.zeros((n, n), dtype=bool)
    for j in range(n):
        for m in range(j):
            new_max[j, m] = hit(g[j], dn[m])
    for M in range(n):
        for j in range(M):
            new_min[M, j] = hit(up[M], g[j])
    return StopTables(np.zeros(n, dtype=bool), new_max, new_min)


# ---------------------------------------------------------------- event chain


@dataclass
class EventChain:
    """Transition structure of the embedded chain over ``(M, m, side)``.

    ``side`` is 0 when the path sits on its maximum, 1 on its minimum.  From
    each state the path leaves through ``lo`` (below) or ``hi`` (above);
    ``-1`` / ``n`` mark an unbounded side.
    """

    grid: CriticalGrid
    tables: StopTables
    lo: np.ndarray
    hi: np.ndarray
    p_up: np.ndarray
    e_time: np.ndarray
    lo_stop: np.ndarray
    hi_stop: np.ndarray

    @property
    def n(self) -> int:
        return len(self.grid)

    def bounded(self) -> np.ndarray:
        return (self.lo >= 0) & (self.hi < self.n)


def build_chain(grid: CriticalGrid, tables: StopTables) -> EventChain:
    n = len(grid)
    g = grid.levels
    M = np.arange(n)[:, None, None] * np.ones((1, n, 2), dtype=int)
    m = np.arange(n)[None, :, None] * np.ones((n, 1, 2), dtype=int)
    side = np.arange(2)[None, None, :] * np.ones((n, n, 1), dtype=int)
    lo = m - 1
    hi = M + 1
    lo_stop = np.zeros((n, n, 2), dtype=bool)
    hi_stop = np.zeros((n, n, 2), dtype=bool)
    inner = tables.interior
    if inner is not None:
        for Mi in range(n):
            for mi in range(Mi + 1):
                for s in (0, 1):
                    p = Mi if s == 0 else mi
                    below = [k for k in range(p - 1, mi - 1, -1) if inner[k, Mi, mi]]
                    above = [k for k in range(p + 1, Mi + 1) if inner[k, Mi, mi]]
                    if below:
                        lo[Mi, mi, s] = below[0]
                        lo_stop[Mi, mi, s] = True
                    if above:
                        hi[Mi, mi, s] = above[0]
                        hi_stop[Mi, mi, s] = True
    plain_lo = ~lo_stop & (lo >= 0)
    lo_stop[plain_lo] = tables.new_min[M[plain_lo], lo[plain_lo]]
    plain_hi = ~hi_stop & (hi < n)
    hi_stop[plain_hi] = tables.new_max[hi[plain_hi], m[plain_hi]]
    pos = np.where(side == 0, M, m)
    x = g[pos] if n else np.zeros((n, n, 2))
    ok = (lo >= 0) & (hi < n)
    a = np.where(ok, g[np.clip(lo, 0, max(n - 1, 0))], 0.0) if n else x
    b = np.where(ok, g[np.clip(hi, 0, max(n - 1, 0))], 1.0) if n else x
    with np.errstate(invalid="ignore", divide="ignore"):
        p_up = np.where(ok, (x - a) / np.where(ok, b - a, 1.0), np.nan)
        e_time = np.where(ok, (x - a) * (b - x), np.inf)
    return EventChain(grid, tables, lo, hi, p_up, e_time, lo_stop, hi_stop)


def _start_masses(rule, lam: DiscreteMeasure):
    """Split ``lam`` into time-zero stops and mass that starts running."""
    if isinstance(rule, (Perkins, Rost)):
        nu = rule.atom_stop
        for x, p in nu:
            if p > lam.mass_at(x) + TOL:
                raise ValueError(f"atom_stop exceeds the starting law at {x}")
        running = lam.minus(nu)
        return nu, running
    return DiscreteMeasure(), lam


def _tables_for(rule, grid: CriticalGrid, aux: float = 0.0) -> StopTables:
    if isinstance(rule, Perkins):
        return perkins_tables(grid, rule.barrier)
    return tables_from_predicate(grid, lambda s: should_stop(rule, s, aux))


def _snapped(rule, grid: CriticalGrid):
    return rule.map_coordinates(grid.snap)


def _neighbour_steps(grid: CriticalGrid, tables: StopTables):
    """Transition lookup for rules that only stop at new extrema.

    Equivalent to :func:`build_chain` without interior stops, but computed
    on demand; the exact DP is dominated by this when calibrating.
    """
    g = grid.levels.tolist()
    n = len(g)
    new_max, new_min = tables.new_max.tolist(), tables.new_min.tolist()

    def step(M, m, s):
        a, b = m - 1, M + 1
        if a < 0 or b >= n:
            return a, b, None, None, False, False
        x = g[M] if s == 0 else g[m]
        ga, gb = g[a], g[b]
        return a, b, (x - ga) / (gb - ga), (x - ga) * (gb - x), new_min[M][a], new_max[b][m]

    return step


def _chain_steps(chain: EventChain):
    lo, hi = chain.lo.tolist(), chain.hi.tolist()
    p_up, e_time = chain.p_up.tolist(), chain.e_time.tolist()
    lo_stop, hi_stop = chain.lo_stop.tolist(), chain.hi_stop.tolist()

    def step(M, m, s):
        return lo[M][m][s], hi[M][m][s], p_up[M][m][s], e_time[M][m][s], lo_stop[M][m][s], hi_stop[M][m][s]

    return step


def _propagate(grid: CriticalGrid, tables: StopTables, zero: DiscreteMeasure, running: DiscreteMeasure) -> StoppedLaw:
    n = len(grid)
    g = grid.levels.tolist()
    if tables.interior is None:
        step = _neighbour_steps(grid, tables)
    else:
        step = _chain_steps(build_chain(grid, tables))
    start_stop = tables.start.tolist()

    records: dict[tuple[int, int, int], float] = defaultdict(float)
    zero_pairs = []
    for x, p in zero:
        i = grid.index(x)
        records[(i, i, i)] += p
        zero_pairs.append((g[i], p))
    mass = [[[0.0, 0.0] for _ in range(n)] for _ in range(n)]
    for x, p in running:
        i = grid.index(x)
        if start_stop[i]:
            records[(i, i, i)] += p
            zero_pairs.append((g[i], p))
        else:
            mass[i][i][0] += p

    durations = []
    for span in range(n):
        for m in range(n - span):
            M = m + span
            for s in (0, 1):
                w = mass[M][m][s]
                if w <= 0.0:
                    continue
                a, b, pu, et, a_stop, b_stop = step(M, m, s)
                if a < 0 or b >= n:
                    pos = g[M] if s == 0 else g[m]
                    raise NonTerminating(
                        f"mass {w:.3g} at position {pos} with extrema [{g[m]}, {g[M]}] "
                        "has no barrier on one side",
                        state=(pos, g[M], g[m]),
                    )
                durations.append(w * et)
                wu, wd = w * pu, w * (1.0 - pu)
                if wu > 0.0:
                    if b_stop:
                        records[(b, max(M, b), m)] += wu
                    else:
                        mass[b][m][0] += wu
                if wd > 0.0:
                    if a_stop:
                        records[(a, M, min(m, a))] += wd
                    else:
                        mass[M][a][1] += wd

    joint = tuple(
        JointAtom(g[e], g[M], g[m], w) for (e, M, m), w in sorted(records.items()) if w > 0.0
    )
    law = StoppedLaw(joint, math.fsum(durations), DiscreteMeasure.from_pairs(zero_pairs), tuple(g))
    total = law.total_mass()
    if abs(total - 1.0) > 1e-9:
        raise MassLeak(f"stopped mass sums to {total!r}")
    return law


def exact_stopped_law(rule: StoppingRule, lam: DiscreteMeasure, extra_levels=()) -> StoppedLaw:
    """Exact stopped law of a max-min rule started from ``lam``.

    ``extra_levels`` refines the grid; the law is unchanged but extrema are
    recorded at the finer resolution.
    """
    if isinstance(rule, (Root, Rost, HobsonPedersen)):
        raise TypeError(f"{type(rule).__name__} rules are evaluated by Monte Carlo only")
    if not lam.is_probability():
        raise ValueError("lam must be a probability measure")
    if isinstance(rule, Perkins) and rule.mirrored:
        plain = Perkins(rule.barrier, rule.atom_stop)
        return exact_stopped_law(plain, lam.reflect(), [-x for x in extra_levels]).reflect()
    grid = CriticalGrid.for_rule(rule, lam, extra_levels)
    rule = _snapped(rule, grid)
    zero, running = _start_masses(rule, lam)
    return _propagate(grid, _tables_for(rule, grid), zero, running)


def dbarrier_stopped_law(
    db: DBarrier, lam: DiscreteMeasure, nu: DiscreteMeasure, extra_levels=()
) -> StoppedLaw:
    """Same chain as :func:`exact_stopped_law`, hit tests done in ``D x R``."""
    grid = CriticalGrid(list(lam.locations) + db.coordinates() + list(nu.locations) + list(extra_levels))
    snapped = DBarrier({
        grid.snap(level): type(edge)(edge.side, grid.snap(edge.value) if math.isfinite(edge.value) else edge.value)
        for level, edge in db.rightmost.items()
    })
    zero, running = _start_masses(Perkins(VhBarrier(), nu), lam)
    return _propagate(grid, dbarrier_tables(grid, snapped), zero, running)


# ---------------------------------------------------------------- Monte Carlo


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _chunks(n_paths: int, chunk: int):
    return [(i, min(chunk, n_paths - i * chunk)) for i in range((n_paths + chunk - 1) // chunk)]


def _categorical(u: np.ndarray, weights) -> np.ndarray:
    cdf = np.cumsum(np.asarray(weights, dtype=float))
    cdf /= cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)


def _run_chain_chunk(chains, start_idx, start_stopped, chain_of_path, rng):
    """Walk every path of one chunk through its chain until it stops."""
    n = chains[0].n
    lo = np.stack([c.lo for c in chains])
    hi = np.stack([c.hi for c in chains])
    p_up = np.stack([c.p_up for c in chains])
    e_time = np.stack([c.e_time for c in chains])
    lo_stop = np.stack([c.lo_stop for c in chains])
    hi_stop = np.stack([c.hi_stop for c in chains])
    start = np.stack([c.tables.start for c in chains])

    size = len(start_idx)
    M = start_idx.copy()
    m = start_idx.copy()
    side = np.zeros(size, dtype=int)
    e = np.full(size, -1)
    dur = np.zeros(size)
    done = start_stopped | start[chain_of_path, start_idx]
    e[done] = start_idx[done]
    alive = np.flatnonzero(~done)
    while alive.size:
        c, Mi, mi, si = chain_of_path[alive], M[alive], m[alive], side[alive]
        a, b = lo[c, Mi, mi, si], hi[c, Mi, mi, si]
        if np.any((a < 0) | (b >= n)):
            raise NonTerminating("a simulated path left the critical grid without being stopped")
        dur[alive] += e_time[c, Mi, mi, si]
        up = rng.random(alive.size) < p_up[c, Mi, mi, si]
        stop = np.where(up, hi_stop[c, Mi, mi, si], lo_stop[c, Mi, mi, si])
        level = np.where(up, b, a)
        newM = np.where(up, np.maximum(Mi, b), Mi)
        newm = np.where(up, mi, np.minimum(mi, a))
        M[alive], m[alive], side[alive] = newM, newm, np.where(up, 0, 1)
        e[alive[stop]] = level[stop]
        alive = alive[~stop]
    return e, M, m, dur


def _mc_chain(rule, lam, n_paths, seed, extra_levels, threads, chunk):
    mirrored = isinstance(rule, Perkins) and rule.mirrored
    if mirrored:
        rule = Perkins(rule.barrier, rule.atom_stop)
        lam = lam.reflect()
        extra_levels = [-x for x in extra_levels]
    grid = CriticalGrid.for_rule(rule, lam, extra_levels)
    rule = _snapped(rule, grid)
    zero, running = _start_masses(rule, lam)
    if isinstance(rule, HobsonPedersen):
        chains = [build_chain(grid, _tables_for(rule, grid, gv)) for gv in rule.G.locations]
        g_weights = rule.G.masses
    else:
        chains = [build_chain(grid, _tables_for(rule, grid))]
        g_weights = (1.0,)
    cats = [(grid.index(x), True, p) for x, p in zero] + [(grid.index(x), False, p) for x, p in running]
    cat_idx = np.array([c[0] for c in cats])
    cat_stop = np.array([c[1] for c in cats])
    cat_w = [c[2] for c in cats]

    def work(item):
        ci, size = item
        rng = _chunk_rng(seed, ci)
        k = _categorical(rng.random(size), cat_w)
        which = _categorical(rng.random(size), g_weights) if len(chains) > 1 else np.zeros(size, dtype=int)
        return _run_chain_chunk(chains, cat_idx[k], cat_stop[k], which, rng)

    items = _chunks(n_paths, chunk)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, items))
    else:
        results = [work(it) for it in items]
    law = _law_from_samples(grid, results, n_paths, zero_mask_from=lambda e, M, m: M == m)
    return law.reflect() if mirrored else law


def _law_from_samples(grid, results, n_paths, zero_mask_from):
    n = len(grid)
    g = grid.levels
    codes = np.concatenate([(e * n + M) * n + m for e, M, m, _ in results])
    uniq, counts = np.unique(codes, return_counts=True)
    joint = []
    zero = []
    for code, cnt in zip(uniq.tolist(), counts.tolist()):
        e, rest = divmod(code, n * n)
        M, m = divmod(rest, n)
        joint.append(JointAtom(float(g[e]), float(g[M]), float(g[m]), cnt / n_paths))
        if zero_mask_from(e, M, m):
            zero.append((float(g[e]), cnt / n_paths))
    duration = math.fsum(float(np.sum(r[3])) for r in results) / n_paths
    return StoppedLaw(tuple(joint), duration, DiscreteMeasure.from_pairs(zero), tuple(g.tolist()), n_paths)


def _mc_time_space(rule, lam, n_paths, seed, dt, max_steps, extra_levels, threads, chunk):
    barrier = rule.barrier
    levels = np.array(barrier.levels)
    ths = np.array(barrier.thresholds)
    is_root = isinstance(rule, Root)
    grid = CriticalGrid.for_rule(rule, lam, extra_levels)
    g = grid.levels
    zero, running = _start_masses(rule, lam)
    cats = [(x, True, p) for x, p in zero] + [(x, False, p) for x, p in running]
    cat_x = np.array([c[0] for c in cats])
    cat_stop = np.array([c[1] for c in cats])
    cat_w = [c[2] for c in cats]
    sq = math.sqrt(dt)

    def work(item):
        ci, size = item
        rng = _chunk_rng(seed, ci)
        k = _categorical(rng.random(size), cat_w)
        B = cat_x[k].astype(float)
        hi = B.copy()
        lo_ = B.copy()
        end = np.full(size, np.nan)
        t_stop = np.zeros(size)
        stopped = cat_stop[k].copy()
        end[stopped] = B[stopped]
        alive = np.flatnonzero(~stopped)
        step = 0
        while alive.size:
            step += 1
            if step > max_steps:
                raise PathBudgetExceeded(f"{alive.size} paths still running after {max_steps} steps")
            t = step * dt
            old = B[alive]
            new = old + sq * rng.standard_normal(alive.size)
            i_old = np.searchsorted(levels, old, side="right")
            i_new = np.searchsorted(levels, new, side="right")
            hit = np.zeros(alive.size, dtype=bool)
            lvl = np.full(alive.size, np.nan)
            n_cross = np.abs(i_new - i_old)
            for off in range(int(n_cross.max()) if n_cross.size else 0):
                upward = i_new > i_old
                j = np.where(upward, i_old + off, i_old - 1 - off)
                valid = (off < n_cross) & ~hit
                jj = np.clip(j, 0, len(levels) - 1)
                th = ths[jj]
                ok = valid & ((t >= th) if is_root else (t <= th))
                lvl[ok] = levels[jj[ok]]
                hit |= ok
            B[alive] = np.where(hit, lvl, new)
            hi[alive] = np.maximum(hi[alive], B[alive])
            lo_[alive] = np.minimum(lo_[alive], B[alive])
            end[alive[hit]] = lvl[hit]
            t_stop[alive[hit]] = t
            alive = alive[~hit]
        e = np.array([grid.index(x) for x in end]) if size else np.zeros(0, dtype=int)
        M = np.searchsorted(g, hi + grid.tol, side="right") - 1
        m = np.searchsorted(g, lo_ - grid.tol, side="left")
        return e, M, m, t_stop

    items = _chunks(n_paths, chunk)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, items))
    else:
        results = [work(it) for it in items]
    return _law_from_samples(grid, results, n_paths, zero_mask_from=lambda e, M, m: M == m)


def mc_stopped_law(
    rule: StoppingRule,
    lam: DiscreteMeasure,
    n_paths: int,
    seed: int,
    *,
    dt: float = 1e-4,
    max_steps: int = 10**7,
    extra_levels=(),
    threads: int = 1,
    chunk: int = DEFAULT_CHUNK,
) -> StoppedLaw:
    """Monte Carlo estimate of the stopped law.

    Max-min rules are sampled on the exact event chain, so only sampling
    noise remains.  Root and Rost use Gaussian steps of size ``dt`` and stop
    at the first level crossing inside their region.  Paths are split into
    fixed chunks with their own seed-derived streams, so results do not
    depend on ``threads``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    if not lam.is_probability():
        raise ValueError("lam must be a probability measure")
    if isinstance(rule, (Root, Rost)):
        return _mc_time_space(rule, lam, n_paths, seed, dt, max_steps, extra_levels, threads, chunk)
    return _mc_chain(rule, lam, n_paths, seed, extra_levels, threads, chunk)


# ---------------------------------------------------------------- shared paths


@dataclass
class EventPaths:
    """Skeletons of free Brownian paths observed at grid passages.

    Row ``i`` holds the chain states of path ``i`` after each event; column 0
    is the start.  ``-1`` pads paths that have left the grid.
    """

    grid: CriticalGrid
    M: np.ndarray
    m: np.ndarray
    side: np.ndarray
    times: np.ndarray

    def first_hit(self, tables: StopTables) -> np.ndarray:
        """Event index at which ``tables`` first stop each path (``-1`` if never)."""
        valid = self.M >= 0
        Mi = np.where(valid, self.M, 0)
        mi = np.where(valid, self.m, 0)
        hit = np.where(self.side == 0, tables.new_max[Mi, mi], tables.new_min[Mi, mi])
        hit[:, 0] = tables.start[Mi[:, 0]]
        hit &= valid
        return np.where(hit.any(axis=1), hit.argmax(axis=1), -1)


def sample_event_paths(grid: CriticalGrid, lam: DiscreteMeasure, n_paths: int, seed: int) -> EventPaths:
    """Draw ``n_paths`` free paths on ``grid`` to drive several rules at once."""
    n = len(grid)
    g = grid.levels
    rng = _chunk_rng(seed, 0)
    starts = _categorical(rng.random(n_paths), lam.masses)
    idx = np.array([grid.index(x) for x in lam.locations])[starts]
    Ms = np.full((n_paths, n), -1)
    ms = np.full((n_paths, n), -1)
    sides = np.zeros((n_paths, n), dtype=int)
    times = np.zeros((n_paths, n))
    M, m = idx.copy(), idx.copy()
    side = np.zeros(n_paths, dtype=int)
    Ms[:, 0], ms[:, 0] = M, m
    alive = np.ones(n_paths, dtype=bool)
    for j in range(1, n):
        alive &= (M < n - 1) & (m > 0)
        if not alive.any():
            break
        a_idx = np.clip(m - 1, 0, n - 1)
        b_idx = np.clip(M + 1, 0, n - 1)
        x = np.where(side == 0, g[M], g[m])
        a, b = g[a_idx], g[b_idx]
        p_up = np.where(alive, (x - a) / np.where(alive, b - a, 1.0), 0.0)
        up = rng.random(n_paths) < p_up
        times[:, j] = times[:, j - 1] + np.where(alive, (x - a) * (b - x), 0.0)
        M = np.where(alive & up, M + 1, M)
        m = np.where(alive & ~up, m - 1, m)
        side = np.where(alive, np.where(up, 0, 1), side)
        Ms[alive, j], ms[alive, j], sides[alive, j] = M[alive], m[alive], side[alive]
    return EventPaths(grid, Ms, ms, sides, times)
