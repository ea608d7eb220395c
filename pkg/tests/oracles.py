"""Independent reference computations used to check the package."""

from __future__ import annotations

import math

import numpy as np

from perkins_sep.measures import DiscreteMeasure
from perkins_sep.rules import should_stop
from perkins_sep.state import Event, ExtremaState


def gamblers_ruin_up(x, a, b):
    return (x - a) / (b - a)


def refined_levels(points):
    pts = []
    for p in sorted(float(p) for p in points):
        if not pts or p - pts[-1] > 1e-12:
            pts.append(p)
    mids = [0.5 * (a + b) for a, b in zip(pts, pts[1:])]
    return sorted(set(pts) | set(mids))


def walk_oracle(rule, lam, levels, aux=0.0, zero=DiscreteMeasure()):
    """Stopped law by an absorbing chain that moves one level at a time.

    Revisits are allowed, so the chain has cycles and is solved as a linear
    system.  Returns ``(joint dict keyed by (e, max, min), expected time)``.
    """
    g = list(levels)
    n = len(g)

    def rep_above(i):
        return 0.5 * (g[i] + g[i + 1]) if i + 1 < n else g[i] + 1.0

    def rep_below(i):
        return 0.5 * (g[i] + g[i - 1]) if i > 0 else g[i] - 1.0

    states = {}
    for M in range(n):
        for m in range(M + 1):
            for p in range(m, M + 1):
                if M > m:
                    states[(p, M, m)] = len(states)
    size = len(states)
    Q = np.zeros((size, size))
    cost = np.zeros(size)
    outcomes: dict[tuple, int] = {}
    R: list[tuple[int, int, float]] = []

    def arrive(q, M, m):
        """Event at level q from extrema (M, m): returns (stopped, new state key)."""
        if q > M:
            s = ExtremaState(g[q], g[q], rep_below(m), Event.NEW_MAX)
            key = (q, q, m)
        elif q < m:
            s = ExtremaState(g[q], rep_above(M), g[q], Event.NEW_MIN)
            key = (q, M, q)
        else:
            s = ExtremaState(g[q], rep_above(M), rep_below(m), Event.INTERIOR)
            key = (q, M, m)
        return should_stop(rule, s, aux), key

    for (p, M, m), i in states.items():
        if p == 0 or p == n - 1:
            continue
        up = gamblers_ruin_up(g[p], g[p - 1], g[p + 1])
        cost[i] = (g[p] - g[p - 1]) * (g[p + 1] - g[p])
        for q, w in ((p + 1, up), (p - 1, 1.0 - up)):
            stop, key = arrive(q, M, m)
            if stop:
                out = outcomes.setdefault(key, len(outcomes))
                R.append((i, out, w))
            else:
                Q[i, states[key]] += w
    Rm = np.zeros((size, len(outcomes)))
    for i, o, w in R:
        Rm[i, o] += w
    A = np.eye(size) - Q
    absorb = np.linalg.solve(A, Rm)
    times = np.linalg.solve(A, cost)

    joint: dict[tuple, float] = {}
    total_time = 0.0
    for x, p in zero:
        k = (x, x, x)
        joint[k] = joint.get(k, 0.0) + p
    running = lam.minus(zero) if not zero.is_empty() else lam
    for x, p in running:
        i0 = g.index(x)
        if should_stop(rule, ExtremaState(x, x, x, Event.START), aux):
            joint[(x, x, x)] = joint.get((x, x, x), 0.0) + p
            continue
        if i0 == 0 or i0 == n - 1:
            raise RuntimeError("start on the edge of the oracle grid")
        up = gamblers_ruin_up(g[i0], g[i0 - 1], g[i0 + 1])
        total_time += p * (g[i0] - g[i0 - 1]) * (g[i0 + 1] - g[i0])
        for q, w in ((i0 + 1, up), (i0 - 1, 1.0 - up)):
            stop, key = arrive(q, i0, i0)
            if stop:
                e, M, m = key
                k = (g[e], g[M], g[m])
                joint[k] = joint.get(k, 0.0) + p * w
            else:
                j = states[key]
                total_time += p * w * times[j]
                for (e, M, m), o in outcomes.items():
                    k = (g[e], g[M], g[m])
                    joint[k] = joint.get(k, 0.0) + p * w * absorb[j, o]
    return {k: v for k, v in joint.items() if v > 1e-15}, total_time


def barycenter(mu: DiscreteMeasure, x: float) -> float:
    """``E[X | X >= x]`` by direct summation."""
    num = sum(p * y for y, p in mu if y >= x)
    den = sum(p for y, p in mu if y >= x)
    return num / den if den > 0 else math.inf


def law_dict(law):
    out = {}
    for a in law.joint:
        out[(a.endpoint, a.max, a.min)] = out.get((a.endpoint, a.max, a.min), 0.0) + a.mass
    return out
