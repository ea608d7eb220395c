"""Instance corpora shared by the property and acceptance tests."""

from __future__ import annotations

import time
from functools import lru_cache

from perkins_sep.barriers import VhBarrier
from perkins_sep.calibration import calibrate_perkins
from perkins_sep.measures import DiscreteMeasure, random_convex_pair


def random_pair(seed: int):
    return random_convex_pair(seed, 1 + seed % 4, 1.0, steps=1 + seed % 2)


@lru_cache(maxsize=None)
def random_corpus(n: int = 100):
    return tuple(random_pair(s) for s in range(n))


# wall time of the first (uncached) calibration run, keyed by corpus size
CALIBRATION_SECONDS: dict[int, float] = {}


@lru_cache(maxsize=None)
def calibrated_corpus(n: int = 100):
    pairs = random_corpus(n)
    t0 = time.perf_counter()
    out = tuple(calibrate_perkins(lam, mu) for lam, mu in pairs)
    CALIBRATION_SECONDS[n] = time.perf_counter() - t0
    return out


def point_start_pair(seed: int):
    """Target with at least three atoms around a start at zero."""
    s = seed
    while True:
        lam, mu = random_convex_pair(10_000 + s, 1, 1.0, steps=2, keep_prob=0.2)
        shift = lam.locations[0]
        mu = DiscreteMeasure.from_pairs((x - shift, p) for x, p in mu)
        if len(mu) >= 3 and mu.mass_at(0.0) == 0.0:
            return DiscreteMeasure.dirac(0.0), mu
        s += 1000


@lru_cache(maxsize=None)
def point_start_corpus(n: int = 20):
    return tuple(point_start_pair(s) for s in range(n))


def random_barrier(rng, lo: int = -3, hi: int = 3, n_lines: int = 3) -> VhBarrier:
    """Bounded barrier on an integer lattice with a few random extra lines."""
    v = [(float(hi), float(lo))]
    h = [(float(lo), float(hi))]
    for _ in range(n_lines):
        level = float(rng.integers(lo + 1, hi))
        if rng.random() < 0.5:
            v.append((level, level - rng.uniform(0.0, level - lo)))
        else:
            h.append((level, level + rng.uniform(0.0, hi - level)))
    return VhBarrier(tuple(v), tuple(h))


def random_start(rng, lo: int = -2, hi: int = 2) -> DiscreteMeasure:
    k = int(rng.integers(1, 4))
    xs = rng.choice(list(range(lo, hi + 1)), size=k, replace=False)
    ws = rng.dirichlet([1.0] * k)
    return DiscreteMeasure.from_pairs((float(x), float(w)) for x, w in zip(xs, ws / ws.sum()))
