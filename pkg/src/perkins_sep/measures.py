"""Finitely supported measures on the real line.

Starting laws, target laws and the shared mass stopped at time zero are all
represented by :class:`DiscreteMeasure`.  Convex order is decided through
potential functions, which are piecewise linear for atomic measures, so
comparing them at the union of the supports is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ParseError

TOL = 1e-12


@dataclass(frozen=True)
class DiscreteMeasure:
    """Atomic (sub-)probability measure with strictly increasing locations."""

    locations: tuple[float, ...] = ()
    masses: tuple[float, ...] = ()

    def __post_init__(self):
        locs = tuple(float(x) for x in self.locations)
        ps = tuple(float(p) for p in self.masses)
        if len(locs) != len(ps):
            raise ValueError("locations and masses differ in length")
        keep = [(x, p) for x, p in zip(locs, ps) if p != 0.0]
        for x, p in keep:
            if not math.isfinite(x) or not math.isfinite(p):
                raise ValueError("non-finite atom")
            if p < 0:
                raise ValueError(f"negative mass {p} at {x}")
        for (x0, _), (x1, _) in zip(keep, keep[1:]):
            if not x1 > x0:
                raise ValueError("locations must be strictly increasing")
        object.__setattr__(self, "locations", tuple(x for x, _ in keep))
        object.__setattr__(self, "masses", tuple(p for _, p in keep))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> "DiscreteMeasure":
        """Build from unordered (location, mass) pairs, adding coincident atoms."""
        acc: dict[float, list[float]] = {}
        for x, p in pairs:
            acc.setdefault(float(x), []).append(float(p))
        items = sorted((x, math.fsum(ps)) for x, ps in acc.items())
        return cls(tuple(x for x, _ in items), tuple(p for _, p in items))

    @classmethod
    def dirac(cls, x: float = 0.0, mass: float = 1.0) -> "DiscreteMeasure":
        return cls((x,), (mass,))

    @property
    def total(self) -> float:
        return math.fsum(self.masses)

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.locations, self.masses))

    def __len__(self):
        return len(self.locations)

    def __iter__(self):
        return iter(zip(self.locations, self.masses))

    def is_empty(self) -> bool:
        return not self.locations

    def is_probability(self, tol: float = TOL) -> bool:
        return abs(self.total - 1.0) <= tol

    def mass_at(self, x: float, tol: float = TOL) -> float:
        i = int(np.searchsorted(self.locations, x - tol))
        if i < len(self.locations) and abs(self.locations[i] - x) <= tol:
            return self.masses[i]
        return 0.0

    def mean(self) -> float:
        return moment(self, 1)

    def minus(self, other: "DiscreteMeasure", tol: float = TOL) -> "DiscreteMeasure":
        """Atom-wise difference; ``other`` must be dominated by ``self``."""
        out = []
        for x, p in self:
            q = p - other.mass_at(x, tol)
            if q < -tol:
                raise ValueError(f"subtracted mass exceeds available mass at {x}")
            if q > tol:
                out.append((x, q))
        return DiscreteMeasure.from_pairs(out)

    def reflect(self) -> "DiscreteMeasure":
        return DiscreteMeasure.from_pairs((0.0 - x, p) for x, p in self)

    def to_json(self) -> dict:
        return {"atoms": [{"x": x, "p": p} for x, p in self]}

    @classmethod
    def from_json(cls, doc) -> "DiscreteMeasure":
        """Parse ``{"atoms": [{"x": ..., "p": ...}, ...]}``.

        Duplicate locations, negative masses and totals outside
        ``[0, 1 + 1e-12]`` are rejected.
        """
        if not isinstance(doc, dict) or set(doc) != {"atoms"}:
            raise ParseError("measure document must be an object with a single 'atoms' key")
        atoms = doc["atoms"]
        if not isinstance(atoms, list):
            raise ParseError("'atoms' must be a list")
        pairs = []
        for a in atoms:
            if not isinstance(a, dict) or set(a) != {"x", "p"}:
                raise ParseError(f"bad atom entry {a!r}")
            x, p = a["x"], a["p"]
            if isinstance(x, bool) or isinstance(p, bool) or not isinstance(x, (int, float)) \
                    or not isinstance(p, (int, float)):
                raise ParseError(f"atom fields must be numbers: {a!r}")
            if not math.isfinite(x) or not math.isfinite(p):
                raise ParseError(f"non-finite atom {a!r}")
            if p < 0:
                raise ParseError(f"negative mass in atom {a!r}")
            pairs.append((float(x), float(p)))
        xs = [x for x, _ in pairs]
        if len(set(xs)) != len(xs):
            raise ParseError("duplicate atom locations")
        total = math.fsum(p for _, p in pairs)
        if total > 1.0 + TOL:
            raise ParseError(f"total mass {total} exceeds 1")
        return cls.from_pairs(pairs)


def _require_probability(m: DiscreteMeasure, name: str = "measure"):
    if not m.is_probability():
        raise ValueError(f"{name} must be a probability measure (total {m.total!r})")


def moment(m: DiscreteMeasure, k: int) -> float:
    """Raw moment of order ``k`` (1 or 2), summed with compensation."""
    if k not in (1, 2):
        raise ValueError("only first and second moments are supported")
    _require_probability(m)
    return math.fsum(p * x**k for x, p in m)


def potential(m: DiscreteMeasure, x: float) -> float:
    """Potential function ``u_m(x) = -sum p |x - location|``."""
    return -math.fsum(p * abs(x - y) for y, p in m)


def convex_order(lam: DiscreteMeasure, mu: DiscreteMeasure, tol: float = TOL) -> bool:
    """True iff ``lam`` precedes ``mu`` in convex order.

    Potentials of atomic measures are piecewise linear with kinks at the
    atoms, so checking the kinks of both suffices once the means agree.
    """
    _require_probability(lam, "lam")
    _require_probability(mu, "mu")
    if abs(moment(lam, 1) - moment(mu, 1)) > tol:
        return False
    points = sorted(set(lam.locations) | set(mu.locations))
    return all(potential(mu, x) <= potential(lam, x) + tol for x in points)


def meet(lam: DiscreteMeasure, mu: DiscreteMeasure, tol: float = TOL) -> DiscreteMeasure:
    """Largest measure dominated by both arguments (atom-wise minimum)."""
    out = []
    for x, p in lam:
        q = mu.mass_at(x, tol)
        if q > 0:
            out.append((x, min(p, q)))
    return DiscreteMeasure.from_pairs(out)


def tv_distance(a: DiscreteMeasure, b: DiscreteMeasure, tol: float = TOL) -> float:
    """Total variation ``1/2 sum |a - b|`` over the union of supports."""
    points = sorted(set(a.locations) | set(b.locations))
    merged: list[float] = []
    for x in points:
        if not merged or x - merged[-1] > tol:
            merged.append(x)
    return 0.5 * math.fsum(abs(a.mass_at(x, tol) - b.mass_at(x, tol)) for x in merged)


def _dilate(atoms, rng, max_jump, keep_prob):
    out = []
    for k, p in atoms:
        q = rng.uniform(0.2, 0.6) if rng.random() < keep_prob else 0.0
        a, b = (int(v) for v in rng.integers(1, max_jump + 1, size=2))
        if q > 0:
            out.append((k, q * p))
        out.append((k - a, (1 - q) * p * b / (a + b)))
        out.append((k + b, (1 - q) * p * a / (a + b)))
    return out


def random_convex_pair(
    seed: int,
    n_atoms: int,
    spread: float,
    *,
    steps: int = 1,
    keep_prob: float = 0.3,
    identity: bool = False,
    lattice: int = 4,
) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """Random pair ``(lam, mu)`` with ``lam <= mu`` in convex order.

    ``lam`` has ``n_atoms`` atoms on a lattice of mesh ``spread / lattice``;
    ``mu`` applies ``steps`` rounds of a random mean-preserving kernel that
    splits every atom into a pair (optionally keeping part of it in place).
    Working on integer lattice coordinates keeps coincident atoms exact, so
    the meet of the pair is usually non-trivial.
    """
    if n_atoms < 1 or spread <= 0:
        raise ValueError("need n_atoms >= 1 and spread > 0")
    rng = np.random.default_rng(seed)
    ks = rng.choice(np.arange(-lattice, lattice + 1), size=n_atoms, replace=False)
    ws = rng.dirichlet(np.ones(n_atoms))
    ws = ws / math.fsum(ws)
    atoms = [(int(k), float(w)) for k, w in zip(ks, ws)]
    h = spread / lattice
    lam = DiscreteMeasure.from_pairs((k * h, w) for k, w in atoms)
    if identity:
        return lam, lam
    target = atoms
    for _ in range(steps):
        target = _dilate(target, rng, lattice, keep_prob)
    mu = DiscreteMeasure.from_pairs((k * h, w) for k, w in target)
    return lam, mu


def example_pair(alpha: float) -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """Three-atom start ``1/4, 1/2, 1/4`` at ``-1, 0, 1`` and target with atom ``alpha`` at 0."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    lam = DiscreteMeasure((-1.0, 0.0, 1.0), (0.25, 0.5, 0.25))
    side = (1.0 - alpha) / 2.0
    mu = DiscreteMeasure.from_pairs([(-2.0, side), (0.0, alpha), (2.0, side)])
    return lam, mu
