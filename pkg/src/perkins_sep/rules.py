"""Stopping rules: Perkins, Azema-Yor, Hobson-Pedersen, Root and Rost.

Every rule answers :func:`should_stop` for an :class:`ExtremaState`.  The
Perkins, Azema-Yor and Hobson-Pedersen rules only look at position and
running extrema and are evaluated on the max-min engine; Root and Rost need
the clock and are simulated.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Union

from .barriers import TimeSpaceBarrier, TimeSpaceKind, VhBarrier, vh_hit
from .errors import ParseError
from .measures import DiscreteMeasure
from .state import Event, ExtremaState


@dataclass(frozen=True)
class StepFunction:
    """Non-decreasing right-continuous step map, ``-inf`` left of the first breakpoint."""

    breakpoints: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if len(bps) != len(vals):
            raise ValueError("breakpoints and values differ in length")
        if any(b <= a for a, b in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise ValueError("values must be non-decreasing")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)

    def __call__(self, x: float) -> float:
        i = bisect.bisect_right(self.breakpoints, x) - 1
        return -math.inf if i < 0 else self.values[i]

    def coordinates(self) -> list[float]:
        return [v for v in self.breakpoints + self.values if math.isfinite(v)]

    def map_coordinates(self, f) -> "StepFunction":
        def g(v):
            return v if math.isinf(v) else f(v)

        return StepFunction(tuple(g(b) for b in self.breakpoints), tuple(g(v) for v in self.values))

    def to_json(self) -> dict:
        return {"breakpoints": list(self.breakpoints), "values": list(self.values)}

    @classmethod
    def from_json(cls, doc) -> "StepFunction":
        if not isinstance(doc, dict) or set(doc) != {"breakpoints", "values"}:
            raise ParseError("step function needs exactly 'breakpoints' and 'values'")
        try:
            return cls(tuple(doc["breakpoints"]), tuple(doc["values"]))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"malformed step function: {exc}") from exc


@dataclass(frozen=True)
class Perkins:
    """Hit a vh-barrier after stopping ``atom_stop`` at time zero.

    With ``mirrored`` set, the barrier is read in reflected coordinates,
    which turns the max-priority construction into the min-priority one.
    """

    barrier: VhBarrier = field(default_factory=VhBarrier)
    atom_stop: DiscreteMeasure = field(default_factory=DiscreteMeasure)
    mirrored: bool = False

    name = "perkins"

    def coordinates(self):
        return self.barrier.coordinates() + list(self.atom_stop.locations)

    def map_coordinates(self, f):
        return Perkins(self.barrier.map_coordinates(f), self.atom_stop, self.mirrored)


@dataclass(frozen=True)
class AzemaYor:
    """Stop once the position falls to ``boundary(running max)``."""

    boundary: StepFunction

    name = "ay"

    def __post_init__(self):
        for b, v in zip(self.boundary.breakpoints, self.boundary.values):
            if v > b:
                raise ValueError(f"boundary value {v} exceeds its breakpoint {b}")

    def coordinates(self):
        return self.boundary.coordinates()

    def map_coordinates(self, f):
        return AzemaYor(self.boundary.map_coordinates(f))


@dataclass(frozen=True)
class HobsonPedersen:
    """``tau_G ^ tau_g`` with an independent level ``G`` drawn at time zero."""

    G: DiscreteMeasure
    g: StepFunction = field(default_factory=StepFunction)

    name = "hp"

    def __post_init__(self):
        for b, v in zip(self.g.breakpoints, self.g.values):
            if v > b:
                raise ValueError(f"g value {v} exceeds its breakpoint {b}")

    def coordinates(self):
        return list(self.G.locations) + self.g.coordinates()

    def map_coordinates(self, f):
        return HobsonPedersen(
            DiscreteMeasure.from_pairs((f(x), p) for x, p in self.G), self.g.map_coordinates(f)
        )


@dataclass(frozen=True)
class Root:
    barrier: TimeSpaceBarrier

    name = "root"

    def __post_init__(self):
        if self.barrier.kind is not TimeSpaceKind.ROOT:
            raise ValueError("Root rule needs a Root barrier")

    def coordinates(self):
        return list(self.barrier.levels)


@dataclass(frozen=True)
class Rost:
    barrier: TimeSpaceBarrier
    atom_stop: DiscreteMeasure = field(default_factory=DiscreteMeasure)

    name = "rost"

    def __post_init__(self):
        if self.barrier.kind is not TimeSpaceKind.INVERSE:
            raise ValueError("Rost rule needs an inverse barrier")

    def coordinates(self):
        return list(self.barrier.levels) + list(self.atom_stop.locations)


StoppingRule = Union[Perkins, AzemaYor, HobsonPedersen, Root, Rost]
MAX_MIN_RULES = (Perkins, AzemaYor, HobsonPedersen)


def should_stop(rule: StoppingRule, state: ExtremaState, time_or_aux: float = 0.0) -> bool:
    """Stop decision of ``rule`` at ``state``.

    ``time_or_aux`` is the clock for Root/Rost and the sampled level ``G``
    for Hobson-Pedersen; other rules ignore it.  Perkins never stops at the
    start (time-zero stops come from ``atom_stop``) nor between extrema.
    """
    if isinstance(rule, Perkins):
        if state.event in (Event.NEW_MAX, Event.NEW_MIN):
            return vh_hit(rule.barrier, state.max, state.min)
        return False
    if isinstance(rule, AzemaYor):
        return state.pos <= rule.boundary(state.max)
    if isinstance(rule, HobsonPedersen):
        return state.pos <= rule.g(state.max) or state.max >= time_or_aux
    if isinstance(rule, (Root, Rost)):
        return rule.barrier.contains(time_or_aux, state.pos)
    raise TypeError(f"unknown rule {rule!r}")


def barycenter_function(mu: DiscreteMeasure):
    """``x -> E[X | X >= x]`` under ``mu``, left-continuous with steps at the atoms."""
    locs, ps = mu.locations, mu.masses
    tails = []
    for k in range(len(locs)):
        w = math.fsum(ps[k:])
        tails.append(math.fsum(p * x for x, p in zip(locs[k:], ps[k:])) / w)

    def psi(x: float) -> float:
        k = bisect.bisect_left(locs, x)
        if k >= len(locs):
            return math.inf
        return tails[k]

    return psi


def azema_yor_boundary(mu: DiscreteMeasure) -> StepFunction:
    """Stop level as a function of the running maximum for a point start at ``mean(mu)``.

    The barycenter of the tail from the ``k``-th atom becomes the breakpoint
    at which the stop level jumps to that atom.
    """
    if not mu.is_probability():
        raise ValueError("mu must be a probability measure")
    psi = barycenter_function(mu)
    bps = [psi(x) for x in mu.locations]
    # the end points are exact: the whole-law barycenter is the mean, the last is the top atom
    bps[0] = mu.mean()
    bps[-1] = mu.locations[-1]
    for i in range(len(bps) - 2, -1, -1):
        bps[i] = min(bps[i], math.nextafter(bps[i + 1], -math.inf))
    return StepFunction(tuple(bps), tuple(mu.locations))


def rule_to_json(rule: StoppingRule) -> dict:
    if isinstance(rule, Perkins):
        doc = {"variant": "perkins", "barrier": rule.barrier.to_json(), "atom_stop": rule.atom_stop.to_json()}
        if rule.mirrored:
            doc["mirrored"] = True
        return doc
    if isinstance(rule, AzemaYor):
        return {"variant": "ay", "boundary": rule.boundary.to_json()}
    if isinstance(rule, HobsonPedersen):
        return {"variant": "hp", "G": rule.G.to_json(), "g": rule.g.to_json()}
    if isinstance(rule, Root):
        return {"variant": "root", "barrier": rule.barrier.to_json()}
    if isinstance(rule, Rost):
        return {"variant": "rost", "barrier": rule.barrier.to_json(), "atom_stop": rule.atom_stop.to_json()}
    raise TypeError(f"unknown rule {rule!r}")


_RULE_KEYS = {
    "perkins": ({"variant", "barrier"}, {"atom_stop", "mirrored"}),
    "ay": ({"variant", "boundary"}, set()),
    "hp": ({"variant", "G"}, {"g"}),
    "root": ({"variant", "barrier"}, set()),
    "rost": ({"variant", "barrier"}, {"atom_stop"}),
}


def rule_from_json(doc) -> StoppingRule:
    if not isinstance(doc, dict) or doc.get("variant") not in _RULE_KEYS:
        raise ParseError("rule document needs a 'variant' in perkins/ay/hp/root/rost")
    required, optional = _RULE_KEYS[doc["variant"]]
    keys = set(doc)
    if not required <= keys or not keys <= required | optional:
        raise ParseError(f"bad keys for {doc['variant']} rule: {sorted(keys)}")
    try:
        v = doc["variant"]
        if v == "perkins":
            atom = DiscreteMeasure.from_json(doc.get("atom_stop", {"atoms": []}))
            return Perkins(VhBarrier.from_json(doc["barrier"]), atom, bool(doc.get("mirrored", False)))
        if v == "ay":
            return AzemaYor(StepFunction.from_json(doc["boundary"]))
        if v == "hp":
            g = StepFunction.from_json(doc["g"]) if "g" in doc else StepFunction()
            return HobsonPedersen(DiscreteMeasure.from_json(doc["G"]), g)
        if v == "root":
            return Root(TimeSpaceBarrier.from_json(doc["barrier"]))
        atom = DiscreteMeasure.from_json(doc.get("atom_stop", {"atoms": []}))
        return Rost(TimeSpaceBarrier.from_json(doc["barrier"]), atom)
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc)) from exc
