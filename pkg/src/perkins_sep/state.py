from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Event(Enum):
    START = "start"
    NEW_MAX = "new_max"
    NEW_MIN = "new_min"
    INTERIOR = "interior"


@dataclass(frozen=True)
class ExtremaState:
    """Position with running extrema at the moment an event fires."""

    pos: float
    max: float
    min: float
    event: Event = Event.INTERIOR

    def __post_init__(self):
        if not self.min <= self.pos <= self.max:
            raise ValueError(f"inconsistent state {self}")
        if self.event is Event.NEW_MAX and self.pos != self.max:
            raise ValueError("new-max event away from the maximum")
        if self.event is Event.NEW_MIN and self.pos != self.min:
            raise ValueError("new-min event away from the minimum")
