"""Per-node packet generation and the sliding traffic history window.

A node's per-slotframe output is a fixed periodic component (enhanced
beacons, periodic application reports) plus an event-driven component drawn
from a configurable model. Counts land in a bounded history window whose
mean feeds the demand predictor.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Union

DEFAULT_HISTORY_WINDOW = 10


@dataclass(frozen=True)
class Constant:
    """Fixed number of event packets every slotframe."""

    rate: int

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise ValueError("rate must be non-negative")

    def draw(self, rng: random.Random) -> int:
        return self.rate


@dataclass(frozen=True)
class PoissonEvents:
    """Event count per slotframe is Poisson with the given mean."""

    rate: float

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise ValueError("rate must be non-negative")

    def draw(self, rng: random.Random) -> int:
        return _poisson_draw(rng, self.rate)


@dataclass(frozen=True)
class SporadicUniform:
    """Event count is uniform over the integers [lo, hi]."""

    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.lo < 0 or self.hi < self.lo:
            raise ValueError("need 0 <= lo <= hi")

    def draw(self, rng: random.Random) -> int:
        return rng.randint(self.lo, self.hi)


EventModel = Union[Constant, PoissonEvents, SporadicUniform, "Piecewise"]


@dataclass(frozen=True)
class Piecewise:
    """Switches between profiles at slotframe boundaries.

    `pieces` maps a starting slotframe index to the profile active from that
    index on; the piece with the largest start <= frame wins.
    """

    pieces: tuple[tuple[int, "TrafficProfile"], ...]

    def __post_init__(self) -> None:
        if not self.pieces:
            raise ValueError("piecewise model needs at least one piece")
        starts = [start for start, _ in self.pieces]
        if starts != sorted(starts) or len(set(starts)) != len(starts):
            raise ValueError("piece start frames must be strictly increasing")
        if starts[0] != 0:
            raise ValueError("first piece must start at slotframe 0")

    def active(self, frame: int) -> "TrafficProfile":
        chosen = self.pieces[0][1]
        for start, profile in self.pieces:
            if start <= frame:
                chosen = profile
            else:
                break
        return chosen


@dataclass(frozen=True)
class TrafficProfile:
    periodic_per_slotframe: int = 0
    event_model: EventModel = Constant(0)

    def __post_init__(self) -> None:
        if self.periodic_per_slotframe < 0:
            raise ValueError("periodic rate must be non-negative")


def generate_packets(
    profile: TrafficProfile, frame: int, rng: random.Random
) -> int:
    """Packets generated by one node in slotframe `frame`.

    Deterministic given the profile, the frame index and the state of the
    seeded generator.
    """
    if frame < 0:
        raise ValueError("slotframe index must be non-negative")
    if isinstance(profile.event_model, Piecewise):
        inner = profile.event_model.active(frame)
        return profile.periodic_per_slotframe + generate_packets(
            inner, frame, rng
        )
    return profile.periodic_per_slotframe + profile.event_model.draw(rng)


def paper_scenario_profile() -> TrafficProfile:
    """Reference workload: 2 packets per slotframe for the first 50
    slotframes, then a sporadic load of 2..7 packets per slotframe.
    """
    return TrafficProfile(
        event_model=Piecewise(
            (
                (0, TrafficProfile(event_model=Constant(2))),
                (50, TrafficProfile(event_model=SporadicUniform(2, 7))),
            )
        )
    )


@dataclass
class TrafficHistory:
    """Ring buffer of per-slotframe generated-packet counts."""

    beta: int = DEFAULT_HISTORY_WINDOW
    window: deque[int] = field(default_factory=deque)

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise ValueError("history window must be positive")
        self.window = deque(self.window, maxlen=self.beta)

    def record(self, count: int) -> None:
        if count < 0:
            raise ValueError("packet count must be non-negative")
        self.window.append(count)

    def __len__(self) -> int:
        return len(self.window)

    def mean(self) -> float:
        if not self.window:
            raise ValueError("history is empty")
        return sum(self.window) / len(self.window)


def _poisson_draw(rng: random.Random, mean: float) -> int:
    """Knuth's product method, chunked so exp(-mean) never underflows."""
    if mean <= 0:
        return 0
    count = 0
    remaining = mean
    while remaining > 0:
        chunk = min(remaining, 500.0)
        limit = math.exp(-chunk)
        product = rng.random()
        while product > limit:
            count += 1
            product *= rng.random()
        remaining -= chunk
    return count
