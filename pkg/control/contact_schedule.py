"""Offline contact schedules: binary stance/object/hand activations over time."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Sequence, Tuple

_BOUNDARY_EPS = 1e-9


@dataclass(frozen=True)
class ContactFlags:
    """``c1``/``c2`` foot stance, ``e`` object carried, ``h1``/``h2`` hand tasks active."""

    c1: int = 1
    c2: int = 1
    e: int = 0
    h1: int = 0
    h2: int = 0

    def __post_init__(self) -> None:
        for name in ("c1", "c2", "e", "h1", "h2"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"contact flag {name} must be 0 or 1")

    def as_tuple(self) -> Tuple[int, int, int, int, int]:
        return (self.c1, self.c2, self.e, self.h1, self.h2)

    def stance(self, foot: int) -> int:
        return self.c1 if foot == 0 else self.c2

    def hand(self, hand: int) -> int:
        return self.h1 if hand == 0 else self.h2


STANDING = ContactFlags()


@dataclass(frozen=True)
class Phase:
    start: float
    flags: ContactFlags
    label: str = ""


@dataclass(frozen=True)
class Timeline:
    phases: Tuple[Phase, ...]
    gait_period: Optional[float] = None
    duty_factor: float = 0.5

    def __post_init__(self) -> None:
        if not self.phases:
            raise ValueError("a timeline needs at least one phase")
        if abs(self.phases[0].start) > _BOUNDARY_EPS:
            raise ValueError("the first phase must start at t = 0")
        starts = [phase.start for phase in self.phases]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("phase start times must be strictly increasing")
        object.__setattr__(self, "_starts", starts)

    @property
    def starts(self) -> List[float]:
        return self._starts  # type: ignore[attr-defined]

    def index_at(self, t: float) -> int:
        # the later phase wins on an exact boundary
        return max(bisect.bisect_right(self.starts, t + _BOUNDARY_EPS) - 1, 0)

    def phase_end(self, index: int) -> float:
        return self.phases[index + 1].start if index + 1 < len(self.phases) else math.inf

    @classmethod
    def from_phases(cls, phases: Iterable[Phase], gait_period: Optional[float] = None) -> "Timeline":
        merged: List[Phase] = []
        for phase in sorted(phases, key=lambda p: p.start):
            if merged and abs(merged[-1].start - phase.start) < _BOUNDARY_EPS:
                merged[-1] = phase
            elif merged and merged[-1].flags == phase.flags and merged[-1].label == phase.label:
                continue
            else:
                merged.append(phase)
        return cls(phases=tuple(merged), gait_period=gait_period)


def flags_at(timeline: Timeline, t: float) -> ContactFlags:
    if t < 0.0:
        raise ValueError("t must be non-negative")
    return timeline.phases[timeline.index_at(t)].flags


def horizon_flags(timeline: Timeline, t0: float, dt: float, k: int) -> List[ContactFlags]:
    if dt <= 0.0 or k < 1:
        raise ValueError("horizon_flags needs dt > 0 and k >= 1")
    return [flags_at(timeline, t0 + i * dt) for i in range(k)]


def make_walk_gait(
    period: float,
    start: float,
    duration: float,
    *,
    overlap: float = 0.0,
    base: ContactFlags = STANDING,
    label: str = "walk",
) -> List[Phase]:
    """Alternating single-stance phases, foot 1 in stance first.

    With ``overlap > 0`` a double-stance window of that length opens every
    half period before the next single-stance phase.
    """

    if period <= 0.0:
        raise ValueError("gait period must be positive")
    half = 0.5 * period
    if not 0.0 <= overlap < half:
        raise ValueError("overlap must be in [0, period / 2)")
    end = start + duration
    phases: List[Phase] = []
    t = start
    step = 0
    while t < end - _BOUNDARY_EPS:
        c1, c2 = (1, 0) if step % 2 == 0 else (0, 1)
        phases.append(Phase(start=t, flags=replace(base, c1=c1, c2=c2), label=label))
        single_end = t + half - overlap
        if overlap > 0.0 and single_end < end - _BOUNDARY_EPS:
            phases.append(Phase(start=single_end, flags=replace(base, c1=1, c2=1), label=f"{label}-transfer"))
        t += half
        step += 1
    return phases


def swing_progress(timeline: Timeline, t: float, foot: int) -> Optional[Tuple[float, float, float]]:
    """``(phase, lift_off, touch_down)`` if ``foot`` is swinging at ``t``, else ``None``."""

    index = timeline.index_at(t)
    if timeline.phases[index].flags.stance(foot):
        return None
    lift_off_index = index
    while lift_off_index > 0 and not timeline.phases[lift_off_index - 1].flags.stance(foot):
        lift_off_index -= 1
    touch_down_index = index
    while touch_down_index + 1 < len(timeline.phases) and not timeline.phases[touch_down_index + 1].flags.stance(foot):
        touch_down_index += 1
    lift_off = timeline.phases[lift_off_index].start
    touch_down = timeline.phase_end(touch_down_index)
    if math.isinf(touch_down):
        return (0.0, lift_off, touch_down)
    phase = min(max((t - lift_off) / (touch_down - lift_off), 0.0), 1.0)
    return (phase, lift_off, touch_down)


def transitions(timeline: Timeline, attribute: str) -> List[Tuple[float, int]]:
    """Times at which a flag changes, with its new value."""

    events: List[Tuple[float, int]] = []
    previous = getattr(timeline.phases[0].flags, attribute)
    for phase in timeline.phases[1:]:
        value = getattr(phase.flags, attribute)
        if value != previous:
            events.append((phase.start, value))
            previous = value
    return events


def overlay(phases: Sequence[Phase], start: float, end: float, **flags: int) -> List[Phase]:
    """Copy of ``phases`` with ``flags`` forced inside ``[start, end)``."""

    out: List[Phase] = []
    for i, phase in enumerate(phases):
        phase_end = phases[i + 1].start if i + 1 < len(phases) else math.inf
        if phase_end <= start or phase.start >= end:
            out.append(phase)
            continue
        if phase.start < start:
            out.append(phase)
            out.append(Phase(start=start, flags=replace(phase.flags, **flags), label=phase.label))
        else:
            out.append(Phase(start=phase.start, flags=replace(phase.flags, **flags), label=phase.label))
        if phase_end > end and not math.isinf(end):
            out.append(Phase(start=end, flags=phase.flags, label=phase.label))
    return out
