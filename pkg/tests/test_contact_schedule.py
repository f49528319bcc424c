from __future__ import annotations

import math

import pytest

from control.contact_schedule import (
    STANDING,
    ContactFlags,
    Phase,
    Timeline,
    flags_at,
    horizon_flags,
    make_walk_gait,
    overlay,
    swing_progress,
    transitions,
)


def _walk(overlap: float = 0.0) -> Timeline:
    phases = [Phase(0.0, STANDING, "stand")] + make_walk_gait(0.6, 1.0, 1.2, overlap=overlap)
    phases.append(Phase(2.2, STANDING, "stand"))
    return Timeline.from_phases(phases, gait_period=0.6)


def test_flags_reject_non_binary_values():
    with pytest.raises(ValueError, match="c2"):
        ContactFlags(c2=2)


def test_timeline_invariants():
    with pytest.raises(ValueError):
        Timeline(phases=())
    with pytest.raises(ValueError, match="t = 0"):
        Timeline(phases=(Phase(0.5, STANDING),))
    with pytest.raises(ValueError, match="strictly increasing"):
        Timeline(phases=(Phase(0.0, STANDING), Phase(1.0, STANDING), Phase(1.0, STANDING)))


def test_later_phase_wins_on_boundary():
    timeline = _walk()
    assert flags_at(timeline, 0.999) == STANDING
    assert flags_at(timeline, 1.0).as_tuple()[:2] == (1, 0)
    assert flags_at(timeline, 1.3).as_tuple()[:2] == (0, 1)
    # the last phase holds forever
    assert flags_at(timeline, 50.0) == STANDING
    with pytest.raises(ValueError):
        flags_at(timeline, -0.1)


def test_walk_gait_alternates_feet():
    phases = make_walk_gait(0.6, 0.0, 1.2)
    assert [p.start for p in phases] == pytest.approx([0.0, 0.3, 0.6, 0.9])
    assert [(p.flags.c1, p.flags.c2) for p in phases] == [(1, 0), (0, 1), (1, 0), (0, 1)]


def test_walk_gait_overlap_inserts_double_stance():
    phases = make_walk_gait(0.6, 0.0, 0.6, overlap=0.05)
    labels = [p.label for p in phases]
    assert labels == ["walk", "walk-transfer", "walk", "walk-transfer"]
    assert phases[1].start == pytest.approx(0.25)
    assert phases[1].flags == STANDING

    with pytest.raises(ValueError):
        make_walk_gait(0.6, 0.0, 1.0, overlap=0.3)
    with pytest.raises(ValueError):
        make_walk_gait(0.0, 0.0, 1.0)


def test_walk_gait_keeps_base_flags():
    carried = ContactFlags(e=1, h1=1, h2=1)
    phases = make_walk_gait(0.6, 0.0, 0.6, base=carried)
    assert all(p.flags.e == 1 and p.flags.h1 == 1 for p in phases)


def test_horizon_flags_sample_the_timeline():
    timeline = _walk()
    flags = horizon_flags(timeline, 0.94, 0.03, 4)
    assert [(f.c1, f.c2) for f in flags] == [(1, 1), (1, 1), (1, 0), (1, 0)]
    with pytest.raises(ValueError):
        horizon_flags(timeline, 0.0, 0.0, 3)
    with pytest.raises(ValueError):
        horizon_flags(timeline, 0.0, 0.03, 0)


def test_swing_progress():
    timeline = _walk()
    assert swing_progress(timeline, 0.5, foot=0) is None
    # foot 2 swings during the first step
    phase, lift_off, touch_down = swing_progress(timeline, 1.15, foot=1)
    assert (lift_off, touch_down) == pytest.approx((1.0, 1.3))
    assert phase == pytest.approx(0.5)

    never_lands = Timeline(phases=(Phase(0.0, STANDING), Phase(1.0, ContactFlags(c1=0))))
    phase, _, touch_down = swing_progress(never_lands, 3.0, foot=0)
    assert phase == 0.0 and math.isinf(touch_down)


def test_from_phases_merges_equal_starts_and_duplicates():
    timeline = Timeline.from_phases(
        [
            Phase(0.0, STANDING, "stand"),
            Phase(0.5, STANDING, "stand"),
            Phase(1.0, ContactFlags(c1=0), "a"),
            Phase(1.0, ContactFlags(c2=0), "b"),
        ]
    )
    assert [p.start for p in timeline.phases] == [0.0, 1.0]
    assert timeline.phases[1].label == "b"


def test_transitions_report_each_change():
    timeline = _walk()
    events = transitions(timeline, "c1")
    assert [value for _, value in events] == [0, 1, 0, 1]
    assert [t for t, _ in events] == pytest.approx([1.3, 1.6, 1.9, 2.2])
    assert transitions(timeline, "e") == []


def test_overlay_forces_flags_inside_window():
    base = [Phase(0.0, STANDING, "stand")]
    phases = overlay(base, 1.0, 2.0, e=1, h1=1)
    timeline = Timeline.from_phases(phases)
    assert flags_at(timeline, 0.5).e == 0
    assert flags_at(timeline, 1.5).as_tuple() == (1, 1, 1, 1, 0)
    assert flags_at(timeline, 2.0).e == 0

    open_ended = Timeline.from_phases(overlay(base, 1.0, math.inf, e=1))
    assert flags_at(open_ended, 100.0).e == 1
