from __future__ import annotations

from pathlib import Path

import pytest
import yaml

from app.schemas import Scenario, load_scenario
from dynamics.errors import ScenarioError

SCENARIOS = Path(__file__).resolve().parents[1] / "assets" / "scenarios"

BUNDLED = sorted(SCENARIOS.glob("*.yaml"))


def _minimal(**extra) -> dict:
    return {"name": "bench", "duration": 1.0, **extra}


@pytest.mark.parametrize("path", BUNDLED, ids=lambda p: p.stem)
def test_bundled_scenarios_validate(path):
    scenario = load_scenario(path)
    assert scenario.name
    timeline = scenario.timeline()
    assert timeline.phases[0].start == 0.0
    assert scenario.mpc.model_variant == scenario.model_variant


def test_unknown_keys_are_rejected(tmp_path):
    path = tmp_path / "typo.yaml"
    path.write_text(yaml.safe_dump(_minimal(durration=2.0)), encoding="utf-8")
    with pytest.raises(ScenarioError, match="Invalid scenario"):
        load_scenario(path)


def test_missing_and_unparsable_files(tmp_path):
    with pytest.raises(ScenarioError, match="not found"):
        load_scenario(tmp_path / "absent.yaml")
    broken = tmp_path / "broken.yaml"
    broken.write_text("name: [unclosed", encoding="utf-8")
    with pytest.raises(ScenarioError, match="Could not parse"):
        load_scenario(broken)
    listed = tmp_path / "list.yaml"
    listed.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ScenarioError, match="mapping"):
        load_scenario(listed)


def test_object_flags_need_an_object():
    with pytest.raises(ValueError, match="no object"):
        Scenario.model_validate(_minimal(phases=[{"start": 0.0, "e": 1}]))
    with pytest.raises(ValueError, match="e = 1"):
        Scenario.model_validate(_minimal(object={"mass": 2.0, "start_in_hand": True}))
    with pytest.raises(ValueError, match="position"):
        Scenario.model_validate(_minimal(object={"mass": 2.0}))


def test_first_phase_and_command_start_at_zero():
    with pytest.raises(ValueError):
        Scenario.model_validate(_minimal(phases=[{"start": 0.5}]))
    with pytest.raises(ValueError):
        Scenario.model_validate(_minimal(commands=[{"start": 0.2}]))


def test_top_level_model_switch_wins():
    scenario = Scenario.model_validate(_minimal(model_variant=1, mpc={"model_variant": 2}))
    assert scenario.mpc.model_variant == 1


def test_walk_phases_expand_into_timeline():
    scenario = Scenario.model_validate(
        _minimal(
            duration=2.0,
            phases=[{"start": 0.0}, {"kind": "walk", "start": 0.5, "duration": 0.8, "period": 0.4}, {"start": 1.3}],
        )
    )
    starts = [phase.start for phase in scenario.timeline().phases]
    assert starts == pytest.approx([0.0, 0.5, 0.7, 0.9, 1.1, 1.3])
    assert scenario.plan().gait_period == 0.4


def test_with_overrides_revalidates():
    scenario = load_scenario(SCENARIOS / "load_sweep.yaml")
    heavier = scenario.with_overrides(object_mass=6.0, seed=3, duration=None)
    assert heavier.object.mass == 6.0
    assert heavier.seed == 3
    assert heavier.duration == scenario.duration
    switched = scenario.with_overrides(model_variant=1)
    assert switched.mpc.model_variant == 1
    with pytest.raises(ValueError):
        scenario.with_overrides(duration=-1.0)

    bare = Scenario.model_validate(_minimal())
    with pytest.raises(ScenarioError):
        bare.with_overrides(object_mass=1.0)


def test_sweep_grid_must_increase():
    with pytest.raises(ValueError, match="increasing"):
        Scenario.model_validate(
            _minimal(object={"mass": 0.0, "position": [0.4, 0.0, 0.2]}, sweep={"masses": [2.0, 1.0]})
        )
