from __future__ import annotations

import copy

import numpy as np
import pytest

from dynamics import rigid_body
from dynamics.errors import ModelFileError
from dynamics.robot_model import (
    BASE_DOF,
    ObjectParams,
    combined_com,
    combined_inertia,
    load_model,
    parse_model,
)

CHAIN = {
    "name": "chain",
    "links": [
        {"name": "a", "joint": {"name": "j_a", "axis": [0, 0, 1]}, "mass": 1.0, "inertia": [0.1, 0.1, 0.1]},
        {
            "name": "b",
            "parent": "a",
            "joint": {"name": "j_b", "axis": [0, 1, 0], "origin": [0.5, 0, 0]},
            "mass": 1.0,
            "inertia": [0.1, 0.1, 0.1],
        },
    ],
}


def _chain(**changes):
    doc = copy.deepcopy(CHAIN)
    doc.update(changes)
    return doc


def test_humanoid_layout(humanoid):
    body, tree, limits = humanoid

    assert tree.floating_base
    assert tree.nq == BASE_DOF + 16
    assert tree.joint_names[:BASE_DOF] == ("base_x", "base_y", "base_z", "base_roll", "base_pitch", "base_yaw")
    assert len(limits.joint_names) == 16
    assert np.array_equal(tree.actuated_indices, np.arange(BASE_DOF, tree.nq))
    knee = limits.joint_names.index("l_knee")
    assert limits.tau_max[knee] == pytest.approx(67.0)
    assert limits.tau_max[limits.joint_names.index("l_ankle")] == pytest.approx(33.5)
    assert len(tree.feet) == 2 and len(tree.hands) == 2


def test_humanoid_lumped_parameters(humanoid):
    body, tree, _ = humanoid

    assert body.m_ub == pytest.approx(17.0)
    assert np.allclose(body.I_body, body.I_body.T)
    assert np.linalg.eigvalsh(body.I_body).min() > 0.0
    assert body.hip_offsets[0][1] == pytest.approx(0.09)
    assert body.hip_offsets[1][1] == pytest.approx(-0.09)
    assert body.shoulder_offsets[0][2] == pytest.approx(0.30)
    assert body.foot_toe == pytest.approx(0.09)
    assert body.foot_heel == pytest.approx(0.05)
    assert 0.3 < body.nominal_com_height < 0.8


def test_left_parts_are_listed_first(humanoid):
    _, tree, _ = humanoid
    kin = rigid_body.forward_kinematics(tree, tree.nominal_q)
    left_foot = kin.point(tree.feet[0].link, tree.feet[0].sole)
    right_hand = kin.point(tree.hands[1].link, tree.hands[1].point)
    assert left_foot[1] > 0.0
    assert right_hand[1] < 0.0


def test_fixed_base_chain_parses():
    body, tree, limits = parse_model(_chain())
    assert not tree.floating_base
    assert tree.nq == 2
    assert limits.joint_names == ("j_a", "j_b")
    assert body.m_ub == pytest.approx(2.0)


@pytest.mark.parametrize(
    "doc, message",
    [
        (
            _chain(links=CHAIN["links"] + [{"name": "a", "mass": 1.0, "inertia": [1, 1, 1], "parent": "b"}]),
            "Duplicate",
        ),
        (
            _chain(
                links=[CHAIN["links"][0]]
                + [
                    {"name": "b", "parent": "c", "joint": {"name": "j_b", "axis": [1, 0, 0]}, "mass": 1, "inertia": []},
                    {"name": "c", "parent": "b", "joint": {"name": "j_c", "axis": [1, 0, 0]}, "mass": 1, "inertia": []},
                ]
            ),
            "Cycle",
        ),
        (_chain(links=[dict(CHAIN["links"][1], parent="ghost")] + [CHAIN["links"][0]]), "Missing link"),
        (_chain(links=[dict(CHAIN["links"][0], mass=0.0), CHAIN["links"][1]]), "positive mass"),
        (_chain(links=[dict(CHAIN["links"][0], inertia=[1, 2, 3, 0, 1, 0, 0, 0, 1]), CHAIN["links"][1]]), "symmetric"),
        (_chain(nominal_posture={"nope": 0.1}), "unknown joint"),
        (_chain(actuator_overrides={"nope": {"torque": 1.0}}), "unknown joints"),
        (_chain(colour="red"), "Invalid model"),
    ],
)
def test_malformed_models_raise(doc, message):
    with pytest.raises(ModelFileError, match=message):
        parse_model(doc)


def test_load_model_reports_missing_and_unparsable_files(tmp_path):
    with pytest.raises(ModelFileError, match="not found"):
        load_model(tmp_path / "missing.yaml")
    broken = tmp_path / "broken.yaml"
    broken.write_text("links: [unclosed\n", encoding="utf-8")
    with pytest.raises(ModelFileError):
        load_model(broken)


def test_combined_body_of_two_point_masses():
    com = combined_com([0, 0, 0], 1.0, [1, 0, 0], 1.0)
    assert np.allclose(com, [0.5, 0.0, 0.0])
    inertia = combined_inertia(np.zeros((3, 3)), 1.0, [0, 0, 0], np.zeros((3, 3)), 1.0, [1, 0, 0])
    assert np.allclose(inertia, np.diag([0.0, 0.5, 0.5]))
    with pytest.raises(ValueError):
        combined_com([0, 0, 0], 0.0, [1, 0, 0], 0.0)


def test_solid_object_inertia():
    sphere = ObjectParams.solid(2.0, "sphere", 0.2)
    assert np.allclose(sphere.inertia, np.eye(3) * 0.008)
    box = ObjectParams.solid(6.0, "box", 0.2)
    assert np.allclose(box.inertia, np.eye(3) * 0.04)
    assert box.half_height == pytest.approx(0.1)
    assert ObjectParams.solid(0.0, "box", 0.2).mass == 0.0
    with pytest.raises(ValueError):
        ObjectParams.solid(-1.0, "box", 0.2)


def test_payload_merges_into_host_link(humanoid):
    _, tree, _ = humanoid
    hand_link = tree.hands[0].link
    loaded = tree.with_payload(hand_link, 4.0, np.zeros(3), np.eye(3) * 0.01)
    assert loaded.total_mass == pytest.approx(tree.total_mass + 4.0)
    assert tree.with_payload(hand_link, 0.0, np.zeros(3), np.zeros((3, 3))) is tree
