from __future__ import annotations

import math

import numpy as np
import pytest

from dynamics import rigid_body


def _random_state(tree, rng, scale=0.3):
    q = tree.nominal_q + rng.normal(scale=scale, size=tree.nq)
    qd = rng.normal(size=tree.nq)
    return q, qd


def test_pendulum_gravity_torque_and_inertia(pendulum):
    _, tree, _ = pendulum
    zero = np.zeros(1)

    tau = rigid_body.inverse_dynamics(tree, zero, zero, zero)
    assert tau[0] == pytest.approx(9.81 * 0.5, rel=1e-9)

    vertical = np.array([math.pi / 2])
    assert rigid_body.inverse_dynamics(tree, vertical, zero, zero)[0] == pytest.approx(0.0, abs=1e-9)

    M = rigid_body.mass_matrix(tree, rigid_body.forward_kinematics(tree, zero))
    assert M[0, 0] == pytest.approx(1.0 / 3.0, abs=1e-8)
    qdd = rigid_body.forward_dynamics(tree, zero, zero, zero)
    assert qdd[0] == pytest.approx(-3.0 * 9.81 / 2.0, rel=1e-7)


def test_double_pendulum_mass_matrix_closed_form(double_pendulum):
    _, tree, _ = double_pendulum
    for q2 in (0.0, 0.7, -1.9):
        q = np.array([0.3, q2])
        M = rigid_body.mass_matrix(tree, rigid_body.forward_kinematics(tree, q))
        c = math.cos(q2)
        expected = np.array(
            [
                [5.0 / 3.0 + c, 1.0 / 3.0 + 0.5 * c],
                [1.0 / 3.0 + 0.5 * c, 1.0 / 3.0],
            ]
        )
        assert np.allclose(M, expected, atol=1e-7)


def test_crba_matches_rnea_on_humanoid(humanoid, rng):
    _, tree, _ = humanoid
    for _ in range(3):
        q, qd = _random_state(tree, rng)
        qdd = rng.normal(size=tree.nq)
        kin = rigid_body.forward_kinematics(tree, q, qd)
        M = rigid_body.mass_matrix(tree, kin)
        full = rigid_body.inverse_dynamics(tree, q, qd, qdd, kin=kin)
        bias = rigid_body.inverse_dynamics(tree, q, qd, np.zeros(tree.nq), kin=kin)

        assert np.allclose(M, M.T)
        assert np.linalg.eigvalsh(M).min() > 0.0
        assert np.allclose(full - bias, M @ qdd, atol=1e-9)
        assert np.allclose(rigid_body.forward_dynamics(tree, q, qd, full), qdd, atol=1e-8)


def test_external_point_force_enters_as_jacobian_transpose(humanoid, rng):
    _, tree, _ = humanoid
    q, qd = _random_state(tree, rng)
    kin = rigid_body.forward_kinematics(tree, q, qd)
    foot = tree.feet[0]
    point = kin.point(foot.link, foot.sole)
    force = np.array([3.0, -2.0, 40.0])
    zero = np.zeros(tree.nq)

    free = rigid_body.inverse_dynamics(tree, q, qd, zero, kin=kin)
    pushed = rigid_body.inverse_dynamics(tree, q, qd, zero, kin=kin, external=[(foot.link, point, force)])
    J = rigid_body.point_jacobian(tree, kin, foot.link, point)
    assert np.allclose(free - pushed, J.T @ force, atol=1e-9)


def test_point_jacobian_and_bias_match_finite_differences(humanoid, rng):
    _, tree, _ = humanoid
    q, qd = _random_state(tree, rng)
    hand = tree.hands[0]
    h = 1e-6

    def point_at(qq):
        return rigid_body.forward_kinematics(tree, qq).point(hand.link, hand.point)

    def velocity_at(qq):
        kin = rigid_body.forward_kinematics(tree, qq, qd)
        return kin.point_velocity(hand.link, kin.point(hand.link, hand.point))

    kin = rigid_body.forward_kinematics(tree, q, qd)
    point = kin.point(hand.link, hand.point)
    J = rigid_body.point_jacobian(tree, kin, hand.link, point)
    assert np.allclose(J @ qd, (point_at(q + h * qd) - point_at(q - h * qd)) / (2 * h), atol=1e-6)

    bias = rigid_body.bias_accelerations(tree, kin, qd)
    analytic = rigid_body.point_bias_acceleration(kin, bias, hand.link, point)
    numeric = (velocity_at(q + h * qd) - velocity_at(q - h * qd)) / (2 * h)
    assert np.allclose(analytic, numeric, atol=1e-5)


def test_com_jacobian_matches_finite_differences(humanoid, rng):
    _, tree, _ = humanoid
    q, qd = _random_state(tree, rng)
    h = 1e-6

    def com_at(qq):
        return rigid_body.center_of_mass(tree, rigid_body.forward_kinematics(tree, qq))

    kin = rigid_body.forward_kinematics(tree, q, qd)
    J = rigid_body.com_jacobian(tree, kin)
    assert np.allclose(J @ qd, (com_at(q + h * qd) - com_at(q - h * qd)) / (2 * h), atol=1e-6)


def test_energy_terms_for_pendulum(pendulum):
    _, tree, _ = pendulum
    q, qd = np.array([0.0]), np.array([2.0])
    kin = rigid_body.forward_kinematics(tree, q, qd)
    assert rigid_body.kinetic_energy(tree, kin, qd) == pytest.approx(0.5 * (1.0 / 3.0) * 4.0, rel=1e-7)
    lifted = rigid_body.forward_kinematics(tree, np.array([math.pi / 2]))
    assert rigid_body.potential_energy(tree, lifted) - rigid_body.potential_energy(tree, kin) == pytest.approx(
        9.81 * 0.5
    )


def test_forward_kinematics_rejects_wrong_shape(pendulum):
    _, tree, _ = pendulum
    with pytest.raises(ValueError):
        rigid_body.forward_kinematics(tree, np.zeros(3))
