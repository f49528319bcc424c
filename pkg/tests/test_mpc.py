from __future__ import annotations

import numpy as np
import pytest

from control.contact_schedule import STANDING, ContactFlags
from control.mpc import (
    Command,
    HorizonGeometry,
    MpcConfig,
    MpcController,
    ReferenceTrajectory,
    build_qp,
    combined_horizon,
    constraint_margin,
    input_reference,
    make_reference,
    robot_com_from_combined,
    solve_mpc,
)
from dynamics.errors import MpcInfeasibleError
from dynamics.robot_model import combined_com
from dynamics.srbd_dynamics import F1, F2, FEXT, M2, NX, srbd_step_oracle

MASS = 17.0
I_BODY = np.diag([0.3, 0.25, 0.12])
FEET = ([0.0, 0.09, 0.0], [0.0, -0.09, 0.0])


def _x0(height: float = 0.55) -> np.ndarray:
    x = np.zeros(NX)
    x[5] = height
    x[14] = -9.81
    return x


def _solve(cfg: MpcConfig, flags, object_mass: float = 0.0, object_offset=(0.0, 0.0, 0.0)):
    x0 = _x0()
    reference = make_reference(Command(), x0, cfg)
    geometry = HorizonGeometry.constant(cfg.horizon, FEET, MASS, I_BODY, object_offset, object_mass)
    problem = build_qp(x0, reference, flags, geometry, cfg)
    return problem, solve_mpc(problem, cfg)


def test_config_validates_weights():
    with pytest.raises(ValueError):
        MpcConfig(q_weights=(1.0,) * 3)
    with pytest.raises(ValueError):
        MpcConfig(unknown=1)
    # crossed force bounds are a solver-level infeasibility, not a config error
    assert MpcConfig(f_min=600.0, f_max=500.0).f_min == 600.0


def test_reference_rolls_out_command():
    cfg = MpcConfig(horizon=5)
    x0 = _x0()
    x0[2] = 0.1
    reference = make_reference(Command(velocity=(0.5, 0.0), yaw_rate=0.2, height=0.6), x0, cfg)
    assert reference.k == 5
    assert reference.x_ref[0, 2] == pytest.approx(0.1 + 0.2 * 0.03)
    assert np.allclose(reference.x_ref[:, 5], 0.6)
    assert np.allclose(reference.x_ref[:, 8], 0.2)
    assert np.linalg.norm(reference.x_ref[-1, 9:11]) == pytest.approx(0.5)
    assert reference.x_ref[-1, 3] > reference.x_ref[0, 3] > 0.0

    held = make_reference(Command(hold_xy=(1.0, -1.0)), x0, cfg)
    assert np.allclose(held.x_ref[:, 3:5], [1.0, -1.0])

    bad = reference.x_ref.copy()
    bad[:, 14] = 0.0
    with pytest.raises(ValueError, match="gravity"):
        ReferenceTrajectory(x_ref=bad)


def test_standing_splits_weight_between_feet():
    cfg = MpcConfig(horizon=10)
    _, solution = _solve(cfg, [STANDING] * 10)
    half = MASS * 9.81 / 2.0
    assert solution.U[0, F1][2] == pytest.approx(half, abs=1.0)
    assert solution.U[0, F2][2] == pytest.approx(half, abs=1.0)
    assert constraint_margin(solution, [STANDING] * 10, cfg) >= -1e-6
    assert solution.u.shape == (10,)


def test_swing_foot_inputs_are_pinned():
    cfg = MpcConfig(horizon=6)
    flags = [ContactFlags(c1=1, c2=0)] * 3 + [STANDING] * 3
    _, solution = _solve(cfg, flags)
    assert np.allclose(solution.U[:3, F2], 0.0, atol=1e-9)
    assert np.allclose(solution.U[:3, M2], 0.0, atol=1e-9)
    assert np.all(solution.U[:, F1][:, 2] >= cfg.f_min - 1e-6)


def test_object_force_follows_model_variant():
    flags = [ContactFlags(e=1)] * 5
    _, external = _solve(MpcConfig(horizon=5), flags, object_mass=3.0, object_offset=(0.3, 0.0, 0.0))
    assert np.allclose(external.U[:, FEXT], [0.0, 0.0, 3.0 * 9.81], atol=1e-8)
    assert np.allclose(external.f_ext, [0.0, 0.0, 3.0 * 9.81], atol=1e-8)

    _, merged = _solve(MpcConfig(horizon=5, model_variant=1), flags, object_mass=3.0)
    assert np.allclose(merged.U[:, FEXT], 0.0, atol=1e-9)


def test_crossed_force_bounds_report_the_violated_class():
    cfg = MpcConfig(horizon=4, f_min=600.0, f_max=500.0)
    with pytest.raises(MpcInfeasibleError) as info:
        _solve(cfg, [STANDING] * 4)
    assert "fz_bounds" in info.value.classes


def test_first_prediction_matches_nonlinear_step():
    cfg = MpcConfig(horizon=8)
    problem, solution = _solve(cfg, [STANDING] * 8)
    exact = srbd_step_oracle(problem.x0, solution.U[0], I_BODY, MASS, FEET, np.zeros(3), STANDING, cfg.dt)
    assert np.max(np.abs(solution.states[0] - exact)) < 1e-3


def test_combined_horizon_merges_object_into_body():
    geometry = HorizonGeometry.constant(2, FEET, MASS, I_BODY, (0.3, 0.0, 0.0), object_mass=3.0)
    merged = combined_horizon(geometry, [STANDING, ContactFlags(e=1)], np.zeros((3, 3)), [0.0, 0.0])
    assert merged.mass.tolist() == [MASS, MASS + 3.0]
    assert np.allclose(merged.inertia[0], I_BODY)
    assert merged.inertia[1][1, 1] > I_BODY[1, 1]
    assert merged.inertia[1][0, 0] == pytest.approx(I_BODY[0, 0])
    assert merged.object_mass == 0.0


def test_robot_com_inverts_combined_com():
    p_c, p_o = np.array([0.0, 0.0, 0.6]), np.array([0.35, 0.1, 0.8])
    combined = combined_com(p_c, MASS, p_o, 4.0)
    assert np.allclose(robot_com_from_combined(combined, MASS, p_o, 4.0), p_c)
    assert np.allclose(robot_com_from_combined(p_c, MASS, p_o, 0.0), p_c)


def test_controller_reuses_warm_start():
    cfg = MpcConfig(horizon=8)
    controller = MpcController(cfg, MASS, I_BODY)
    footholds = np.repeat(np.array(FEET)[None], cfg.horizon, axis=0)
    first = controller.update(0.0, _x0(), Command(), [STANDING] * 8, footholds)
    second = controller.update(0.03, _x0(), Command(), [STANDING] * 8, footholds)
    assert first.feasible and second.status == "optimal"
    assert second.iterations <= first.iterations
    assert second.predicted_com.shape == (8, 3)

    controller.reset()
    assert controller.last_solution is None


@pytest.mark.parametrize("horizon", [1, 5, 10, 20])
def test_standing_supports_full_weight_at_any_horizon(horizon):
    cfg = MpcConfig(horizon=horizon)
    _, solution = _solve(cfg, [STANDING] * horizon)
    half = MASS * 9.81 / 2.0
    assert solution.status == "optimal"
    assert solution.U[0, F1][2] == pytest.approx(half, abs=1.0)
    assert solution.U[0, F2][2] == pytest.approx(half, abs=1.0)


def test_zero_input_reference_still_supports_weight_at_default_horizon():
    cfg = MpcConfig(horizon=20, input_reference="zero")
    _, solution = _solve(cfg, [STANDING] * 20)
    half = MASS * 9.81 / 2.0
    assert solution.U[0, F1][2] == pytest.approx(half, abs=1.0)
    assert solution.U[0, F2][2] == pytest.approx(half, abs=1.0)


def test_carried_object_load_reaches_the_feet():
    cfg = MpcConfig(horizon=10)
    _, solution = _solve(cfg, [ContactFlags(e=1)] * 10, object_mass=4.0, object_offset=(0.3, 0.0, 0.0))
    support = solution.U[0, F1][2] + solution.U[0, F2][2]
    assert support == pytest.approx((MASS + 4.0) * 9.81, abs=1.0)


def test_input_reference_matches_static_balance():
    cfg = MpcConfig(horizon=3)
    geometry = HorizonGeometry.constant(3, FEET, MASS, I_BODY, (0.3, 0.0, 0.0), 2.0)
    x_lin = np.repeat(_x0()[None], 3, axis=0)
    flags = [STANDING, ContactFlags(c1=1, c2=0, e=1), ContactFlags(c1=0, c2=0)]
    U_ref = input_reference(x_lin, flags, geometry, cfg)

    assert U_ref[0, F1][2] + U_ref[0, F2][2] == pytest.approx(MASS * 9.81)
    assert U_ref[1, F1][2] == pytest.approx((MASS + 2.0) * 9.81)
    assert np.allclose(U_ref[1, F2], 0.0)
    assert np.allclose(U_ref[1, FEXT], [0.0, 0.0, 2.0 * 9.81])
    assert np.allclose(U_ref[2], 0.0)
    assert np.allclose(input_reference(x_lin, flags, geometry, MpcConfig(horizon=3, input_reference="zero")), 0.0)
