from __future__ import annotations

import math

import numpy as np
import pytest

from dynamics.errors import SingularityError
from dynamics.spatial_math import (
    as_vec3,
    euler_rate_matrix,
    euler_rates,
    matrix_exponential,
    rot_x,
    rot_z,
    rotation_matrix,
    rotation_to_euler,
    skew,
)


def test_skew_matches_cross_product(rng):
    for _ in range(10):
        v, w = rng.normal(size=3), rng.normal(size=3)
        assert np.allclose(skew(v) @ w, np.cross(v, w))
        assert np.allclose(skew(v), -skew(v).T)


def test_rotation_matrix_is_orthonormal_and_invertible(rng):
    for _ in range(20):
        theta = np.array([rng.uniform(-math.pi, math.pi), rng.uniform(-1.2, 1.2), rng.uniform(-math.pi, math.pi)])
        R = rotation_matrix(theta)
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.isclose(np.linalg.det(R), 1.0)
        assert np.allclose(rotation_to_euler(R), theta, atol=1e-10)


def test_euler_rate_matrix_maps_rates_to_world_angular_velocity(rng):
    theta = np.array([0.2, -0.3, 0.9])
    rates = rng.normal(size=3)
    h = 1e-6
    R_dot = (rotation_matrix(theta + h * rates) - rotation_matrix(theta - h * rates)) / (2 * h)
    omega_skew = R_dot @ rotation_matrix(theta).T
    omega = np.array([omega_skew[2, 1], omega_skew[0, 2], omega_skew[1, 0]])

    assert np.allclose(euler_rate_matrix(theta) @ rates, omega, atol=1e-7)
    assert np.allclose(euler_rates(theta, omega), rates, atol=1e-6)


def test_euler_rate_matrix_refuses_pitch_inside_guard():
    with pytest.raises(SingularityError) as excinfo:
        euler_rate_matrix([0.0, 1.55, 0.0])
    assert excinfo.value.pitch == pytest.approx(1.55)
    # a tighter guard accepts the same pitch
    assert euler_rate_matrix([0.0, 1.55, 0.0], guard=1e-3).shape == (3, 3)


def test_matrix_exponential_of_skew_is_a_rotation():
    omega = np.array([0.0, 0.0, 1.0])
    assert np.allclose(matrix_exponential(skew(omega), 0.3), rot_z(0.3))
    assert np.allclose(matrix_exponential(skew([1.0, 0.0, 0.0]), -0.7), rot_x(-0.7))


def test_matrix_exponential_of_nilpotent_block():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert np.allclose(matrix_exponential(A, 2.5), [[1.0, 2.5], [0.0, 1.0]])
    with pytest.raises(ValueError):
        matrix_exponential(np.zeros((2, 3)))


def test_as_vec3_rejects_bad_input():
    assert np.array_equal(as_vec3([1, 2, 3]), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        as_vec3([1.0, 2.0])
    with pytest.raises(ValueError):
        as_vec3([1.0, np.nan, 0.0])
