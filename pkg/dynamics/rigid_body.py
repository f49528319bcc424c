"""Kinematics, Jacobians, CRBA and RNEA for kinematic trees.

Spatial vectors are ``[angular; linear]`` and every quantity is expressed in
world coordinates about the world origin, so the recursions need no
coordinate transforms: child forces are added to their parents directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from dynamics.robot_model import KinematicTree
from dynamics.spatial_math import FloatArray, skew

PointForce = Tuple[int, FloatArray, FloatArray]  # (link, world point, world force)


def crm(v: FloatArray) -> FloatArray:
    """Spatial cross-product operator for motion vectors."""

    w, u = skew(v[:3]), skew(v[3:])
    out = np.zeros((6, 6))
    out[:3, :3] = w
    out[3:, :3] = u
    out[3:, 3:] = w
    return out


def crf(v: FloatArray) -> FloatArray:
    """Spatial cross-product operator for force vectors."""

    return -crm(v).T


def mcI(mass: float, com: FloatArray, inertia: FloatArray) -> FloatArray:
    """Spatial inertia from mass, CoM and rotational inertia about the CoM."""

    C = skew(com)
    out = np.zeros((6, 6))
    out[:3, :3] = inertia + mass * C @ C.T
    out[:3, 3:] = mass * C
    out[3:, :3] = mass * C.T
    out[3:, 3:] = mass * np.eye(3)
    return out


def _axis_rotation(axis: FloatArray, angle: float) -> FloatArray:
    K = skew(axis)
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


@dataclass(frozen=True, eq=False)
class TreeKinematics:
    rotations: FloatArray  # (n, 3, 3) link frame -> world
    origins: FloatArray  # (n, 3) link frame origins
    coms: FloatArray  # (n, 3) link CoMs in world
    motion_axes: FloatArray  # (n, 6) joint motion subspace in world coordinates
    velocities: Optional[FloatArray] = None  # (n, 6) spatial velocities

    def point(self, link: int, local: FloatArray) -> FloatArray:
        return self.origins[link] + self.rotations[link] @ local

    def point_velocity(self, link: int, point: FloatArray) -> FloatArray:
        if self.velocities is None:
            raise ValueError("kinematics were computed without joint velocities")
        v = self.velocities[link]
        return v[3:] + np.cross(v[:3], point)

    def angular_velocity(self, link: int) -> FloatArray:
        if self.velocities is None:
            raise ValueError("kinematics were computed without joint velocities")
        return self.velocities[link][:3].copy()


def forward_kinematics(tree: KinematicTree, q: FloatArray, qd: Optional[FloatArray] = None) -> TreeKinematics:
    n = tree.nq
    q = np.asarray(q, dtype=float)
    if q.shape != (n,):
        raise ValueError(f"q must have shape ({n},), got {q.shape}")
    rotations = np.empty((n, 3, 3))
    origins = np.empty((n, 3))
    coms = np.empty((n, 3))
    axes = np.empty((n, 6))
    velocities = np.empty((n, 6)) if qd is not None else None

    for i, link in enumerate(tree.links):
        if link.parent < 0:
            R_parent, o_parent = np.eye(3), np.zeros(3)
        else:
            R_parent, o_parent = rotations[link.parent], origins[link.parent]
        angle = q[link.q_index]
        axis_world = R_parent @ link.axis
        if link.joint_type == "revolute":
            origin = o_parent + R_parent @ link.origin
            rotation = R_parent @ _axis_rotation(link.axis, angle)
            axes[i, :3] = axis_world
            axes[i, 3:] = np.cross(origin, axis_world)
        else:
            origin = o_parent + R_parent @ (link.origin + link.axis * angle)
            rotation = R_parent
            axes[i, :3] = 0.0
            axes[i, 3:] = axis_world
        rotations[i] = rotation
        origins[i] = origin
        coms[i] = origin + rotation @ link.com
        if velocities is not None:
            parent_v = velocities[link.parent] if link.parent >= 0 else np.zeros(6)
            velocities[i] = parent_v + axes[i] * qd[link.q_index]

    return TreeKinematics(rotations=rotations, origins=origins, coms=coms, motion_axes=axes, velocities=velocities)


def spatial_inertias(tree: KinematicTree, kin: TreeKinematics) -> FloatArray:
    out = np.zeros((tree.nq, 6, 6))
    for i, link in enumerate(tree.links):
        if link.mass <= 0.0:
            continue
        R = kin.rotations[i]
        out[i] = mcI(link.mass, kin.coms[i], R @ link.inertia @ R.T)
    return out


def mass_matrix(tree: KinematicTree, kin: TreeKinematics) -> FloatArray:
    """Composite-rigid-body algorithm."""

    n = tree.nq
    H = np.zeros((n, n))
    composite = spatial_inertias(tree, kin)
    for i in range(n - 1, -1, -1):
        parent = tree.links[i].parent
        if parent >= 0:
            composite[parent] += composite[i]
    for i, link in enumerate(tree.links):
        F = composite[i] @ kin.motion_axes[i]
        qi = link.q_index
        H[qi, qi] = kin.motion_axes[i] @ F + link.armature
        for j in tree.support(i)[1:]:
            qj = tree.links[j].q_index
            H[qi, qj] = H[qj, qi] = kin.motion_axes[j] @ F
    return H


def _spatial_point_force(point: FloatArray, force: FloatArray) -> FloatArray:
    return np.concatenate([np.cross(point, force), force])


def inverse_dynamics(
    tree: KinematicTree,
    q: FloatArray,
    qd: FloatArray,
    qdd: FloatArray,
    *,
    gravity: bool = True,
    external: Iterable[PointForce] = (),
    kin: Optional[TreeKinematics] = None,
) -> FloatArray:
    """Recursive Newton-Euler: generalized forces producing ``qdd``."""

    if kin is None or kin.velocities is None:
        kin = forward_kinematics(tree, q, qd)
    n = tree.nq
    accelerations = np.zeros((n, 6))
    forces = np.zeros((n, 6))
    inertias = spatial_inertias(tree, kin)
    root_acc = np.zeros(6)
    if gravity:
        root_acc[3:] = -tree.gravity

    for i, link in enumerate(tree.links):
        S = kin.motion_axes[i]
        v = kin.velocities[i]
        parent_acc = accelerations[link.parent] if link.parent >= 0 else root_acc
        vJ = S * qd[link.q_index]
        accelerations[i] = parent_acc + S * qdd[link.q_index] + crm(v) @ vJ
        forces[i] = inertias[i] @ accelerations[i] + crf(v) @ (inertias[i] @ v)

    for link_index, point, force in external:
        forces[link_index] -= _spatial_point_force(np.asarray(point, float), np.asarray(force, float))

    tau = np.zeros(n)
    for i in range(n - 1, -1, -1):
        link = tree.links[i]
        tau[link.q_index] = kin.motion_axes[i] @ forces[i] + link.armature * qdd[link.q_index]
        if link.parent >= 0:
            forces[link.parent] += forces[i]
    return tau


def forward_dynamics(
    tree: KinematicTree,
    q: FloatArray,
    qd: FloatArray,
    tau: FloatArray,
    *,
    external: Sequence[PointForce] = (),
    kin: Optional[TreeKinematics] = None,
) -> FloatArray:
    """Solve ``M qdd = tau - h(q, qd) + J^T f_ext`` with a Cholesky factorization."""

    if kin is None or kin.velocities is None:
        kin = forward_kinematics(tree, q, qd)
    M = mass_matrix(tree, kin)
    bias = inverse_dynamics(tree, q, qd, np.zeros(tree.nq), external=external, kin=kin)
    return cho_solve(cho_factor(M), np.asarray(tau, float) - bias)


def point_jacobian(tree: KinematicTree, kin: TreeKinematics, link: int, point: FloatArray) -> FloatArray:
    """Linear Jacobian (3 x nq) of a world point rigidly attached to ``link``."""

    J = np.zeros((3, tree.nq))
    for j in tree.support(link):
        S = kin.motion_axes[j]
        J[:, tree.links[j].q_index] = S[3:] + np.cross(S[:3], point)
    return J


def angular_jacobian(tree: KinematicTree, kin: TreeKinematics, link: int) -> FloatArray:
    J = np.zeros((3, tree.nq))
    for j in tree.support(link):
        J[:, tree.links[j].q_index] = kin.motion_axes[j][:3]
    return J


def bias_accelerations(tree: KinematicTree, kin: TreeKinematics, qd: FloatArray) -> FloatArray:
    """Spatial link accelerations for ``qdd = 0`` and no gravity (the J-dot q-dot terms)."""

    if kin.velocities is None:
        raise ValueError("bias accelerations need joint velocities")
    out = np.zeros((tree.nq, 6))
    for i, link in enumerate(tree.links):
        parent_acc = out[link.parent] if link.parent >= 0 else np.zeros(6)
        out[i] = parent_acc + crm(kin.velocities[i]) @ (kin.motion_axes[i] * qd[link.q_index])
    return out


def point_bias_acceleration(kin: TreeKinematics, bias: FloatArray, link: int, point: FloatArray) -> FloatArray:
    """Classical acceleration of a body point when ``qdd = 0``."""

    omega = kin.velocities[link][:3]
    point_velocity = kin.point_velocity(link, point)
    return bias[link][3:] + np.cross(bias[link][:3], point) + np.cross(omega, point_velocity)


def center_of_mass(tree: KinematicTree, kin: TreeKinematics) -> FloatArray:
    masses = np.array([link.mass for link in tree.links])
    return masses @ kin.coms / masses.sum()


def com_jacobian(tree: KinematicTree, kin: TreeKinematics) -> FloatArray:
    J = np.zeros((3, tree.nq))
    total = 0.0
    for i, link in enumerate(tree.links):
        if link.mass <= 0.0:
            continue
        J += link.mass * point_jacobian(tree, kin, i, kin.coms[i])
        total += link.mass
    return J / total


def com_bias_acceleration(tree: KinematicTree, kin: TreeKinematics, bias: FloatArray) -> FloatArray:
    acc = np.zeros(3)
    total = 0.0
    for i, link in enumerate(tree.links):
        if link.mass <= 0.0:
            continue
        acc += link.mass * point_bias_acceleration(kin, bias, i, kin.coms[i])
        total += link.mass
    return acc / total


def kinetic_energy(tree: KinematicTree, kin: TreeKinematics, qd: FloatArray) -> float:
    M = mass_matrix(tree, kin)
    return 0.5 * float(qd @ M @ qd)


def potential_energy(tree: KinematicTree, kin: TreeKinematics) -> float:
    masses = np.array([link.mass for link in tree.links])
    return -float(masses @ (kin.coms @ tree.gravity))
