"""Robot and object parameters, kinematic trees and the combined-body (Model 1) helpers."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from dynamics.errors import ModelFileError
from dynamics.spatial_math import FloatArray, as_vec3

logger = logging.getLogger(__name__)

GRAVITY = 9.81
BASE_JOINTS: Tuple[Tuple[str, str, Tuple[float, float, float], int], ...] = (
    ("base_x", "prismatic", (1.0, 0.0, 0.0), 0),
    ("base_y", "prismatic", (0.0, 1.0, 0.0), 1),
    ("base_z", "prismatic", (0.0, 0.0, 1.0), 2),
    ("base_yaw", "revolute", (0.0, 0.0, 1.0), 5),
    ("base_pitch", "revolute", (0.0, 1.0, 0.0), 4),
    ("base_roll", "revolute", (1.0, 0.0, 0.0), 3),
)
BASE_DOF = 6


# ---------------------------------------------------------------------------
# Model 1 helpers
# ---------------------------------------------------------------------------


def shift_inertia(inertia: FloatArray, mass: float, offset: FloatArray) -> FloatArray:
    """Parallel-axis shift of a CoM inertia to a point at ``-offset`` from the CoM."""

    d = as_vec3(offset, "offset")
    return np.asarray(inertia, dtype=float) + mass * (float(d @ d) * np.eye(3) - np.outer(d, d))


def combined_com(p_c, m_ub: float, p_o, m_o: float) -> FloatArray:
    total = m_ub + m_o
    if total <= 0.0:
        raise ValueError("combined_com requires a positive total mass")
    return (m_ub * as_vec3(p_c, "p_c") + m_o * as_vec3(p_o, "p_o")) / total


def combined_inertia(I_ub, m_ub: float, p_c, I_o, m_o: float, p_o) -> FloatArray:
    """Inertia of the merged body about the combined CoM (world axes)."""

    com = combined_com(p_c, m_ub, p_o, m_o)
    merged = shift_inertia(I_ub, m_ub, as_vec3(p_c) - com) + shift_inertia(I_o, m_o, as_vec3(p_o) - com)
    return 0.5 * (merged + merged.T)


def _inertia_matrix(values: Sequence[float]) -> FloatArray:
    data = np.asarray(values, dtype=float).reshape(-1)
    if data.size == 3:
        matrix = np.diag(data)
    elif data.size == 9:
        matrix = data.reshape(3, 3)
    else:
        raise ValueError("inertia must list 3 diagonal or 9 full entries")
    if not np.allclose(matrix, matrix.T, atol=1e-12):
        raise ValueError("inertia must be symmetric")
    return matrix


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ObjectParams:
    mass: float
    inertia: FloatArray
    com_offset: FloatArray = field(default_factory=lambda: np.zeros(3))
    shape: Literal["box", "sphere"] = "box"
    half_height: float = 0.1

    def __post_init__(self) -> None:
        if self.mass < 0.0:
            raise ValueError("object mass must be non-negative")
        eigenvalues = np.linalg.eigvalsh(0.5 * (self.inertia + self.inertia.T))
        if eigenvalues.min() < -1e-12:
            raise ValueError("object inertia must be positive semi-definite")

    @classmethod
    def solid(cls, mass: float, shape: Literal["box", "sphere"], size: float) -> "ObjectParams":
        """Uniform cube of edge ``size`` or sphere of diameter ``size``."""

        if shape == "sphere":
            radius = 0.5 * size
            inertia = np.eye(3) * 0.4 * mass * radius**2
        else:
            inertia = np.eye(3) * mass * size**2 / 6.0
        return cls(mass=mass, inertia=inertia, shape=shape, half_height=0.5 * size)


@dataclass(frozen=True, eq=False)
class FootFrame:
    link: int
    sole: FloatArray
    toe: float
    heel: float

    def contact_points(self) -> Tuple[FloatArray, FloatArray]:
        return self.sole + np.array([self.toe, 0.0, 0.0]), self.sole - np.array([self.heel, 0.0, 0.0])


@dataclass(frozen=True, eq=False)
class HandFrame:
    link: int
    point: FloatArray


@dataclass(frozen=True, eq=False)
class Link:
    name: str
    parent: int
    joint_name: str
    joint_type: Literal["revolute", "prismatic"]
    axis: FloatArray
    origin: FloatArray
    mass: float
    com: FloatArray
    inertia: FloatArray
    q_index: int
    armature: float = 0.0


@dataclass(frozen=True, eq=False)
class ActuatorLimits:
    joint_names: Tuple[str, ...]
    tau_max: FloatArray
    qd_max: FloatArray

    def __post_init__(self) -> None:
        if np.any(self.tau_max <= 0.0) or np.any(self.qd_max <= 0.0):
            raise ValueError("actuator limits must be strictly positive")

    def clip(self, tau: FloatArray) -> FloatArray:
        return np.clip(tau, -self.tau_max, self.tau_max)


@dataclass(frozen=True, eq=False)
class BodyParams:
    """Lumped single-rigid-body parameters used by the horizon controller."""

    m_ub: float
    I_body: FloatArray
    hip_offsets: FloatArray
    shoulder_offsets: FloatArray
    foot_toe: float
    foot_heel: float
    nominal_com_height: float

    def __post_init__(self) -> None:
        if self.m_ub <= 0.0:
            raise ValueError("m_ub must be positive")
        if not np.allclose(self.I_body, self.I_body.T, atol=1e-10) or np.linalg.eigvalsh(self.I_body).min() <= 0:
            raise ValueError("I_body must be symmetric positive-definite")


@dataclass(frozen=True, eq=False)
class KinematicTree:
    name: str
    links: Tuple[Link, ...]
    floating_base: bool
    feet: Tuple[FootFrame, ...] = ()
    hands: Tuple[HandFrame, ...] = ()
    nominal_q: Optional[FloatArray] = None
    gravity: FloatArray = field(default_factory=lambda: np.array([0.0, 0.0, -GRAVITY]))
    _support: Tuple[Tuple[int, ...], ...] = field(init=False, repr=False)
    _index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        support: List[Tuple[int, ...]] = []
        for i, link in enumerate(self.links):
            if link.parent >= i:
                raise ModelFileError(f"Link {link.name!r} appears before its parent")
            chain = (i,) + (support[link.parent] if link.parent >= 0 else ())
            support.append(chain)
        object.__setattr__(self, "_support", tuple(support))
        object.__setattr__(self, "_index", {link.name: i for i, link in enumerate(self.links)})

    @property
    def nq(self) -> int:
        return len(self.links)

    @property
    def total_mass(self) -> float:
        return float(sum(link.mass for link in self.links))

    @property
    def actuated_indices(self) -> np.ndarray:
        start = BASE_DOF if self.floating_base else 0
        return np.arange(start, self.nq)

    @property
    def joint_names(self) -> Tuple[str, ...]:
        order = sorted(self.links, key=lambda link: link.q_index)
        return tuple(link.joint_name for link in order)

    def support(self, link: int) -> Tuple[int, ...]:
        """Link indices from ``link`` back to the root, inclusive."""

        return self._support[link]

    def link_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError as exc:
            raise ModelFileError(f"Unknown link {name!r}") from exc

    def with_payload(self, link: int, mass: float, com, inertia) -> "KinematicTree":
        """Copy of the tree with a rigid payload welded to ``link`` (link-frame com/inertia)."""

        host = self.links[link]
        if mass <= 0.0:
            return self
        merged_mass = host.mass + mass
        merged_com = combined_com(host.com, host.mass, com, mass)
        merged_inertia = combined_inertia(host.inertia, host.mass, host.com, np.asarray(inertia), mass, com)
        links = list(self.links)
        links[link] = replace(host, mass=merged_mass, com=merged_com, inertia=merged_inertia)
        return KinematicTree(
            name=f"{self.name}+payload",
            links=tuple(links),
            floating_base=self.floating_base,
            feet=self.feet,
            hands=self.hands,
            nominal_q=self.nominal_q,
            gravity=self.gravity,
        )


# ---------------------------------------------------------------------------
# Model file schema
# ---------------------------------------------------------------------------

Vec3Tuple = Tuple[float, float, float]


class JointSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    type: Literal["revolute", "prismatic"] = "revolute"
    axis: Vec3Tuple
    origin: Vec3Tuple = (0.0, 0.0, 0.0)
    armature: Optional[float] = Field(default=None, ge=0.0)

    @field_validator("axis")
    @classmethod
    def _unit_axis(cls, value: Vec3Tuple) -> Vec3Tuple:
        norm = float(np.linalg.norm(value))
        if norm < 1e-9:
            raise ValueError("joint axis must be non-zero")
        return tuple(float(v) / norm for v in value)  # type: ignore[return-value]


class LinkSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    parent: Optional[str] = None
    joint: Optional[JointSpec] = None
    mass: float
    com: Vec3Tuple = (0.0, 0.0, 0.0)
    inertia: List[float]


class FootSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    link: str
    sole: Vec3Tuple
    toe: float = Field(gt=0.0)
    heel: float = Field(gt=0.0)


class HandSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    link: str
    point: Vec3Tuple


class ActuatorSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    torque: Optional[float] = Field(default=None, gt=0.0)
    velocity: Optional[float] = Field(default=None, gt=0.0)


class ModelFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = 1
    name: str
    floating_base: bool = False
    armature: float = Field(default=0.0, ge=0.0)
    links: List[LinkSpec]
    feet: List[FootSpec] = Field(default_factory=list)
    hands: List[HandSpec] = Field(default_factory=list)
    actuator_default: ActuatorSpec = Field(default_factory=lambda: ActuatorSpec(torque=33.5, velocity=21.0))
    actuator_overrides: Dict[str, ActuatorSpec] = Field(default_factory=dict)
    nominal_posture: Dict[str, float] = Field(default_factory=dict)


def _topological_order(specs: List[LinkSpec]) -> List[LinkSpec]:
    by_name: Dict[str, LinkSpec] = {}
    for spec in specs:
        if spec.name in by_name:
            raise ModelFileError(f"Duplicate link {spec.name!r}")
        by_name[spec.name] = spec
    for spec in specs:
        if spec.parent == spec.name:
            raise ModelFileError(f"Cycle detected: link {spec.name!r} is its own parent")
        if spec.parent is not None and spec.parent not in by_name:
            raise ModelFileError(f"Missing link {spec.parent!r} (parent of {spec.name!r})")

    ordered: List[LinkSpec] = []
    state: Dict[str, int] = {}  # 1 visiting, 2 done

    def visit(name: str) -> None:
        mark = state.get(name)
        if mark == 2:
            return
        if mark == 1:
            raise ModelFileError(f"Cycle detected through link {name!r}")
        state[name] = 1
        parent = by_name[name].parent
        if parent is not None:
            visit(parent)
        state[name] = 2
        ordered.append(by_name[name])

    for spec in specs:
        visit(spec.name)
    return ordered


def _build_links(doc: ModelFile) -> Tuple[List[Link], Dict[str, int]]:
    ordered = _topological_order(doc.links)
    roots = [spec for spec in ordered if spec.parent is None]
    if len(roots) != 1:
        raise ModelFileError(f"Model must have exactly one root link, found {len(roots)}")

    links: List[Link] = []
    index: Dict[str, int] = {}
    next_q = 0
    if doc.floating_base:
        root = roots[0]
        if root.joint is not None:
            raise ModelFileError("The floating-base root link must not declare a joint")
        parent = -1
        for joint_name, joint_type, axis, q_index in BASE_JOINTS[:-1]:
            links.append(
                Link(
                    name=f"{joint_name}_frame",
                    parent=parent,
                    joint_name=joint_name,
                    joint_type=joint_type,  # type: ignore[arg-type]
                    axis=np.array(axis),
                    origin=np.zeros(3),
                    mass=0.0,
                    com=np.zeros(3),
                    inertia=np.zeros((3, 3)),
                    q_index=q_index,
                )
            )
            parent = len(links) - 1
        next_q = BASE_DOF

    for spec in ordered:
        if spec.mass <= 0.0:
            raise ModelFileError(f"Link {spec.name!r} must have positive mass")
        try:
            inertia = _inertia_matrix(spec.inertia)
        except ValueError as exc:
            raise ModelFileError(f"Link {spec.name!r}: {exc}") from exc
        if spec.parent is None and doc.floating_base:
            joint_name, joint_type, axis, q_index = BASE_JOINTS[-1]
            links.append(
                Link(
                    name=spec.name,
                    parent=len(links) - 1,
                    joint_name=joint_name,
                    joint_type=joint_type,  # type: ignore[arg-type]
                    axis=np.array(axis),
                    origin=np.zeros(3),
                    mass=spec.mass,
                    com=np.array(spec.com, dtype=float),
                    inertia=inertia,
                    q_index=q_index,
                )
            )
        else:
            if spec.joint is None:
                raise ModelFileError(f"Link {spec.name!r} needs a joint")
            parent_index = -1 if spec.parent is None else index[spec.parent]
            armature = spec.joint.armature if spec.joint.armature is not None else doc.armature
            links.append(
                Link(
                    name=spec.name,
                    parent=parent_index,
                    joint_name=spec.joint.name,
                    joint_type=spec.joint.type,
                    axis=np.array(spec.joint.axis, dtype=float),
                    origin=np.array(spec.joint.origin, dtype=float),
                    mass=spec.mass,
                    com=np.array(spec.com, dtype=float),
                    inertia=inertia,
                    q_index=next_q,
                    armature=armature,
                )
            )
            next_q += 1
        index[spec.name] = len(links) - 1
    return links, index


def _body_params(tree: KinematicTree, doc: ModelFile) -> BodyParams:
    from dynamics import rigid_body  # local import: rigid_body depends on this module

    q = tree.nominal_q if tree.nominal_q is not None else np.zeros(tree.nq)
    kin = rigid_body.forward_kinematics(tree, q)
    com = rigid_body.center_of_mass(tree, kin)
    inertia = np.zeros((3, 3))
    for i, link in enumerate(tree.links):
        if link.mass <= 0.0:
            continue
        R = kin.rotations[i]
        inertia += shift_inertia(R @ link.inertia @ R.T, link.mass, kin.coms[i] - com)

    base = tree.links[BASE_DOF - 1] if tree.floating_base else tree.links[0]
    base_index = tree.link_index(base.name)
    children = [link for link in tree.links if link.parent == base_index]
    hips = [child.origin for child in children if child.origin[2] < 0.0]
    shoulders = [child.origin for child in children if child.origin[2] > 0.0]
    foot = doc.feet[0] if doc.feet else None
    sole_heights = [float(kin.origins[f.link][2] + (kin.rotations[f.link] @ f.sole)[2]) for f in tree.feet] or [0.0]
    return BodyParams(
        m_ub=tree.total_mass,
        I_body=0.5 * (inertia + inertia.T),
        hip_offsets=np.array(hips) if hips else np.zeros((0, 3)),
        shoulder_offsets=np.array(shoulders) if shoulders else np.zeros((0, 3)),
        foot_toe=foot.toe if foot else 0.0,
        foot_heel=foot.heel if foot else 0.0,
        nominal_com_height=float(com[2] - min(sole_heights)),
    )


def parse_model(data: dict) -> Tuple[BodyParams, KinematicTree, ActuatorLimits]:
    try:
        doc = ModelFile.model_validate(data)
    except ValidationError as exc:
        raise ModelFileError(f"Invalid model description: {exc}") from exc

    links, index = _build_links(doc)

    def _lookup(name: str) -> int:
        if name not in index:
            raise ModelFileError(f"Missing link {name!r}")
        return index[name]

    feet = tuple(
        FootFrame(link=_lookup(f.link), sole=np.array(f.sole, dtype=float), toe=f.toe, heel=f.heel) for f in doc.feet
    )
    hands = tuple(HandFrame(link=_lookup(h.link), point=np.array(h.point, dtype=float)) for h in doc.hands)

    nominal = np.zeros(len(links))
    joint_to_q = {link.joint_name: link.q_index for link in links}
    for joint, value in doc.nominal_posture.items():
        if joint not in joint_to_q:
            raise ModelFileError(f"nominal_posture references unknown joint {joint!r}")
        nominal[joint_to_q[joint]] = value

    tree = KinematicTree(
        name=doc.name,
        links=tuple(links),
        floating_base=doc.floating_base,
        feet=feet,
        hands=hands,
        nominal_q=nominal,
    )

    first_actuated = BASE_DOF if doc.floating_base else 0
    actuated = [link for link in sorted(links, key=lambda lk: lk.q_index) if link.q_index >= first_actuated]
    tau_max, qd_max = [], []
    for link in actuated:
        override = doc.actuator_overrides.get(link.joint_name, ActuatorSpec())
        tau_max.append(override.torque or doc.actuator_default.torque or 33.5)
        qd_max.append(override.velocity or doc.actuator_default.velocity or 21.0)
    unknown = set(doc.actuator_overrides) - {link.joint_name for link in actuated}
    if unknown:
        raise ModelFileError(f"actuator_overrides reference unknown joints: {sorted(unknown)}")
    limits = ActuatorLimits(
        joint_names=tuple(link.joint_name for link in actuated),
        tau_max=np.array(tau_max, dtype=float),
        qd_max=np.array(qd_max, dtype=float),
    )

    body = _body_params(tree, doc)
    logger.debug(
        "Robot model loaded",
        extra={"model": doc.name, "nq": tree.nq, "mass": round(tree.total_mass, 4)},
    )
    return body, tree, limits


def load_model(path: Path | str) -> Tuple[BodyParams, KinematicTree, ActuatorLimits]:
    """Load a YAML model description into (BodyParams, KinematicTree, ActuatorLimits)."""

    source = Path(path)
    if not source.exists():
        raise ModelFileError(f"Model file not found: {source}")
    try:
        data = yaml.safe_load(source.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ModelFileError(f"Could not parse {source}: {exc}") from exc
    if not isinstance(data, dict):
        raise ModelFileError(f"{source} does not contain a mapping")
    return parse_model(data)
