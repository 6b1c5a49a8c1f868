"""Geometry model and loop-closure primitives.

Every mechanism in the family is two prismatic-parallelogram (PPa)
translation legs, optionally extended with one or two prismatic-universal
(PUU) orientation legs holding a tool body, and optionally a serial
stacked z axis.  Each leg is abstracted to its equivalent rod of fixed
length between a rail point ``a_i = rail_origin + rho_i * rail_axis`` and
a platform point ``b_i``.

All values are immutable after construction.  Lengths are meters, angles
radians.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import GeometryConfigError, GeometryConfigWarning

UNIT_NORM_TOL = 1e-12
AXIS_ORTHO_TOL = 1e-9

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to the half-open interval (-pi, pi]."""
    return math.pi - (math.pi - a) % TWO_PI


def as_vec3(value, name: str = "vector") -> np.ndarray:
    """Coerce to an immutable float64 3-vector."""
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise GeometryConfigError(f"{name} must have exactly 3 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryConfigError(f"{name} has non-finite components: {arr.tolist()}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


def unit_vec3(value, name: str = "axis") -> np.ndarray:
    """Coerce to an immutable unit 3-vector; the norm must already be 1 within 1e-12."""
    arr = as_vec3(value, name)
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise GeometryConfigError(f"{name} must be a unit vector (norm {norm!r} differs from 1 by more than {UNIT_NORM_TOL})")
    return arr


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation matrix for a right-handed rotation of `angle` about a unit `axis`."""
    c = math.cos(angle)
    s = math.sin(angle)
    x, y, z = float(axis[0]), float(axis[1]), float(axis[2])
    k = 1.0 - c
    return np.array(
        [
            [c + x * x * k, x * y * k - z * s, x * z * k + y * s],
            [y * x * k + z * s, c + y * y * k, y * z * k - x * s],
            [z * x * k - y * s, z * y * k + x * s, c + z * z * k],
        ]
    )


class Variant(Enum):
    """Mechanism family member, keyed by its task-space degrees of freedom."""

    PLANAR_2T = "Planar2T"
    SPATIAL_2T1R = "Spatial2T1R"
    SPATIAL_2T2R = "Spatial2T2R"

    @property
    def n_orientation_legs(self) -> int:
        return {"Planar2T": 0, "Spatial2T1R": 1, "Spatial2T2R": 2}[self.value]

    @property
    def n_legs(self) -> int:
        return 2 + self.n_orientation_legs

    @property
    def n_dof(self) -> int:
        return 2 + self.n_orientation_legs


@dataclass(frozen=True, eq=False)
class LegGeometry:
    """One actuated leg: a prismatic rail plus an equivalent rod of fixed length."""

    rail_origin: np.ndarray
    rail_axis: np.ndarray
    leg_length: float
    rho_min: float
    rho_max: float

    def __post_init__(self):
        object.__setattr__(self, "rail_origin", as_vec3(self.rail_origin, "rail_origin"))
        object.__setattr__(self, "rail_axis", unit_vec3(self.rail_axis, "rail_axis"))
        object.__setattr__(self, "leg_length", float(self.leg_length))
        object.__setattr__(self, "rho_min", float(self.rho_min))
        object.__setattr__(self, "rho_max", float(self.rho_max))
        if not self.leg_length > 0.0:
            raise GeometryConfigError(f"leg_length must be > 0, got {self.leg_length}")
        if not self.rho_min < self.rho_max:
            raise GeometryConfigError(f"rho_min must be < rho_max, got [{self.rho_min}, {self.rho_max}]")

    def rail_point(self, rho: float) -> np.ndarray:
        return self.rail_origin + rho * self.rail_axis


@dataclass(frozen=True, eq=False)
class ToolBody:
    """Tool frame carried by the platform through the rotation joint(s).

    `anchor_offsets` are the vectors from the tool center point to the rod
    attachments of the orientation legs, expressed in the tool frame at
    zero rotation.  `beta_axis` is platform-fixed; `gamma_axis` is carried
    by the first rotation.
    """

    anchor_offsets: tuple
    beta_axis: np.ndarray
    gamma_axis: np.ndarray
    characteristic_length: Optional[float] = None

    def __post_init__(self):
        offsets = tuple(as_vec3(r, f"anchor_offsets[{k}]") for k, r in enumerate(self.anchor_offsets))
        if not offsets:
            raise GeometryConfigError("tool requires at least one anchor offset")
        for k, r in enumerate(offsets):
            if float(np.linalg.norm(r)) == 0.0:
                raise GeometryConfigError(f"anchor_offsets[{k}] must be nonzero")
        object.__setattr__(self, "anchor_offsets", offsets)
        object.__setattr__(self, "beta_axis", unit_vec3(self.beta_axis, "beta_axis"))
        object.__setattr__(self, "gamma_axis", unit_vec3(self.gamma_axis, "gamma_axis"))
        if abs(float(self.beta_axis @ self.gamma_axis)) > UNIT_NORM_TOL:
            raise GeometryConfigError("beta_axis and gamma_axis must be orthogonal")
        if self.characteristic_length is None:
            object.__setattr__(self, "characteristic_length", float(np.linalg.norm(offsets[0])))
        else:
            object.__setattr__(self, "characteristic_length", float(self.characteristic_length))
        if not self.characteristic_length > 0.0:
            raise GeometryConfigError(f"characteristic_length must be > 0, got {self.characteristic_length}")


@dataclass(frozen=True, eq=False)
class StackedAxis:
    """Serial prismatic axis stacked on top of the parallel structure (identity transmission)."""

    axis: np.ndarray
    rho_min: float
    rho_max: float

    def __post_init__(self):
        object.__setattr__(self, "axis", unit_vec3(self.axis, "stacked_z.axis"))
        object.__setattr__(self, "rho_min", float(self.rho_min))
        object.__setattr__(self, "rho_max", float(self.rho_max))
        if not self.rho_min < self.rho_max:
            raise GeometryConfigError(f"stacked_z limits must satisfy rho_min < rho_max, got [{self.rho_min}, {self.rho_max}]")


@dataclass(frozen=True, eq=False)
class MechanismGeometry:
    """Full geometric parametrization of one mechanism variant."""

    variant: Variant
    translation_legs: tuple
    orientation_legs: tuple = ()
    tool: Optional[ToolBody] = None
    platform_offsets: tuple = ()
    stacked_z: Optional[StackedAxis] = None

    def __post_init__(self):
        variant = self.variant if isinstance(self.variant, Variant) else Variant(self.variant)
        object.__setattr__(self, "variant", variant)
        tlegs = tuple(self.translation_legs)
        olegs = tuple(self.orientation_legs)
        if len(tlegs) != 2:
            raise GeometryConfigError(f"exactly 2 translation legs required, got {len(tlegs)}")
        if len(olegs) != variant.n_orientation_legs:
            raise GeometryConfigError(
                f"variant {variant.value} requires {variant.n_orientation_legs} orientation legs, got {len(olegs)}"
            )
        object.__setattr__(self, "translation_legs", tlegs)
        object.__setattr__(self, "orientation_legs", olegs)
        if variant is Variant.PLANAR_2T:
            if self.tool is not None:
                raise GeometryConfigError("tool body is only valid for variants with orientation legs")
        else:
            if self.tool is None:
                raise GeometryConfigError(f"variant {variant.value} requires a tool body")
            if len(self.tool.anchor_offsets) != len(olegs):
                raise GeometryConfigError(
                    f"tool needs one anchor offset per orientation leg "
                    f"({len(olegs)}), got {len(self.tool.anchor_offsets)}"
                )
        if self.platform_offsets:
            offs = tuple(as_vec3(d, f"platform_offsets[{k}]") for k, d in enumerate(self.platform_offsets))
            if len(offs) != 2:
                raise GeometryConfigError(f"exactly 2 platform offsets required, got {len(offs)}")
        else:
            offs = (as_vec3((0.0, 0.0, 0.0)), as_vec3((0.0, 0.0, 0.0)))
        object.__setattr__(self, "platform_offsets", offs)
        self._check_layout()

    def _check_layout(self):
        for k, leg in enumerate(self.translation_legs):
            if abs(float(leg.rail_axis[2])) > AXIS_ORTHO_TOL:
                warnings.warn(
                    f"translation leg {k + 1} rail axis {leg.rail_axis.tolist()} does not lie in the z = 0 plane",
                    GeometryConfigWarning,
                    stacklevel=3,
                )
        e1 = self.translation_legs[0].rail_axis
        e2 = self.translation_legs[1].rail_axis
        for k, leg in enumerate(self.orientation_legs):
            if abs(float(leg.rail_axis @ e1)) > AXIS_ORTHO_TOL or abs(float(leg.rail_axis @ e2)) > AXIS_ORTHO_TOL:
                warnings.warn(
                    f"orientation leg {k + 3} rail axis {leg.rail_axis.tolist()} is not orthogonal "
                    f"to both translation rails",
                    GeometryConfigWarning,
                    stacklevel=3,
                )

    @property
    def legs(self) -> tuple:
        return self.translation_legs + self.orientation_legs

    @property
    def n_legs(self) -> int:
        return len(self.legs)

    @property
    def n_dof(self) -> int:
        return self.variant.n_dof

    def default_characteristic_length(self) -> Optional[float]:
        return self.tool.characteristic_length if self.tool is not None else None

    def canonical_dict(self) -> dict:
        def leg_dict(leg):
            return {
                "rail_origin": leg.rail_origin.tolist(),
                "rail_axis": leg.rail_axis.tolist(),
                "leg_length": leg.leg_length,
                "rho_min": leg.rho_min,
                "rho_max": leg.rho_max,
            }

        data = {
            "variant": self.variant.value,
            "translation_legs": [leg_dict(leg) for leg in self.translation_legs],
            "orientation_legs": [leg_dict(leg) for leg in self.orientation_legs],
            "platform_offsets": [d.tolist() for d in self.platform_offsets],
        }
        if self.tool is not None:
            data["tool"] = {
                "anchor_offsets": [r.tolist() for r in self.tool.anchor_offsets],
                "beta_axis": self.tool.beta_axis.tolist(),
                "gamma_axis": self.tool.gamma_axis.tolist(),
                "characteristic_length": self.tool.characteristic_length,
            }
        if self.stacked_z is not None:
            data["stacked_z"] = {
                "axis": self.stacked_z.axis.tolist(),
                "rho_min": self.stacked_z.rho_min,
                "rho_max": self.stacked_z.rho_max,
            }
        return data

    def geometry_hash(self) -> str:
        payload = json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(frozen=True)
class Pose:
    """Task-space coordinates; populated fields must match the mechanism variant."""

    x: float
    y: float
    beta: Optional[float] = None
    gamma: Optional[float] = None
    z: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        for name in ("x", "y"):
            if not math.isfinite(getattr(self, name)):
                raise GeometryConfigError(f"pose {name} must be finite")
        for name in ("beta", "gamma"):
            val = getattr(self, name)
            if val is not None:
                val = float(val)
                if not math.isfinite(val):
                    raise GeometryConfigError(f"pose {name} must be finite")
                object.__setattr__(self, name, wrap_angle(val))
        if self.z is not None:
            object.__setattr__(self, "z", float(self.z))

    def task_coords(self) -> tuple:
        coords = [self.x, self.y]
        if self.beta is not None:
            coords.append(self.beta)
        if self.gamma is not None:
            coords.append(self.gamma)
        return tuple(coords)

    def point(self) -> np.ndarray:
        """Tool center point embedded at z = 0 (the stacked axis is handled separately)."""
        return np.array([self.x, self.y, 0.0])


@dataclass(frozen=True)
class JointVector:
    """Actuated prismatic coordinates, one per leg."""

    rho: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.rho)
        if not vals:
            raise GeometryConfigError("joint vector must not be empty")
        for v in vals:
            if not math.isfinite(v):
                raise GeometryConfigError(f"joint values must be finite, got {vals}")
        object.__setattr__(self, "rho", vals)

    def __len__(self):
        return len(self.rho)

    def __iter__(self):
        return iter(self.rho)

    def __getitem__(self, idx):
        return self.rho[idx]

    def as_array(self) -> np.ndarray:
        return np.array(self.rho)


@dataclass(frozen=True)
class PassiveAngles:
    """Passive joint angles reconstructing each rod direction.

    Planar rods carry one angle from the +x axis; spatial rods carry
    (elevation, azimuth) of the rod direction: elevation from the x-y
    plane, azimuth about z.
    """

    translation_theta: tuple
    orientation_angles: tuple = ()

    def rod_directions(self) -> list:
        dirs = [np.array([math.cos(t), math.sin(t), 0.0]) for t in self.translation_theta]
        for theta, alpha in self.orientation_angles:
            ct = math.cos(theta)
            dirs.append(np.array([ct * math.cos(alpha), ct * math.sin(alpha), math.sin(theta)]))
        return dirs


def check_pose(geom: MechanismGeometry, pose: Pose) -> None:
    variant = geom.variant
    if (pose.beta is None) != (variant is Variant.PLANAR_2T):
        raise GeometryConfigError(f"pose beta must be present iff the variant has rotational dofs (variant {variant.value})")
    if (pose.gamma is not None) != (variant is Variant.SPATIAL_2T2R):
        raise GeometryConfigError(f"pose gamma must be present iff the variant is {Variant.SPATIAL_2T2R.value}")
    if pose.z is not None and geom.stacked_z is None:
        raise GeometryConfigError("pose has a z coordinate but the geometry has no stacked axis")


def check_joints(geom: MechanismGeometry, joints: JointVector) -> None:
    if len(joints) != geom.n_legs:
        raise GeometryConfigError(f"joint vector length {len(joints)} does not match leg count {geom.n_legs}")


def tool_rotation_matrix(geom: MechanismGeometry, pose: Pose) -> np.ndarray:
    """Tool rotation at the pose: Rot(beta_axis, beta) then the carried gamma rotation."""
    if geom.tool is None or pose.beta is None:
        return np.eye(3)
    rot = rotation_about_axis(geom.tool.beta_axis, pose.beta)
    if pose.gamma is not None:
        rot = rot @ rotation_about_axis(geom.tool.gamma_axis, pose.gamma)
    return rot


def attachment_points(geom: MechanismGeometry, pose: Pose, joints: JointVector) -> list:
    """Rail and platform attachment points (a_i, b_i) for every leg."""
    check_pose(geom, pose)
    check_joints(geom, joints)
    p = pose.point()
    rot = tool_rotation_matrix(geom, pose)
    pairs = []
    for i, leg in enumerate(geom.translation_legs):
        a = leg.rail_point(joints[i])
        b = p + geom.platform_offsets[i]
        pairs.append((a, b))
    for k, leg in enumerate(geom.orientation_legs):
        a = leg.rail_point(joints[2 + k])
        b = p + rot @ geom.tool.anchor_offsets[k]
        pairs.append((a, b))
    return pairs


def closure_residual(geom: MechanismGeometry, pose: Pose, joints: JointVector) -> np.ndarray:
    """Squared-distance closure defect per leg: ||b_i - a_i||^2 - L_i^2."""
    pairs = attachment_points(geom, pose, joints)
    res = np.empty(geom.n_legs)
    for i, ((a, b), leg) in enumerate(zip(pairs, geom.legs)):
        rod = b - a
        res[i] = float(rod @ rod) - leg.leg_length**2
    return res


def passive_angles(geom: MechanismGeometry, pose: Pose, joints: JointVector) -> PassiveAngles:
    """Passive angles of every rod at a configuration (assumed assembled)."""
    pairs = attachment_points(geom, pose, joints)
    thetas = []
    for a, b in pairs[:2]:
        rod = b - a
        thetas.append(math.atan2(rod[1], rod[0]))
    orient = []
    for a, b in pairs[2:]:
        rod = b - a
        elev = math.atan2(rod[2], math.hypot(rod[0], rod[1]))
        azim = math.atan2(rod[1], rod[0])
        orient.append((elev, azim))
    return PassiveAngles(tuple(thetas), tuple(orient))
