"""Parallel (A) and serial (B) Jacobian construction and singularity classification.

Differentiating each squared-length closure constraint and eliminating the
passive rates gives one row of ``A * t = B * rho_dot`` per leg: the rod
vector dotted with the task velocity on the left, the rod-rail transmission
dot product times the joint rate on the right.  Orientation legs add moment
columns built from the rotation axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import (
    AssemblyConsistencyError,
    GeometryConfigError,
    SingularConfigurationError,
)
from .model import (
    JointVector,
    MechanismGeometry,
    Pose,
    Variant,
    attachment_points,
    closure_residual,
    rotation_about_axis,
)

ASSEMBLY_TOL = 1e-6
TOL_PARALLEL = 1e-8
TOL_SERIAL = 1e-8
SOLVE_CUTOFF = 1e-12


@dataclass(frozen=True)
class JacobianPair:
    """A, B and (when A is invertible) J = A^-1 B at one configuration."""

    A: np.ndarray
    B: np.ndarray
    J: Optional[np.ndarray]
    det_A: float
    det_B: float
    variant: Variant
    rotational_rows: tuple
    literal_mode: bool = False
    stacked: bool = False

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def normalized_det_A(self) -> float:
        norms = np.linalg.norm(self.A, axis=1)
        prod = float(np.prod(norms))
        if prod < 1e-300:
            return 0.0
        return self.det_A / prod


@dataclass(frozen=True)
class SingularityReport:
    serial_singular: tuple
    parallel_singular: bool
    normalized_det_A: float
    geometric_witnesses: tuple


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _check_assembly(geom, pose, joints) -> None:
    res = closure_residual(geom, pose, joints)
    worst = float(np.max(np.abs(res)))
    if worst > ASSEMBLY_TOL:
        raise AssemblyConsistencyError(
            f"(pose, joints) do not close the loops: worst squared-length defect {worst:.3g} exceeds {ASSEMBLY_TOL}"
        )


def _make_pair(A, B, variant, rotational_rows, literal=False, stacked=False) -> JacobianPair:
    det_a = float(np.linalg.det(A))
    det_b = float(np.prod(np.diag(B)))
    norms = np.linalg.norm(A, axis=1)
    prod = float(np.prod(norms))
    J = None
    if prod > 1e-300 and abs(det_a / prod) > SOLVE_CUTOFF:
        J = _freeze(np.linalg.solve(A, B))
    return JacobianPair(_freeze(A), _freeze(B), J, det_a, det_b, variant, rotational_rows, literal, stacked)


def build_planar(geom: MechanismGeometry, pose: Pose, joints: JointVector) -> JacobianPair:
    """2x2 pair for the translating mechanism: rows are rod vectors, B the transmissions."""
    if geom.variant is not Variant.PLANAR_2T:
        raise GeometryConfigError(f"build_planar requires the planar variant, got {geom.variant.value}")
    _check_assembly(geom, pose, joints)
    pairs = attachment_points(geom, pose, joints)
    A = np.zeros((2, 2))
    B = np.zeros((2, 2))
    for i, ((a, b), leg) in enumerate(zip(pairs, geom.legs)):
        rod = b - a
        A[i, 0] = rod[0]
        A[i, 1] = rod[1]
        B[i, i] = float(rod @ leg.rail_axis)
    return _make_pair(A, B, geom.variant, ())


def _orientation_row(rod, p, b, axis) -> float:
    return -float(rod @ np.cross(axis, p - b))


def build_2t1r(geom: MechanismGeometry, pose: Pose, joints: JointVector) -> JacobianPair:
    """3x3 pair: planar rows plus the rotation-moment column of leg 3."""
    if geom.variant is not Variant.SPATIAL_2T1R:
        raise GeometryConfigError(f"build_2t1r requires the 2T1R variant, got {geom.variant.value}")
    _check_assembly(geom, pose, joints)
    pairs = attachment_points(geom, pose, joints)
    p = pose.point()
    A = np.zeros((3, 3))
    B = np.zeros((3, 3))
    for i, ((a, b), leg) in enumerate(zip(pairs, geom.legs)):
        rod = b - a
        A[i, 0] = rod[0]
        A[i, 1] = rod[1]
        B[i, i] = float(rod @ leg.rail_axis)
    a3, b3 = pairs[2]
    A[2, 2] = _orientation_row(b3 - a3, p, b3, geom.tool.beta_axis)
    return _make_pair(A, B, geom.variant, (2,))


def build_2t2r(geom: MechanismGeometry, pose: Pose, joints: JointVector, literal: bool = False) -> JacobianPair:
    """4x4 pair; `literal` keeps the carried second axis fixed at its zero-rotation direction."""
    if geom.variant is not Variant.SPATIAL_2T2R:
        raise GeometryConfigError(f"build_2t2r requires the 2T2R variant, got {geom.variant.value}")
    _check_assembly(geom, pose, joints)
    pairs = attachment_points(geom, pose, joints)
    p = pose.point()
    j_axis = geom.tool.beta_axis
    if literal:
        i_eff = geom.tool.gamma_axis
    else:
        i_eff = rotation_about_axis(j_axis, pose.beta) @ geom.tool.gamma_axis
    A = np.zeros((4, 4))
    B = np.zeros((4, 4))
    for i, ((a, b), leg) in enumerate(zip(pairs, geom.legs)):
        rod = b - a
        A[i, 0] = rod[0]
        A[i, 1] = rod[1]
        B[i, i] = float(rod @ leg.rail_axis)
    for k in (2, 3):
        a_k, b_k = pairs[k]
        rod = b_k - a_k
        A[k, 2] = _orientation_row(rod, p, b_k, j_axis)
        A[k, 3] = _orientation_row(rod, p, b_k, i_eff)
    return _make_pair(A, B, geom.variant, (2, 3), literal=literal)


def build_jacobians(geom: MechanismGeometry, pose: Pose, joints: JointVector, literal: bool = False) -> JacobianPair:
    if geom.variant is Variant.PLANAR_2T:
        return build_planar(geom, pose, joints)
    if geom.variant is Variant.SPATIAL_2T1R:
        return build_2t1r(geom, pose, joints)
    return build_2t2r(geom, pose, joints, literal=literal)


def extend_with_stacked_axis(jp: JacobianPair) -> JacobianPair:
    """Append the serial stacked axis: one exact unit diagonal entry on A, B and J."""
    n = jp.n
    A = np.zeros((n + 1, n + 1))
    B = np.zeros((n + 1, n + 1))
    A[:n, :n] = jp.A
    B[:n, :n] = jp.B
    A[n, n] = 1.0
    B[n, n] = 1.0
    J = None
    if jp.J is not None:
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = jp.J
        J[n, n] = 1.0
        J = _freeze(J)
    return JacobianPair(
        _freeze(A), _freeze(B), J, jp.det_A, jp.det_B, jp.variant, jp.rotational_rows, jp.literal_mode, stacked=True
    )


def solve_velocity(jp: JacobianPair, rho_dot, tol_parallel: float = TOL_PARALLEL) -> np.ndarray:
    """Task velocity J * rho_dot; refuses parallel-singular configurations."""
    rho_dot = np.asarray(rho_dot, dtype=float)
    if rho_dot.shape != (jp.n,):
        raise GeometryConfigError(f"joint-rate vector must have shape ({jp.n},), got {rho_dot.shape}")
    if jp.J is None or abs(jp.normalized_det_A) < tol_parallel:
        raise SingularConfigurationError(
            "parallel-singular configuration: the platform is uncontrollable, no finite velocity solution"
        )
    t = jp.J @ rho_dot
    defect = float(np.max(np.abs(jp.A @ t - jp.B @ rho_dot)))
    scale = max(1.0, float(np.max(np.abs(jp.B @ rho_dot))))
    if defect > 1e-10 * scale:
        raise AssemblyConsistencyError(f"velocity solve failed verification: |A t - B rho_dot| = {defect:.3g}")
    return t


def _colinear(u, v, tol: float) -> bool:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu < 1e-300 or nv < 1e-300:
        return False
    return float(np.linalg.norm(np.cross(u / nu, v / nv))) < tol


def classify(
    jp: JacobianPair,
    geom: MechanismGeometry,
    pose: Pose,
    joints: JointVector,
    tol_parallel: float = TOL_PARALLEL,
    tol_serial: float = TOL_SERIAL,
    witness_angle_tol: float = 1e-6,
) -> SingularityReport:
    """Flag singularities from the determinant metrics plus independent geometric checks."""
    if jp.stacked:
        raise GeometryConfigError("classify operates on the parallel structure; pass the pair before stacking")
    pairs = attachment_points(geom, pose, joints)
    p = pose.point()
    serial = []
    witnesses = []
    for i, ((a, b), leg) in enumerate(zip(pairs, geom.legs)):
        rod = b - a
        flag = abs(float(rod @ leg.rail_axis)) / leg.leg_length < tol_serial
        serial.append(flag)
        if flag:
            witnesses.append(f"a{i + 1} - b{i + 1} is perpendicular to e{i + 1} (leg {i + 1} at a serial singularity)")
    norm_det = jp.normalized_det_A
    parallel = abs(norm_det) < tol_parallel

    rod1 = pairs[0][1] - pairs[0][0]
    rod2 = pairs[1][1] - pairs[1][0]
    if _colinear(rod1, rod2, witness_angle_tol):
        witnesses.append("lines (A1B1) and (A2B2) are colinear (translation stage parallel singularity)")
    if geom.variant is Variant.SPATIAL_2T1R:
        a3, b3 = pairs[2]
        if _colinear(b3 - a3, p - b3, witness_angle_tol):
            witnesses.append("lines (A3B3) and (B3P) are colinear (rotation stage parallel singularity)")
    elif geom.variant is Variant.SPATIAL_2T2R:
        block = jp.A[2:, 2:]
        r0 = float(np.linalg.norm(block[0]))
        r1 = float(np.linalg.norm(block[1]))
        block_det = 0.0 if r0 < 1e-300 or r1 < 1e-300 else float(np.linalg.det(block)) / (r0 * r1)
        if abs(block_det) < tol_parallel:
            witnesses.append(
                "lines (A3B3), (A4B4) and the tool line (CP) are coplanar (rotation stage parallel singularity)"
            )
    return SingularityReport(tuple(serial), parallel, norm_det, tuple(witnesses))


def homogenize(jp: JacobianPair, char_len: float) -> JacobianPair:
    """Rescale rotational rows so angular rates carry units of char_len * rad/s."""
    if not jp.rotational_rows:
        raise GeometryConfigError("homogenize requires a variant with rotational rows")
    if not char_len > 0.0:
        raise GeometryConfigError(f"characteristic length must be > 0, got {char_len}")
    A = jp.A.copy()
    B = jp.B.copy()
    scale_det = 1.0
    for r in jp.rotational_rows:
        A[:, r] /= char_len
        scale_det /= char_len
    J = None
    if jp.J is not None:
        J = jp.J.copy()
        for r in jp.rotational_rows:
            J[r, :] *= char_len
        J = _freeze(J)
    return JacobianPair(
        _freeze(A), _freeze(B), J, jp.det_A * scale_det, jp.det_B, jp.variant, jp.rotational_rows, jp.literal_mode, jp.stacked
    )
