"""Velocity/force amplification factors, condition numbers, and isotropy checks.

Velocity amplification factors are the singular values of J; force factors
are their reciprocals, so a vanishing velocity factor means an infinite
force factor and vice versa.  Mixed translation/rotation Jacobians must be
homogenized with a characteristic length before singular values mean
anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GeometryConfigError, JointLimitError, UnreachablePoseError
from .jacobians import build_planar
from .kinematics import WorkingMode, inverse_kinematics
from .model import JointVector, MechanismGeometry, Pose, Variant

SIGMA_ZERO_REL = 1e-14

_DEFAULT_ROT_ROWS = {2: (), 3: (2,), 4: (2, 3), 5: (2, 3)}


@dataclass(frozen=True)
class AmplificationProfile:
    """Singular-value picture of one Jacobian; None encodes an infinite factor."""

    singular_values: tuple
    force_factors: tuple
    condition_number: Optional[float]
    isotropy_defect: float

    @property
    def is_singular(self) -> bool:
        return self.condition_number is None


def amplification(J, char_len: Optional[float] = None, rotational_rows=None) -> AmplificationProfile:
    """Amplification profile of a Jacobian, homogenized by char_len when rotational rows exist."""
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise GeometryConfigError(f"amplification needs a square matrix, got shape {J.shape}")
    n = J.shape[0]
    if n not in (2, 3, 4, 5):
        raise GeometryConfigError(f"amplification supports 2..5 task dofs, got {n}")
    if rotational_rows is None:
        rotational_rows = _DEFAULT_ROT_ROWS[n]
    rotational_rows = tuple(rotational_rows)
    if rotational_rows:
        if char_len is None:
            raise GeometryConfigError(
                "Jacobian mixes translation and rotation rows; a characteristic length is required "
                "to express them in common units"
            )
        if not char_len > 0.0:
            raise GeometryConfigError(f"characteristic length must be > 0, got {char_len}")
        J = J.copy()
        for r in rotational_rows:
            J[r, :] *= char_len
    sigma = np.linalg.svd(J, compute_uv=False)
    sigma = tuple(float(s) for s in sigma)
    cutoff = SIGMA_ZERO_REL * max(sigma[0], 1e-300)
    force = tuple(None if s <= cutoff else 1.0 / s for s in sigma)
    condition = None if sigma[-1] <= cutoff else sigma[0] / sigma[-1]
    defect = float(np.max(np.abs(J.T @ J - np.eye(n))))
    return AmplificationProfile(sigma, force, condition, defect)


@dataclass(frozen=True)
class IsotropyReport:
    """Outcome of the rail-orthogonality isotropy condition on the translation stage."""

    e1_dot_e2: float
    isotropic_exists: bool
    pose: Optional[Pose]
    joints: Optional[JointVector]
    condition_number: Optional[float]
    message: str


def translation_subgeometry(geom: MechanismGeometry) -> MechanismGeometry:
    """The planar mechanism formed by the two translation legs alone."""
    if geom.variant is Variant.PLANAR_2T:
        return geom
    return MechanismGeometry(
        variant=Variant.PLANAR_2T,
        translation_legs=geom.translation_legs,
        platform_offsets=geom.platform_offsets,
    )


def isotropy_locus_check(geom: MechanismGeometry, mode=(-1, -1)) -> IsotropyReport:
    """Check e1 . e2 = 0 and, when it holds, locate the rods-on-rails isotropic pose."""
    sub = translation_subgeometry(geom)
    leg1, leg2 = sub.translation_legs
    dot = float(leg1.rail_axis @ leg2.rail_axis)
    if abs(dot) > 1e-12:
        return IsotropyReport(dot, False, None, None, None, f"no isotropic configuration exists: e1 . e2 = {dot:.6g} is nonzero")
    # both rods align with their rails where the (offset-shifted) rail lines meet
    c1 = (leg1.rail_origin - sub.platform_offsets[0])[:2]
    c2 = (leg2.rail_origin - sub.platform_offsets[1])[:2]
    m = np.column_stack([leg1.rail_axis[:2], -leg2.rail_axis[:2]])
    if abs(float(np.linalg.det(m))) < 1e-12:
        return IsotropyReport(dot, False, None, None, None, "rail lines are degenerate in the plane; no isotropic pose")
    ts = np.linalg.solve(m, c2 - c1)
    point = c1 + ts[0] * leg1.rail_axis[:2]
    pose = Pose(float(point[0]), float(point[1]))
    wm = WorkingMode.coerce(mode, 2)
    try:
        joints = inverse_kinematics(sub, pose, wm)
    except (UnreachablePoseError, JointLimitError) as exc:
        return IsotropyReport(
            dot, True, pose, None, None, f"isotropic pose ({pose.x:.6g}, {pose.y:.6g}) exists but is not reachable: {exc}"
        )
    pair = build_planar(sub, pose, joints)
    prof = amplification(pair.J)
    return IsotropyReport(
        dot,
        True,
        pose,
        joints,
        prof.condition_number,
        f"isotropic pose ({pose.x:.6g}, {pose.y:.6g}) on mode {tuple(wm.signs)}, condition number {prof.condition_number:.12g}",
    )


@dataclass(frozen=True)
class TransmissionVerdict:
    ok: bool
    psi: float
    n_cells: int
    worst_sigma_min: float
    worst_sigma_max: float
    workspace_map: object


def transmission_bounds(
    geom: MechanismGeometry,
    region,
    psi: float,
    mode=None,
    resolution: int = 33,
    char_len: Optional[float] = None,
    workers: int = 1,
) -> TransmissionVerdict:
    """True iff every sampled pose in the region keeps all singular values in [1/psi, psi]."""
    from .workspace import scan  # deferred: workspace builds on this module

    if not psi > 1.0:
        raise GeometryConfigError(f"psi must be > 1, got {psi}")
    if mode is None:
        mode = (-1,) * geom.n_legs
    wmap = scan(geom, region, resolution, mode, psi, char_len=char_len, workers=workers)
    unreachable = np.flatnonzero(~wmap.reachable.ravel())
    if unreachable.size:
        first = wmap.cell_pose(int(unreachable[0]))
        raise UnreachablePoseError(
            f"region leaves the workspace: first failing pose {tuple(round(c, 9) for c in first)}"
        )
    sig_min = wmap.sigma_min.ravel()
    sig_max = wmap.sigma_max.ravel()
    ok = bool(np.all(wmap.psi_ok))
    return TransmissionVerdict(ok, psi, sig_min.size, float(sig_min.min()), float(sig_max.max()), wmap)
