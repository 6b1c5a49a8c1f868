"""Inverse and forward kinematics for all mechanism variants.

Inverse kinematics is the closed-form root of the per-leg quadratic
``||b_i - a_i0 - rho_i e_i||^2 = L_i^2``.  Forward kinematics decouples:
the tool point comes from intersecting the two translation-leg circles,
then the orientation angles are solved from the remaining closure
equations (closed form for one rotation, damped Newton multistart for
two).
"""

from __future__ import annotations

import math
import warnings
import weakref
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from numba import njit, prange

from .errors import (
    GeometryConfigError,
    JointLimitError,
    NewtonConvergenceError,
    NoAssemblyError,
    SerialSingularityWarning,
    SingularConfigurationError,
    UnreachablePoseError,
)
from .model import (
    JointVector,
    MechanismGeometry,
    PassiveAngles,
    Pose,
    ToolBody,
    Variant,
    check_joints,
    check_pose,
    rotation_about_axis,
    wrap_angle,
)

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
NEWTON_SEED_GRID = 33
ROOT_DEDUP_TOL = 1e-6
RESIDUAL_LIMIT = 1e-9

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class WorkingMode:
    """Per-leg sign selectors choosing the inverse-kinematics root branch."""

    signs: tuple

    def __post_init__(self):
        vals = tuple(int(s) for s in self.signs)
        if any(s not in (-1, 1) for s in vals):
            raise GeometryConfigError(f"working-mode signs must be +1 or -1, got {vals}")
        object.__setattr__(self, "signs", vals)

    def __len__(self):
        return len(self.signs)

    def __iter__(self):
        return iter(self.signs)

    @classmethod
    def coerce(cls, mode, n_legs: int) -> "WorkingMode":
        wm = mode if isinstance(mode, cls) else cls(tuple(mode))
        if len(wm) != n_legs:
            raise GeometryConfigError(f"working mode has {len(wm)} signs but the mechanism has {n_legs} legs")
        return wm


@dataclass(frozen=True)
class AssemblySolution:
    """One forward-kinematics solution branch."""

    pose: Pose
    passive: PassiveAngles
    residual_norm: float
    assembly: int
    flags: tuple = ()


def tool_rotation(beta: float, gamma: Optional[float], tool: ToolBody) -> np.ndarray:
    """Tool rotation matrix: platform-fixed beta axis, then the carried gamma axis."""
    rot = rotation_about_axis(tool.beta_axis, beta)
    if gamma is not None:
        rot = rot @ rotation_about_axis(tool.gamma_axis, gamma)
    return rot


class _ScalarLeg(NamedTuple):
    origin: tuple
    axis: tuple
    length: float
    rho_min: float
    rho_max: float


class _ScalarGeom(NamedTuple):
    legs: tuple
    offsets: tuple
    anchors: tuple
    beta_axis: tuple
    gamma_axis: tuple


_SCALAR_CACHE = weakref.WeakKeyDictionary()


def _scalar_geom(geom: MechanismGeometry) -> _ScalarGeom:
    """Plain-float mirror of the geometry for the scalar hot paths."""
    sg = _SCALAR_CACHE.get(geom)
    if sg is None:
        legs = tuple(
            _ScalarLeg(tuple(map(float, leg.rail_origin)), tuple(map(float, leg.rail_axis)), leg.leg_length, leg.rho_min, leg.rho_max)
            for leg in geom.legs
        )
        offsets = tuple(tuple(map(float, d)) for d in geom.platform_offsets)
        anchors = ()
        beta_axis = gamma_axis = (0.0, 0.0, 0.0)
        if geom.tool is not None:
            anchors = tuple(tuple(map(float, r)) for r in geom.tool.anchor_offsets)
            beta_axis = tuple(map(float, geom.tool.beta_axis))
            gamma_axis = tuple(map(float, geom.tool.gamma_axis))
        sg = _ScalarGeom(legs, offsets, anchors, beta_axis, gamma_axis)
        _SCALAR_CACHE[geom] = sg
    return sg


def _rotate_scalar(axis, angle: float, v) -> tuple:
    """Rodrigues rotation on plain floats (kept numpy-free for the hot paths)."""
    ax, ay, az = axis
    vx, vy, vz = v
    c = math.cos(angle)
    s = math.sin(angle)
    dot = ax * vx + ay * vy + az * vz
    cx = ay * vz - az * vy
    cy = az * vx - ax * vz
    cz = ax * vy - ay * vx
    k = (1.0 - c) * dot
    return (vx * c + cx * s + ax * k, vy * c + cy * s + ay * k, vz * c + cz * s + az * k)


def _tool_anchor_scalar(sg: _ScalarGeom, k: int, beta: float, gamma: Optional[float]) -> tuple:
    r = sg.anchors[k]
    if gamma is not None:
        r = _rotate_scalar(sg.gamma_axis, gamma, r)
    return _rotate_scalar(sg.beta_axis, beta, r)


# ---------------------------------------------------------------------------
# Inverse kinematics
# ---------------------------------------------------------------------------

def _ik_leg(leg: _ScalarLeg, bx, by, bz, sign: int, leg_no: int, tol_serial: float):
    """Closed-form prismatic solution for one leg reaching platform point b."""
    wx = bx - leg.origin[0]
    wy = by - leg.origin[1]
    wz = bz - leg.origin[2]
    t = leg.axis[0] * wx + leg.axis[1] * wy + leg.axis[2] * wz
    w2 = wx * wx + wy * wy + wz * wz
    L2 = leg.length * leg.length
    disc = t * t - w2 + L2
    noise = 32.0 * _EPS * max(L2, w2)
    boundary_tol = max(noise, (tol_serial * leg.length) ** 2)
    if disc < -noise:
        raise UnreachablePoseError(
            f"pose unreachable by leg {leg_no}: the rail passes {math.sqrt(-disc + L2):.6g} m "
            f"from the platform point but the rod is only {leg.length:.6g} m",
            leg=leg_no,
        )
    if disc < boundary_tol:
        warnings.warn(
            f"leg {leg_no} is at a serial singularity (rod perpendicular to rail, stretched to the boundary)",
            SerialSingularityWarning,
            stacklevel=3,
        )
    disc = max(disc, 0.0)
    rho = t + sign * math.sqrt(disc)
    if rho < leg.rho_min - 1e-9 or rho > leg.rho_max + 1e-9:
        raise JointLimitError(
            f"leg {leg_no} joint value {rho:.6g} is outside its limits [{leg.rho_min:.6g}, {leg.rho_max:.6g}]",
            leg=leg_no,
        )
    return min(max(rho, leg.rho_min), leg.rho_max)


def inverse_kinematics(geom: MechanismGeometry, pose: Pose, mode, tol_serial: float = 1e-8) -> JointVector:
    """Actuated joint values reaching `pose` on the given working mode."""
    check_pose(geom, pose)
    wm = WorkingMode.coerce(mode, geom.n_legs)
    sg = _scalar_geom(geom)
    px, py = pose.x, pose.y
    rho = []
    for i in range(2):
        d = sg.offsets[i]
        rho.append(_ik_leg(sg.legs[i], px + d[0], py + d[1], d[2], wm.signs[i], i + 1, tol_serial))
    for k in range(len(sg.anchors)):
        bx, by, bz = _tool_anchor_scalar(sg, k, pose.beta, pose.gamma)
        rho.append(_ik_leg(sg.legs[2 + k], px + bx, py + by, bz, wm.signs[2 + k], 3 + k, tol_serial))
    return JointVector(tuple(rho))


# ---------------------------------------------------------------------------
# Forward kinematics: translation stage (circle intersection)
# ---------------------------------------------------------------------------

def _planar_circles(geom: MechanismGeometry, joints) -> tuple:
    """Circle centers (in the z = 0 plane) and radii implied by the translation legs."""
    sg = _scalar_geom(geom)
    centers = []
    radii = []
    for i in range(2):
        leg = sg.legs[i]
        rho = joints[i]
        d = sg.offsets[i]
        centers.append((leg.origin[0] + rho * leg.axis[0] - d[0], leg.origin[1] + rho * leg.axis[1] - d[1]))
        radii.append(leg.length)
    return centers, radii


def _intersect_circles(c1, r1, c2, r2, sign: int):
    """One intersection point of two circles; sign picks the side of the center line.

    Returns (x, y, boundary) where boundary marks a tangency (coalesced roots).
    """
    dx = c2[0] - c1[0]
    dy = c2[1] - c1[1]
    d = math.hypot(dx, dy)
    scale = max(r1, r2, d)
    tiny = 64.0 * _EPS * scale
    if d < tiny:
        if abs(r1 - r2) < tiny:
            raise SingularConfigurationError(
                "assembly indeterminate: the two translation-leg circles are coincident"
            )
        raise NoAssemblyError("no assembly: the translation-leg circles are concentric with different radii")
    ell = (d * d + r1 * r1 - r2 * r2) / (2.0 * d)
    h2 = r1 * r1 - ell * ell
    gap_tol = 64.0 * _EPS * scale * scale
    if h2 < -gap_tol:
        if d > r1 + r2:
            raise NoAssemblyError(
                f"no assembly: the translation-leg circles are disjoint (center distance {d:.6g} > {r1 + r2:.6g})"
            )
        raise NoAssemblyError(
            f"no assembly: one translation-leg circle is nested inside the other (center distance {d:.6g})"
        )
    boundary = h2 < gap_tol
    h = math.sqrt(max(h2, 0.0))
    ux = dx / d
    uy = dy / d
    mx = c1[0] + ell * ux
    my = c1[1] + ell * uy
    return (mx - sign * h * uy, my + sign * h * ux, boundary)


def _planar_point(geom: MechanismGeometry, joints, assembly: int) -> tuple:
    """Tool point (x, y, boundary_flag) from the translation-leg circles."""
    if assembly not in (-1, 1):
        raise GeometryConfigError(f"assembly selector must be +1 or -1, got {assembly}")
    centers, radii = _planar_circles(geom, joints)
    x, y, boundary = _intersect_circles(centers[0], radii[0], centers[1], radii[1], assembly)
    if boundary:
        warnings.warn(
            "translation circles are tangent: the assembly branches coincide at a singular boundary",
            SerialSingularityWarning,
            stacklevel=3,
        )
    return x, y, boundary


def forward_kinematics_planar(geom: MechanismGeometry, joints, assembly: int = 1) -> AssemblySolution:
    """Tool point from the two translation legs; assembly sign picks the circle branch."""
    joints = joints if isinstance(joints, JointVector) else JointVector(tuple(joints))
    check_joints(geom, joints)
    x, y, boundary = _planar_point(geom, joints, assembly)
    flags = ("serial-boundary",) if boundary else ()
    if geom.variant is Variant.PLANAR_2T:
        pose = Pose(x, y)
    else:
        pose = Pose(x, y, beta=0.0, gamma=0.0 if geom.variant is Variant.SPATIAL_2T2R else None)
    res = _closure_norm(geom, pose, joints) if geom.variant is Variant.PLANAR_2T else math.nan
    return AssemblySolution(pose, _passive_scalar(geom, pose, joints), res, assembly, flags)


# ---------------------------------------------------------------------------
# Orientation closure in trigonometric normal form
#
# For each orientation leg, with c = p - a_k, r the tool-frame anchor, j the
# platform-fixed axis and i the carried axis, the closure defect is
#   f(beta, gamma) = D + 2*(A1(g)*cos b + B1(g)*sin b + C1(g)),
# with A1, B1, C1 linear in (cos g, sin g, 1).
# ---------------------------------------------------------------------------

def _orientation_constants(c, r, i_axis, j_axis, length: float) -> tuple:
    cx, cy, cz = float(c[0]), float(c[1]), float(c[2])
    rx, ry, rz = float(r[0]), float(r[1]), float(r[2])
    ix, iy, iz = float(i_axis[0]), float(i_axis[1]), float(i_axis[2])
    jx, jy, jz = float(j_axis[0]), float(j_axis[1]), float(j_axis[2])
    ir = ix * rx + iy * ry + iz * rz
    # split r along / across the carried axis, s = i x r, q = c x j
    par = (ix * ir, iy * ir, iz * ir)
    perp = (rx - par[0], ry - par[1], rz - par[2])
    s = (iy * rz - iz * ry, iz * rx - ix * rz, ix * ry - iy * rx)
    q = (cy * jz - cz * jy, cz * jx - cx * jz, cx * jy - cy * jx)
    mu = cx * jx + cy * jy + cz * jz
    d0 = (cx * cx + cy * cy + cz * cz) + (rx * rx + ry * ry + rz * rz) - length * length

    def cdot(v):
        return cx * v[0] + cy * v[1] + cz * v[2]

    def jdot(v):
        return jx * v[0] + jy * v[1] + jz * v[2]

    def qdot(v):
        return q[0] * v[0] + q[1] * v[1] + q[2] * v[2]

    return (
        d0,
        cdot(perp) - mu * jdot(perp),
        cdot(s) - mu * jdot(s),
        cdot(par) - mu * jdot(par),
        qdot(perp),
        qdot(s),
        qdot(par),
        mu * jdot(perp),
        mu * jdot(s),
        mu * jdot(par),
    )


@njit(cache=True, fastmath=True)
def _resid_one(con, k, cb, sb, cg, sg):
    a1 = con[k, 1] * cg + con[k, 2] * sg + con[k, 3]
    b1 = con[k, 4] * cg + con[k, 5] * sg + con[k, 6]
    c1 = con[k, 7] * cg + con[k, 8] * sg + con[k, 9]
    return con[k, 0] + 2.0 * (a1 * cb + b1 * sb + c1)


@njit(cache=True, parallel=True, fastmath=True)
def _newton_orientation(con, seeds, tol, max_iter):
    """Damped Newton on the two orientation closure defects, one run per seed.

    Returns per-seed (beta, gamma) and a convergence flag; failed seeds keep
    their last iterate.  Seeds are independent, so the parallel schedule
    cannot change any result.
    """
    n_seeds = seeds.shape[0]
    roots = np.empty((n_seeds, 2))
    ok = np.zeros(n_seeds, dtype=np.uint8)
    for snum in prange(n_seeds):
        beta = seeds[snum, 0]
        gamma = seeds[snum, 1]
        cb = math.cos(beta)
        sb = math.sin(beta)
        cg = math.cos(gamma)
        sg = math.sin(gamma)
        f0 = _resid_one(con, 0, cb, sb, cg, sg)
        f1 = _resid_one(con, 1, cb, sb, cg, sg)
        norm = math.hypot(f0, f1)
        for _ in range(max_iter):
            if norm < tol:
                break
            prev_norm = norm
            # analytic 2x2 Jacobian of (f3, f4) wrt (beta, gamma)
            a1 = con[0, 1] * cg + con[0, 2] * sg + con[0, 3]
            b1 = con[0, 4] * cg + con[0, 5] * sg + con[0, 6]
            j00 = 2.0 * (-a1 * sb + b1 * cb)
            j01 = 2.0 * ((-con[0, 1] * sg + con[0, 2] * cg) * cb + (-con[0, 4] * sg + con[0, 5] * cg) * sb + (-con[0, 7] * sg + con[0, 8] * cg))
            a2 = con[1, 1] * cg + con[1, 2] * sg + con[1, 3]
            b2 = con[1, 4] * cg + con[1, 5] * sg + con[1, 6]
            j10 = 2.0 * (-a2 * sb + b2 * cb)
            j11 = 2.0 * ((-con[1, 1] * sg + con[1, 2] * cg) * cb + (-con[1, 4] * sg + con[1, 5] * cg) * sb + (-con[1, 7] * sg + con[1, 8] * cg))
            det = j00 * j11 - j01 * j10
            if abs(det) < 1e-30:
                break
            step_b = (j11 * f0 - j01 * f1) / det
            step_g = (j00 * f1 - j10 * f0) / det
            lam = 1.0
            improved = False
            for _ in range(12):
                nb = beta - lam * step_b
                ng = gamma - lam * step_g
                ncb = math.cos(nb)
                nsb = math.sin(nb)
                ncg = math.cos(ng)
                nsg = math.sin(ng)
                nf0 = _resid_one(con, 0, ncb, nsb, ncg, nsg)
                nf1 = _resid_one(con, 1, ncb, nsb, ncg, nsg)
                nnorm = math.hypot(nf0, nf1)
                if nnorm < norm:
                    beta = nb
                    gamma = ng
                    cb = ncb
                    sb = nsb
                    cg = ncg
                    sg = nsg
                    f0 = nf0
                    f1 = nf1
                    norm = nnorm
                    improved = True
                    break
                lam *= 0.5
            # abandon seeds whose progress has stalled: at < 0.1% decrease per
            # step the iteration budget could never reach the tolerance anyway
            if not improved or norm > 0.999 * prev_norm:
                break
        if norm < tol:
            ok[snum] = 1
        roots[snum, 0] = beta
        roots[snum, 1] = gamma
    return roots, ok


_SEEDS_CACHE = {}


def _seed_grid(n: int) -> np.ndarray:
    seeds = _SEEDS_CACHE.get(n)
    if seeds is None:
        vals = -math.pi + (np.arange(n) + 1.0) * (2.0 * math.pi / n)
        bb, gg = np.meshgrid(vals, vals, indexing="ij")
        seeds = np.column_stack([bb.ravel(), gg.ravel()])
        seeds.setflags(write=False)
        _SEEDS_CACHE[n] = seeds
    return seeds


def _angle_dist(a: float, b: float) -> float:
    return abs(wrap_angle(a - b))


def _dedup_roots(roots, tol: float = ROOT_DEDUP_TOL) -> list:
    """Cluster (beta, gamma) roots closer than tol in wrapped angular distance."""
    unique = []
    for root in sorted(roots):
        for kept in unique:
            if _angle_dist(root[0], kept[0]) < tol and _angle_dist(root[1], kept[1]) < tol:
                break
        else:
            unique.append(root)
    return unique


def _beta_closed_form(con_row, selector: Optional[int]):
    """Roots of D + 2*(A1*cos b + B1*sin b + C1) = 0 at gamma = 0."""
    a1 = con_row[1] + con_row[3]
    b1 = con_row[4] + con_row[6]
    c1 = con_row[7] + con_row[9]
    rhs = -(con_row[0] / 2.0 + c1)
    amp = math.hypot(a1, b1)
    if amp < 1e-300:
        if abs(rhs) < 1e-12:
            raise SingularConfigurationError(
                "orientation indeterminate: the closure equation does not depend on the rotation angle"
            )
        return [], False
    k = rhs / amp
    if abs(k) > 1.0 + 1e-9:
        return [], False
    boundary = abs(k) > 1.0 - 1e-12
    k = min(max(k, -1.0), 1.0)
    phi = math.atan2(b1, a1)
    delta = math.acos(k)
    if selector is None:
        roots = [wrap_angle(phi + delta), wrap_angle(phi - delta)]
    else:
        roots = [wrap_angle(phi + delta if selector > 0 else phi - delta)]
    unique = []
    for r in roots:
        if all(_angle_dist(r, u) >= 1e-9 for u in unique):
            unique.append(r)
    return sorted(unique), boundary


# ---------------------------------------------------------------------------
# Forward kinematics: full solutions
# ---------------------------------------------------------------------------

def _rod_scalar(sg: _ScalarGeom, leg_idx: int, px, py, bx, by, bz, rho) -> tuple:
    leg = sg.legs[leg_idx]
    return (
        px + bx - leg.origin[0] - rho * leg.axis[0],
        py + by - leg.origin[1] - rho * leg.axis[1],
        bz - leg.origin[2] - rho * leg.axis[2],
    )


def _passive_scalar(geom: MechanismGeometry, pose: Pose, joints) -> PassiveAngles:
    sg = _scalar_geom(geom)
    thetas = []
    for i in range(2):
        d = sg.offsets[i]
        rx, ry, _ = _rod_scalar(sg, i, pose.x, pose.y, d[0], d[1], d[2], joints[i])
        thetas.append(math.atan2(ry, rx))
    orient = []
    for k in range(len(sg.anchors)):
        bx, by, bz = _tool_anchor_scalar(sg, k, pose.beta, pose.gamma)
        rx, ry, rz = _rod_scalar(sg, 2 + k, pose.x, pose.y, bx, by, bz, joints[2 + k])
        orient.append((math.atan2(rz, math.hypot(rx, ry)), math.atan2(ry, rx)))
    return PassiveAngles(tuple(thetas), tuple(orient))


def _closure_norm(geom: MechanismGeometry, pose: Pose, joints) -> float:
    """Independent re-evaluation of all closure defects (explicit rotation route)."""
    sg = _scalar_geom(geom)
    total = 0.0
    for i in range(2):
        d = sg.offsets[i]
        rx, ry, rz = _rod_scalar(sg, i, pose.x, pose.y, d[0], d[1], d[2], joints[i])
        f = rx * rx + ry * ry + rz * rz - sg.legs[i].length ** 2
        total += f * f
    for k in range(len(sg.anchors)):
        bx, by, bz = _tool_anchor_scalar(sg, k, pose.beta, pose.gamma)
        rx, ry, rz = _rod_scalar(sg, 2 + k, pose.x, pose.y, bx, by, bz, joints[2 + k])
        f = rx * rx + ry * ry + rz * rz - sg.legs[2 + k].length ** 2
        total += f * f
    return math.sqrt(total)


def _orientation_problem(geom: MechanismGeometry, joints, px: float, py: float) -> np.ndarray:
    sg = _scalar_geom(geom)
    rows = []
    for k in range(len(sg.anchors)):
        leg = sg.legs[2 + k]
        rho = joints[2 + k]
        c = (
            px - leg.origin[0] - rho * leg.axis[0],
            py - leg.origin[1] - rho * leg.axis[1],
            -leg.origin[2] - rho * leg.axis[2],
        )
        rows.append(_orientation_constants(c, sg.anchors[k], sg.gamma_axis, sg.beta_axis, leg.length))
    return np.array(rows)


def _solve_2t1r_orientation(geom, joints, px, py, selector):
    con = _orientation_problem(geom, joints, px, py)
    return _beta_closed_form(con[0], selector)


def _closure_range_excludes_zero(row) -> bool:
    """Sound infeasibility test: the closure defect cannot reach zero for any angles.

    For fixed gamma the defect spans D + 2*C1 +- 2*hypot(A1, B1); sampling
    gamma with a Lipschitz margin bounds the span over the whole circle.
    """
    d0, a1, a2, a3, b1, b2, b3, c1, c2, c3 = row
    da = math.hypot(a1, a2)
    db = math.hypot(b1, b2)
    hc = math.hypot(c1, c2)
    # cheap global bound first
    swing = math.hypot(da + abs(a3), db + abs(b3)) + hc
    if d0 + 2.0 * (c3 - swing) > 0.0 or d0 + 2.0 * (c3 + swing) < 0.0:
        return True
    n_samples = 16
    step = 2.0 * math.pi / n_samples
    margin = (2.0 * hc + 2.0 * math.hypot(da, db)) * step / 2.0
    can_reach_down = False
    can_reach_up = False
    for m in range(n_samples):
        g = -math.pi + (m + 0.5) * step
        cg = math.cos(g)
        sg = math.sin(g)
        big_a = a1 * cg + a2 * sg + a3
        big_b = b1 * cg + b2 * sg + b3
        big_c = c1 * cg + c2 * sg + c3
        radius = math.hypot(big_a, big_b)
        if d0 + 2.0 * (big_c - radius) <= margin:
            can_reach_down = True
        if d0 + 2.0 * (big_c + radius) >= -margin:
            can_reach_up = True
        if can_reach_down and can_reach_up:
            return False
    return not (can_reach_down and can_reach_up)


def _solve_2t2r_orientation(geom, joints, px, py, seeds=None, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    con = _orientation_problem(geom, joints, px, py)
    if any(_closure_range_excludes_zero(row) for row in con):
        return [], False
    if seeds is None:
        seeds = _seed_grid(NEWTON_SEED_GRID)
    roots, ok = _newton_orientation(con, seeds, tol, max_iter)
    good = roots[ok.astype(bool)]
    if good.size == 0:
        return [], bool(len(seeds))
    # wrap into (-pi, pi] and group the seed swarm on a grid two decades below
    # the dedup tolerance (converged duplicates agree far more tightly); the
    # exact pairwise pass then enforces the dedup tolerance on the survivors
    wrapped = math.pi - (math.pi - good) % (2.0 * math.pi)
    keys = np.round(wrapped / (ROOT_DEDUP_TOL * 1e-2)).astype(np.int64) + (1 << 30)
    combined = keys[:, 0] * np.int64(1 << 31) + keys[:, 1]
    _, first = np.unique(combined, return_index=True)
    converged = [(float(wrapped[i, 0]), float(wrapped[i, 1])) for i in sorted(first)]
    return _dedup_roots(converged), bool(len(seeds))


def forward_kinematics(
    geom: MechanismGeometry,
    joints,
    assembly: Optional[int] = None,
    orientation: Optional[int] = None,
) -> list:
    """All forward-kinematics solutions for the given joints.

    `assembly` picks the translation branch (+1/-1, None for both);
    `orientation` picks the closed-form rotation branch for the one-rotation
    variant (ignored for two rotations, where the Newton multistart returns
    every root).  Solutions are deterministic: ordered by branch then angles.
    """
    joints = joints if isinstance(joints, JointVector) else JointVector(tuple(joints))
    check_joints(geom, joints)
    branches = (1, -1) if assembly is None else (assembly,)
    solutions = []
    failures = []
    newton_ran = False
    for branch in branches:
        if geom.variant is Variant.PLANAR_2T:
            base = forward_kinematics_planar(geom, joints, branch)
            if base.residual_norm >= RESIDUAL_LIMIT:
                raise AssertionError(f"planar solution failed re-verification: residual {base.residual_norm}")
            solutions.append(base)
            continue
        px, py, planar_boundary = _planar_point(geom, joints, branch)
        base_flags = ("serial-boundary",) if planar_boundary else ()
        if geom.variant is Variant.SPATIAL_2T1R:
            betas, boundary = _solve_2t1r_orientation(geom, joints, px, py, orientation)
            if not betas:
                failures.append(f"branch {branch:+d}: no rotation angle closes leg 3")
                continue
            flags = base_flags + (("orientation-boundary",) if boundary else ())
            for beta in betas:
                pose = Pose(px, py, beta=beta)
                res = _closure_norm(geom, pose, joints)
                if res < RESIDUAL_LIMIT:
                    solutions.append(AssemblySolution(pose, _passive_scalar(geom, pose, joints), res, branch, flags))
        else:
            roots, ran = _solve_2t2r_orientation(geom, joints, px, py)
            newton_ran = newton_ran or ran
            kept = 0
            for beta, gamma in roots:
                pose = Pose(px, py, beta=beta, gamma=gamma)
                res = _closure_norm(geom, pose, joints)
                # independent re-verification of each closure equation
                if res < RESIDUAL_LIMIT:
                    solutions.append(AssemblySolution(pose, _passive_scalar(geom, pose, joints), res, branch, base_flags))
                    kept += 1
            if kept == 0:
                failures.append(f"branch {branch:+d}: no orientation root")
    if not solutions:
        detail = "; ".join(failures) if failures else "no branch produced a solution"
        if geom.variant is Variant.SPATIAL_2T2R and newton_ran:
            raise NewtonConvergenceError(f"no assembly: the orientation solver found no root ({detail})")
        raise NoAssemblyError(f"no assembly: {detail}")
    solutions.sort(
        key=lambda s: (-s.assembly, s.pose.beta if s.pose.beta is not None else 0.0, s.pose.gamma if s.pose.gamma is not None else 0.0)
    )
    return solutions


def forward_kinematics_tracked(geom: MechanismGeometry, joints, reference: Pose) -> AssemblySolution:
    """The forward-kinematics solution on the branch continuous with `reference`.

    The translation branch is chosen by proximity of the tool point; the
    orientation stage is seeded at the reference angles (single-seed Newton
    for the two-rotation variant).
    """
    joints = joints if isinstance(joints, JointVector) else JointVector(tuple(joints))
    check_joints(geom, joints)
    best = None
    for branch in (1, -1):
        px, py, _ = _planar_point(geom, joints, branch)
        d = math.hypot(px - reference.x, py - reference.y)
        if best is None or d < best[0]:
            best = (d, branch, px, py)
    _, branch, px, py = best
    if geom.variant is Variant.PLANAR_2T:
        return forward_kinematics_planar(geom, joints, branch)
    if geom.variant is Variant.SPATIAL_2T1R:
        betas, boundary = _solve_2t1r_orientation(geom, joints, px, py, None)
        if not betas:
            raise NoAssemblyError("no assembly: no rotation angle closes leg 3 on the tracked branch")
        beta = min(betas, key=lambda b: _angle_dist(b, reference.beta))
        pose = Pose(px, py, beta=beta)
    else:
        seeds = np.array([[reference.beta, reference.gamma]])
        roots, _ = _solve_2t2r_orientation(geom, joints, px, py, seeds=seeds)
        if not roots:
            raise NewtonConvergenceError("orientation solver did not converge from the tracked seed")
        beta, gamma = roots[0]
        pose = Pose(px, py, beta=beta, gamma=gamma)
    res = _closure_norm(geom, pose, joints)
    if res >= RESIDUAL_LIMIT:
        raise NoAssemblyError(f"tracked branch failed re-verification (residual {res:.3g})")
    return AssemblySolution(pose, _passive_scalar(geom, pose, joints), res, branch, ())


def stacked_z_apply(geom: MechanismGeometry, pose: Pose, rho_z: float) -> Pose:
    """Apply the serial stacked axis: identity transmission z = rho_z."""
    if geom.stacked_z is None:
        raise GeometryConfigError("geometry has no stacked axis")
    rho_z = float(rho_z)
    if rho_z < geom.stacked_z.rho_min - 1e-9 or rho_z > geom.stacked_z.rho_max + 1e-9:
        raise JointLimitError(
            f"stacked axis value {rho_z:.6g} is outside its limits "
            f"[{geom.stacked_z.rho_min:.6g}, {geom.stacked_z.rho_max:.6g}]"
        )
    return Pose(pose.x, pose.y, beta=pose.beta, gamma=pose.gamma, z=rho_z)


def warmup():
    """Force compilation of the orientation solver kernels."""
    con = np.zeros((2, 10))
    con[:, 0] = 1.0
    con[:, 3] = 1.0
    _newton_orientation(con, np.array([[0.1, 0.1]]), NEWTON_TOL, 3)
