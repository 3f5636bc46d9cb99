"""Quasi-static soft-gripper and contact simulator.

The gripper is a two-finger skeleton (4 nodes per finger, palm to tip) with
a linear 6x6 compliance mapping the wrist wrench to a fingertip-frame twist.
Contact with scene surfaces is a penalty model; the coupled deformation /
contact problem is solved by a relaxed fixed-point iteration.

All wrenches returned here are reactions ON the gripper, expressed at the
wrist origin in the wrist frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Pose, Wrench

GRIPPER_KINDS = ("tendon_actuated", "pneumatic")

# Characteristic lever used to compare rotational to translational deflection
# when clamping; roughly the palm-to-tip distance.
_TWIST_LENGTH = 0.1


# ---------------------------------------------------------------------------
# Scene surfaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Plane:
    """Horizontal surface occupying z <= height."""
    height: float


@dataclass(frozen=True)
class Cylinder:
    """Limb stand-in: axis parallel to +X through axis_point.

    half_length bounds the solid along the axis (contact is lost past the
    ends, which is what lets the wiping controller's timeout reversal fire).
    """
    axis_point: tuple = (0.0, 0.0, 0.0)
    radius: float = 0.05
    half_length: float = math.inf


@dataclass(frozen=True)
class Tether:
    """Slack line from the grip point to an anchor (blanket drag / held load)."""
    anchor: tuple = (0.0, 0.0, 0.0)
    slack_length: float = 0.1
    stiffness: float = 60.0


@dataclass(frozen=True)
class SpringPile:
    """Compressible pile (blanket on a bed): penalty plane with its own stiffness."""
    rest_height: float = 0.0
    stiffness: float = 250.0


@dataclass(frozen=True)
class SceneSurface:
    shape: object
    friction_mu: float = 0.5
    contact_stiffness: float = 250.0

    def __post_init__(self):
        if not (0.0 <= self.friction_mu <= 2.0):
            raise ValueError("friction_mu must be in [0, 2]")
        if self.contact_stiffness <= 0.0:
            raise ValueError("contact_stiffness must be positive")
        if isinstance(self.shape, Cylinder) and self.shape.radius <= 0.0:
            raise ValueError("cylinder radius must be positive")
        if isinstance(self.shape, (Tether, SpringPile)) and self.shape.stiffness <= 0.0:
            raise ValueError("shape stiffness must be positive")


# ---------------------------------------------------------------------------
# Gripper model
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GripperModel:
    """Two-finger soft gripper with linear wrist compliance.

    skeleton: (2, 4, 3) rest node positions in the wrist frame, palm to tip.
    compliance: 6x6 SPD matrix, fingertip twist per unit wrist wrench.
    aperture: 0 closed .. 1 open; sets the rest separation of the tips.
    max_deflection: clamp on node displacement norm (linearity limit).
    """

    kind: str
    skeleton: np.ndarray
    compliance: np.ndarray
    aperture: float
    max_deflection: float

    def __post_init__(self):
        if self.kind not in GRIPPER_KINDS:
            raise ValueError(f"unknown gripper kind {self.kind!r}")
        C = np.asarray(self.compliance, dtype=float)
        if C.shape != (6, 6) or not np.allclose(C, C.T, atol=1e-12):
            raise ValueError("compliance must be a symmetric 6x6 matrix")
        eig = np.linalg.eigvalsh(C)
        if eig.min() <= 0.0:
            raise ValueError("compliance must be positive definite")
        sk = np.asarray(self.skeleton, dtype=float)
        if sk.shape != (2, 4, 3):
            raise ValueError("skeleton must have shape (2, 4, 3)")
        object.__setattr__(self, "skeleton", sk)
        object.__setattr__(self, "compliance", C)

    @property
    def rest_tips(self) -> np.ndarray:
        """(2, 3) rest fingertip positions, wrist frame."""
        return self.skeleton[:, -1, :]


# Diagonal compliance presets. Translational 4 mm/N and rotational
# 0.05 rad/(N*m) make 3-5 N loads move the fingertips by roughly a quarter
# of the image width at the default camera scale; the pneumatic gripper is
# 2.5x more compliant throughout.
_TENDON_TRANS = 4.0e-3
_TENDON_ROT = 5.0e-2
_PNEUMATIC_FACTOR = 2.5


def _skeleton(aperture: float) -> np.ndarray:
    """Rest skeleton, symmetric about the X=0 plane. Tip separation stays
    above twice the rendered disc radius so the discs never merge."""
    half_sep_palm = 0.008
    half_sep_tip = 0.011 + 0.011 * aperture        # 11..22 mm from centerline
    ys = np.array([0.0, 0.026, 0.052, 0.075])      # palm to tip, forward
    zs = np.array([-0.02, -0.05, -0.08, -0.105])   # sinking toward the scene
    frac = ys / ys[-1]
    xs = half_sep_palm + (half_sep_tip - half_sep_palm) * frac
    fingers = []
    for side in (-1.0, 1.0):
        fingers.append(np.stack([side * xs, ys, zs], axis=1))
    return np.stack(fingers, axis=0)


def gripper_preset(kind: str, aperture: float = 1.0) -> GripperModel:
    """Build one of the two stock grippers at a given aperture."""
    if kind not in GRIPPER_KINDS:
        raise ValueError(f"unknown gripper kind {kind!r}; choose from {GRIPPER_KINDS}")
    if not (0.0 <= aperture <= 1.0):
        raise ValueError("aperture must be in [0, 1]")
    factor = 1.0 if kind == "tendon_actuated" else _PNEUMATIC_FACTOR
    diag = np.array([_TENDON_TRANS] * 3 + [_TENDON_ROT] * 3) * factor
    return GripperModel(
        kind=kind,
        skeleton=_skeleton(aperture),
        compliance=np.diag(diag),
        aperture=aperture,
        # Linearity holds past the largest scripted loads (~11 N); clamping
        # inside the working range would flatten the visual force cues.
        max_deflection=0.045 * factor,
    )


@dataclass(frozen=True, eq=False)
class GripperConfiguration:
    """Deformed node positions (wrist frame) plus the wrench that caused them."""

    nodes: np.ndarray            # (2, 4, 3)
    applied_wrench: Wrench
    rest_nodes: np.ndarray       # (2, 4, 3), for deflection queries

    @property
    def tips(self) -> np.ndarray:
        return self.nodes[:, -1, :]

    @property
    def tip_deflections(self) -> np.ndarray:
        """(2, 3) fingertip displacement from rest."""
        return self.nodes[:, -1, :] - self.rest_nodes[:, -1, :]


def mirror_x_configuration(config: GripperConfiguration) -> GripperConfiguration:
    """Reflect a configuration through the X=0 plane (finger order swapped so
    node arrays remain left/right ordered)."""
    flip = np.array([-1.0, 1.0, 1.0])
    w = config.applied_wrench
    mw = Wrench(w.force * flip, w.torque * np.array([1.0, -1.0, -1.0]))
    return GripperConfiguration(
        nodes=(config.nodes * flip)[::-1].copy(),
        applied_wrench=mw,
        rest_nodes=(config.rest_nodes * flip)[::-1].copy(),
    )


# Quadratic palm-to-tip interpolation of the fingertip twist.
_NODE_FRACTION = np.array([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]) ** 2


def deform(model: GripperModel, w: Wrench) -> GripperConfiguration:
    """Deform the skeleton under a wrist wrench via the linear compliance.

    The fingertip twist is C @ w; intermediate nodes take a quadratically
    growing share of it from palm (none) to tip (all). Displacements are
    scaled down uniformly if the largest node displacement would exceed
    max_deflection.
    """
    twist = model.compliance @ w.as_array()
    dt, dr = twist[:3], twist[3:]
    rest = model.skeleton
    # Per-node displacement of the full twist: translation + linearized rotation.
    disp = dt[None, None, :] + np.cross(np.broadcast_to(dr, rest.shape), rest)
    disp = disp * _NODE_FRACTION[None, :, None]
    max_norm = float(np.sqrt((disp ** 2).sum(axis=2)).max())
    if max_norm > model.max_deflection:
        disp = disp * (model.max_deflection / max_norm)
    return GripperConfiguration(
        nodes=rest + disp, applied_wrench=w, rest_nodes=rest)


# ---------------------------------------------------------------------------
# Contact
# ---------------------------------------------------------------------------

_VELOCITY_DEADZONE = 1e-6  # m/s; below this no friction force is produced


def _penalty_contact(tip_w: np.ndarray, normal: np.ndarray, depth: float,
                     stiffness: float, mu: float, velocity: np.ndarray):
    """Normal penalty force + regularized Coulomb friction for one fingertip."""
    fn = stiffness * depth * normal
    v_t = velocity - (velocity @ normal) * normal
    speed = float(np.linalg.norm(v_t))
    if speed > _VELOCITY_DEADZONE:
        fn = fn - mu * float(np.linalg.norm(fn)) * (v_t / speed)
    return fn


def _tip_contacts(tips_world: np.ndarray, surface: SceneSurface,
                  velocity: np.ndarray):
    """Yield (point, force) world-frame pairs for fingertip contacts."""
    shape = surface.shape
    mu = surface.friction_mu
    out = []
    if isinstance(shape, Plane):
        for tip in tips_world:
            depth = shape.height - tip[2]
            if depth > 0.0:
                out.append((tip, _penalty_contact(
                    tip, np.array([0.0, 0.0, 1.0]), depth,
                    surface.contact_stiffness, mu, velocity)))
    elif isinstance(shape, SpringPile):
        for tip in tips_world:
            depth = shape.rest_height - tip[2]
            if depth > 0.0:
                out.append((tip, _penalty_contact(
                    tip, np.array([0.0, 0.0, 1.0]), depth,
                    shape.stiffness, mu, velocity)))
    elif isinstance(shape, Cylinder):
        ax = np.asarray(shape.axis_point, dtype=float)
        for tip in tips_world:
            if abs(tip[0] - ax[0]) > shape.half_length:
                continue
            radial = np.array([0.0, tip[1] - ax[1], tip[2] - ax[2]])
            dist = float(np.linalg.norm(radial))
            depth = shape.radius - dist
            if depth > 0.0 and dist > 1e-12:
                out.append((tip, _penalty_contact(
                    tip, radial / dist, depth,
                    surface.contact_stiffness, mu, velocity)))
    elif isinstance(shape, Tether):
        grip = tips_world.mean(axis=0)
        to_anchor = np.asarray(shape.anchor, dtype=float) - grip
        dist = float(np.linalg.norm(to_anchor))
        stretch = dist - shape.slack_length
        if stretch > 0.0 and dist > 1e-12:
            out.append((grip, shape.stiffness * stretch * (to_anchor / dist)))
    else:
        raise TypeError(f"unknown surface shape {type(shape).__name__}")
    return out


def _contact_arrays(tips_world: np.ndarray, origin: np.ndarray, R: np.ndarray,
                    surfaces, velocity: np.ndarray) -> np.ndarray:
    """Wrist-frame reaction 6-vector for world-frame fingertip positions."""
    force = np.zeros(3)
    torque = np.zeros(3)
    for surf in surfaces:
        for point, f in _tip_contacts(tips_world, surf, velocity):
            force += f
            torque += np.cross(point - origin, f)
    return np.concatenate([R.T @ force, R.T @ torque])


def contact_wrench(model: GripperModel, pose: Pose, surface, velocity,
                   config: GripperConfiguration | None = None) -> Wrench:
    """Reaction wrench on the gripper from one surface (or a list of them).

    Contact acts at the fingertips of `config` (rest skeleton if omitted).
    Forces and moment arms are evaluated in world coordinates about the wrist
    origin, then expressed in the wrist frame.
    """
    surfaces = surface if isinstance(surface, (list, tuple)) else [surface]
    velocity = np.asarray(velocity, dtype=float)
    tips_local = (config.tips if config is not None else model.rest_tips)
    tips_world = pose.to_world(tips_local)
    w6 = _contact_arrays(tips_world, pose.position, pose.rotation(),
                         surfaces, velocity)
    return Wrench.from_array(w6)


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    config: GripperConfiguration
    wrench: Wrench               # total wrench: contact + external
    converged: bool
    iterations: int


# Stopping tolerance for the fixed point. Tighter than the 1e-6 N contract
# so that the self-consistency residual |contact(deform(w)) - w| stays below
# 1e-6 even for loop gains near the stability limit.
_EQ_TOL = 1e-7
_EQ_MAX_ITER = 50
_EQ_RELAX = 0.5


# The fixed-point loop below is deliberately scalar Python: it runs ~15-30
# times per wrench sample at 100 Hz across hundreds of thousands of rollout
# samples, where tiny-array numpy call overhead dominates by ~5x. The math is
# the same as deform()/contact_wrench(); tests pin the two paths together.

def _scalar_contact(tips_world, origin, surfaces, vx, vy, vz):
    """Sum of (force, torque about origin) in world frame, scalar math."""
    fx = fy = fz = tx = ty = tz = 0.0
    for surf in surfaces:
        shape = surf.shape
        mu = surf.friction_mu
        contacts = ()
        if isinstance(shape, (Plane, SpringPile)):
            top = shape.height if isinstance(shape, Plane) else shape.rest_height
            k = (surf.contact_stiffness if isinstance(shape, Plane)
                 else shape.stiffness)
            contacts = []
            for (wx, wy, wz) in tips_world:
                depth = top - wz
                if depth > 0.0:
                    contacts.append(((wx, wy, wz), (0.0, 0.0, 1.0), k * depth))
        elif isinstance(shape, Cylinder):
            ax, ay, az = shape.axis_point
            contacts = []
            for (wx, wy, wz) in tips_world:
                if abs(wx - ax) > shape.half_length:
                    continue
                ry_, rz_ = wy - ay, wz - az
                dist = math.sqrt(ry_ * ry_ + rz_ * rz_)
                depth = shape.radius - dist
                if depth > 0.0 and dist > 1e-12:
                    contacts.append(((wx, wy, wz),
                                     (0.0, ry_ / dist, rz_ / dist),
                                     surf.contact_stiffness * depth))
        elif isinstance(shape, Tether):
            gx = 0.5 * (tips_world[0][0] + tips_world[1][0])
            gy = 0.5 * (tips_world[0][1] + tips_world[1][1])
            gz = 0.5 * (tips_world[0][2] + tips_world[1][2])
            dx_, dy_, dz_ = (shape.anchor[0] - gx, shape.anchor[1] - gy,
                             shape.anchor[2] - gz)
            dist = math.sqrt(dx_ * dx_ + dy_ * dy_ + dz_ * dz_)
            stretch = dist - shape.slack_length
            if stretch > 0.0 and dist > 1e-12:
                mag = shape.stiffness * stretch / dist
                cfx, cfy, cfz = mag * dx_, mag * dy_, mag * dz_
                rx_, ry_, rz_ = gx - origin[0], gy - origin[1], gz - origin[2]
                fx += cfx; fy += cfy; fz += cfz
                tx += ry_ * cfz - rz_ * cfy
                ty += rz_ * cfx - rx_ * cfz
                tz += rx_ * cfy - ry_ * cfx
            continue
        else:
            raise TypeError(f"unknown surface shape {type(shape).__name__}")
        for (pt, n, fn_mag) in contacts:
            nfx, nfy, nfz = fn_mag * n[0], fn_mag * n[1], fn_mag * n[2]
            vn = vx * n[0] + vy * n[1] + vz * n[2]
            tvx, tvy, tvz = vx - vn * n[0], vy - vn * n[1], vz - vn * n[2]
            speed = math.sqrt(tvx * tvx + tvy * tvy + tvz * tvz)
            if speed > _VELOCITY_DEADZONE:
                fmag = mu * abs(fn_mag) / speed
                nfx -= fmag * tvx; nfy -= fmag * tvy; nfz -= fmag * tvz
            rx_, ry_, rz_ = (pt[0] - origin[0], pt[1] - origin[1],
                             pt[2] - origin[2])
            fx += nfx; fy += nfy; fz += nfz
            tx += ry_ * nfz - rz_ * nfy
            ty += rz_ * nfx - rx_ * nfz
            tz += rx_ * nfy - ry_ * nfx
    return fx, fy, fz, tx, ty, tz


def solve_equilibrium(model: GripperModel, pose: Pose, surface, velocity,
                      external: Wrench | None = None,
                      warm_start: Wrench | None = None,
                      need_config: bool = True) -> EquilibriumResult:
    """Couple deformation and contact by relaxed fixed-point iteration.

    `external` is an extra wrench on the wrist (gravity disturbance); it
    deforms the gripper and is included in the returned wrench but is not
    part of the contact feedback loop. Never raises on non-convergence: the
    last iterate is returned with converged=False. Pass need_config=False in
    wrench-only rollouts to skip building the full node geometry.
    """
    surfaces = surface if isinstance(surface, (list, tuple)) else [surface]
    velocity = np.asarray(velocity, dtype=float)
    vx, vy, vz = float(velocity[0]), float(velocity[1]), float(velocity[2])
    ext = external.as_array() if external is not None else np.zeros(6)
    w = [float(v) for v in (warm_start.as_array() if warm_start is not None
                            else np.zeros(6))]
    e0, e1, e2, e3, e4, e5 = (float(v) for v in ext)
    ox, oy, oz = (float(v) for v in pose.position)
    cy_, sy_ = math.cos(pose.yaw), math.sin(pose.yaw)
    C = model.compliance
    c_diag = None
    if not np.any(C - np.diag(np.diagonal(C))):
        c_diag = [float(v) for v in np.diagonal(C)]
    rest = [tuple(map(float, node)) for finger in model.skeleton for node in finger]
    frac = [float(f) for f in _NODE_FRACTION] * 2
    max_defl = model.max_deflection
    tip_idx = (3, 7)

    converged = False
    iterations = 0
    for iterations in range(1, _EQ_MAX_ITER + 1):
        a0, a1, a2 = w[0] + e0, w[1] + e1, w[2] + e2
        a3, a4, a5 = w[3] + e3, w[4] + e4, w[5] + e5
        if c_diag is not None:
            dtx, dty, dtz = c_diag[0] * a0, c_diag[1] * a1, c_diag[2] * a2
            drx, dry, drz = c_diag[3] * a3, c_diag[4] * a4, c_diag[5] * a5
        else:
            tw = C @ np.array([a0, a1, a2, a3, a4, a5])
            dtx, dty, dtz, drx, dry, drz = (float(v) for v in tw)
        # Node displacements of the interpolated twist, then the uniform clamp.
        disp = []
        max_sq = 0.0
        for (rx_, ry_, rz_), fr in zip(rest, frac):
            ddx = fr * (dtx + dry * rz_ - drz * ry_)
            ddy = fr * (dty + drz * rx_ - drx * rz_)
            ddz = fr * (dtz + drx * ry_ - dry * rx_)
            sq = ddx * ddx + ddy * ddy + ddz * ddz
            if sq > max_sq:
                max_sq = sq
            disp.append((ddx, ddy, ddz))
        scale = 1.0
        if max_sq > max_defl * max_defl:
            scale = max_defl / math.sqrt(max_sq)
        tips_world = []
        for ti in tip_idx:
            rx_, ry_, rz_ = rest[ti]
            ddx, ddy, ddz = disp[ti]
            lx, ly, lz = rx_ + scale * ddx, ry_ + scale * ddy, rz_ + scale * ddz
            tips_world.append((cy_ * lx - sy_ * ly + ox,
                               sy_ * lx + cy_ * ly + oy,
                               lz + oz))
        fx, fy, fz, tx, ty, tz = _scalar_contact(tips_world, (ox, oy, oz),
                                                 surfaces, vx, vy, vz)
        # Back to the wrist frame (yaw only).
        w_new = (cy_ * fx + sy_ * fy, -sy_ * fx + cy_ * fy, fz,
                 cy_ * tx + sy_ * ty, -sy_ * tx + cy_ * ty, tz)
        delta = 0.0
        w_next = []
        for i in range(6):
            wi = (1.0 - _EQ_RELAX) * w[i] + _EQ_RELAX * w_new[i]
            d = abs(wi - w[i])
            if d > delta:
                delta = d
            w_next.append(wi)
        w = w_next
        if delta < _EQ_TOL:
            converged = True
            break
    total = Wrench.from_array(np.array(w) + ext)
    config = deform(model, total) if need_config else None
    return EquilibriumResult(
        config=config,
        wrench=total,
        converged=converged,
        iterations=iterations,
    )
