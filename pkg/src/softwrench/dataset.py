"""Scripted interaction rollouts, sensor modeling, persistence, and splits.

A recording is produced the way the real rig would see it: a pose script
drives the gripper at the wrench rate (10x the image rate), the contact
solver provides the true wrench, the sensor model adds white noise plus a
random-walk drift, images are paired to the nearest wrench sample, and the
sequence is tared so its first frame reads exactly zero.

Wrist roll/pitch excursions are modeled as a hidden gravity disturbance: the
gripper's weight is tared at level pose, so tilting the wrist shifts the
measured force. The mass is taken as balanced at the wrist origin, which
makes the disturbance a pure force. Motor efforts are an affine image of the
true wrench through a fixed rank-5 matrix: one wrench direction (lateral
force) produces no effort response at all, which caps what any effort-driven
estimator can recover.

On disk a dataset is a manifest plus one directory per sequence holding a
frames.csv (9-significant-digit text) and 8-bit PNGs.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import Pose, Rng, Wrench, _stable_hash64
from .gripper import (Cylinder, GripperModel, Plane, SceneSurface, SpringPile,
                      Tether, gripper_preset, solve_equilibrium)
from .render import (CameraModel, EnvironmentSpec, environment_preset, render,
                     render_background, save_png)

# Sensor model (per wrench sample).
SENSOR_NOISE_F = 0.05     # N, white
SENSOR_NOISE_T = 0.005    # N*m, white
DRIFT_STEP_F = 0.002      # N, random-walk increment std
DRIFT_STEP_T = 0.0002     # N*m

# Effort model: effort = EFFORT_MATRIX @ wrench + EFFORT_OFFSET + noise.
# Rows are the six actuators (wrist roll, wrist pitch, wrist yaw, gripper,
# telescoping arm, arm lift); columns are (Fx, Fy, Fz, Tx, Ty, Tz). Torque
# columns carry most of the gain, as gearing would. The Fy column is zero:
# the matrix has rank 5 and lateral force is invisible to the motors.
EFFORT_MATRIX = np.array([
    [0.30, 0.0, -0.10, 14.0,  1.5,  0.8],
    [0.10, 0.0,  0.45,  1.2, 13.0, -0.9],
    [-0.25, 0.0,  0.05,  0.6,  1.1, 12.5],
    [0.55, 0.0,  0.30, -2.0,  1.8,  2.2],
    [0.95, 0.0, -0.20,  0.9, -2.5,  0.4],
    [0.15, 0.0,  1.10, -1.4,  0.7, -0.3],
])
EFFORT_OFFSET = np.array([0.35, -0.20, 0.10, 1.05, 0.60, -0.45])
EFFORT_NOISE = 0.1
# Current readbacks come in integer-ish counts; quantization is what the
# sensor LSB does on top of the Gaussian noise.
EFFORT_QUANTUM = 0.5

# Gravity disturbance from wrist tilt (tared at level pose). Teleoperation
# swings both roll and pitch; roll maps to the lateral force direction, the
# one the rank-5 effort matrix cannot see.
TILT_WEIGHT = 7.0         # N, gripper + camera assembly weight
_TILT_REVERT = 0.6        # 1/s, mean reversion of the tilt random walk
_ROLL_STD = 0.36          # rad, stationary std of wrist roll
_ROLL_CLAMP = 0.9         # rad
_PITCH_STD = 0.34         # rad
_PITCH_CLAMP = 0.8        # rad

PRIMITIVES = ("push", "slide", "grasp", "manipulate_object", "manipulate_scene")
DEFAULT_ENVS = ("lab", "office1", "office2", "home")
WRENCH_RATE_FACTOR = 10   # wrench samples per image frame

_FLOAT_FMT = "%.9g"

CSV_COLUMNS = ("t,fx,fy,fz,tx,ty,tz,e1,e2,e3,e4,e5,e6,px,py,pz,yaw,img_relpath")


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Frame:
    timestamp: float
    image_path: str | None
    wrench: Wrench            # tared measured wrench (the regression target)
    effort: np.ndarray        # (6,) unitless
    pose: Pose
    env_id: str
    image: np.ndarray | None = None   # in-memory pixels before persistence


@dataclass(eq=False)
class SequenceRecording:
    primitive: str
    env_id: str
    gripper_kind: str
    frames: list
    seed: int
    image_rate_hz: float
    seq_id: str | None = None


@dataclass(frozen=True)
class SequenceEntry:
    seq_id: str
    primitive: str
    env_id: str
    n_frames: int
    seed: int


@dataclass(eq=False)
class Manifest:
    root: str
    version: int
    gripper_kind: str
    image_rate_hz: float
    wrench_rate_hz: float
    entries: list

    def env_ids(self):
        seen = []
        for e in self.entries:
            if e.env_id not in seen:
                seen.append(e.env_id)
        return seen

    def total_frames(self) -> int:
        return sum(e.n_frames for e in self.entries)


# ---------------------------------------------------------------------------
# Sensor model, taring, synchronization
# ---------------------------------------------------------------------------

def apply_sensor_model(raw: np.ndarray, rng: Rng,
                       noise_f: float = SENSOR_NOISE_F,
                       noise_t: float = SENSOR_NOISE_T,
                       drift_f: float = DRIFT_STEP_F,
                       drift_t: float = DRIFT_STEP_T) -> np.ndarray:
    """Measured wrench stream: raw + white noise + accumulating random walk."""
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[1] != 6 or raw.shape[0] == 0:
        raise ValueError("expected a nonempty (n, 6) wrench stream")
    gen = rng.gen
    scale = np.array([noise_f] * 3 + [noise_t] * 3)
    dscale = np.array([drift_f] * 3 + [drift_t] * 3)
    white = gen.normal(0.0, 1.0, size=raw.shape) * scale
    drift = np.cumsum(gen.normal(0.0, 1.0, size=raw.shape) * dscale, axis=0)
    return raw + white + drift


def tare(stream):
    """Subtract the first measured wrench from every sample.

    Accepts a (n, 6) array or a SequenceRecording; the first entry becomes
    exactly zero either way.
    """
    if isinstance(stream, SequenceRecording):
        if not stream.frames:
            raise ValueError("cannot tare an empty sequence")
        w0 = stream.frames[0].wrench.as_array()
        frames = [replace(f, wrench=Wrench.from_array(f.wrench.as_array() - w0))
                  for f in stream.frames]
        return replace(stream, frames=frames)
    arr = np.asarray(stream, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("cannot tare an empty stream")
    return arr - arr[0]


def synchronize(image_times, wrench_times, image_period: float | None = None):
    """Pair each image with the nearest wrench sample (earlier wins ties).

    Returns a list of (image_index, wrench_index) pairs. Images with no
    wrench sample within one image period are dropped.
    """
    image_times = np.asarray(image_times, dtype=float)
    wrench_times = np.asarray(wrench_times, dtype=float)
    if image_times.size == 0 or wrench_times.size == 0:
        raise ValueError("both streams must be nonempty")
    if image_period is None:
        image_period = (float(np.diff(image_times).min())
                        if image_times.size > 1 else math.inf)
    pairs = []
    right = np.searchsorted(wrench_times, image_times)
    tie_eps = 1e-9  # a nanosecond: float noise must not decide ties
    for i, t in enumerate(image_times):
        cands = [j for j in (right[i] - 1, right[i]) if 0 <= j < wrench_times.size]
        # Earlier sample wins ties at equal distance.
        if len(cands) == 2:
            d0, d1 = (abs(wrench_times[j] - t) for j in cands)
            best = cands[0] if d0 <= d1 + tie_eps else cands[1]
        else:
            best = cands[0]
        if abs(wrench_times[best] - t) <= image_period:
            pairs.append((i, best))
    return pairs


def simulate_efforts(wrench: Wrench, rng: Rng, noise: float = EFFORT_NOISE,
                     quantum: float = 0.0) -> np.ndarray:
    """Unitless actuator efforts responding to the true wrench.

    quantum > 0 rounds the readings to that step (sensor LSB); the rollout
    applies EFFORT_QUANTUM, tests mostly leave it off.
    """
    w = wrench.as_array() if isinstance(wrench, Wrench) else np.asarray(wrench, float)
    e = EFFORT_MATRIX @ w + EFFORT_OFFSET + rng.gen.normal(0.0, noise, size=6)
    if quantum > 0.0:
        e = np.round(e / quantum) * quantum
    return e


def split_by_environment(manifest: Manifest, holdout_env_id: str):
    """Exhaustive, disjoint (train, test) split by recording environment."""
    test_entries = [e for e in manifest.entries if e.env_id == holdout_env_id]
    if not test_entries:
        raise ValueError(f"holdout environment {holdout_env_id!r} has no sequences")
    train_entries = [e for e in manifest.entries if e.env_id != holdout_env_id]
    train = replace(manifest, entries=train_entries)
    test = replace(manifest, entries=test_entries)
    return train, test


# ---------------------------------------------------------------------------
# Scene derivation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SceneParams:
    """Per-environment contact properties; stiffness is softened for the
    pneumatic gripper to keep the penalty loop contractive."""
    surface_top: float
    contact_stiffness: float
    friction_mu: float
    cylinder_prob: float
    cylinder_radius: float


def scene_params(env_id: str, gripper_kind: str) -> SceneParams:
    gen = Rng(_stable_hash64("scene:" + env_id)).gen
    # Stiffness and friction ranges keep the relaxed contact iteration
    # contractive: the loop gain scales like 2*k*C*(1+mu), and the 0.5
    # relaxation converges only below gain 3.
    stiff = float(gen.uniform(170.0, 220.0))
    if gripper_kind == "pneumatic":
        stiff *= 0.4
    return SceneParams(
        surface_top=float(gen.uniform(-0.14, -0.10)),
        contact_stiffness=stiff,
        friction_mu=float(gen.uniform(0.15, 0.45)),
        cylinder_prob=float(gen.uniform(0.15, 0.35)),
        cylinder_radius=float(gen.uniform(0.05, 0.08)),
    )


def _pick_surface(params: SceneParams, gen: np.random.Generator) -> SceneSurface:
    """Plane or limb-like cylinder under the fingertips."""
    if gen.random() < params.cylinder_prob:
        r = params.cylinder_radius
        shape = Cylinder(axis_point=(0.0, 0.075, params.surface_top - r), radius=r)
    else:
        shape = Plane(params.surface_top)
    return SceneSurface(shape, friction_mu=params.friction_mu,
                        contact_stiffness=params.contact_stiffness)


class _TiltGravity:
    """Mean-reverting wrist roll/pitch; returns the gravity-delta wrench.

    The mass rides at the wrist origin, so the disturbance is a pure force:
    no torque trace, and nothing the rank-5 effort map can recover along its
    kernel.
    """

    def __init__(self, gen: np.random.Generator, dt: float, scale: float = 1.0):
        self.gen = gen
        self.dt = dt
        self.scale = scale
        self.roll = 0.0
        self.pitch = 0.0

    def step(self) -> Wrench:
        k = math.sqrt(2.0 * _TILT_REVERT * self.dt) * self.scale
        self.roll += (-_TILT_REVERT * self.roll * self.dt
                      + _ROLL_STD * k * self.gen.normal())
        self.pitch += (-_TILT_REVERT * self.pitch * self.dt
                       + _PITCH_STD * k * self.gen.normal())
        self.roll = min(max(self.roll, -_ROLL_CLAMP), _ROLL_CLAMP)
        self.pitch = min(max(self.pitch, -_PITCH_CLAMP), _PITCH_CLAMP)
        cr, sr = math.cos(self.roll), math.sin(self.roll)
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        # Wrist-frame weight minus its level-pose reading (which taring removes).
        force = TILT_WEIGHT * np.array([sp * cr, -sr, 1.0 - cp * cr])
        return Wrench(force, np.zeros(3))


# ---------------------------------------------------------------------------
# Pose scripts
# ---------------------------------------------------------------------------

_TIP_DROP = 0.105   # rest fingertip depth below the wrist origin
_TIP_REACH = 0.075  # rest fingertip forward offset

_ACTS_FOR_KIND = {
    "push": ("push",),
    "slide": ("slide",),
    "grasp": ("grasp",),
    "manipulate_object": ("push", "slide", "grasp"),
    "manipulate_scene": ("push", "slide"),
}


def _surface_top(surface: SceneSurface) -> float:
    shape = surface.shape
    if isinstance(shape, Plane):
        return shape.height
    if isinstance(shape, SpringPile):
        return shape.rest_height
    if isinstance(shape, Cylinder):
        return shape.axis_point[2] + shape.radius
    raise TypeError(f"no top height for {type(shape).__name__}")


class _ActivityScript:
    """Cycle of free / descend / act / ascend phases at the wrench rate.

    One engine drives all five primitives; the `acts` tuple decides what the
    mid phase does. Descents close the loop on the simulator's true contact
    force, the way a teleoperator watches the sensor. Phase transitions all
    happen through the free/ascend glide, so the pose path stays continuous
    and finite-difference velocities stay sane.
    """

    def __init__(self, kind: str, gen: np.random.Generator, params: SceneParams):
        self.gen = gen
        self.acts = _ACTS_FOR_KIND[kind]
        self.yaw_scale = 1.3 if kind == "manipulate_scene" else 1.0
        if "grasp" in self.acts:
            pile = SpringPile(rest_height=params.surface_top,
                              stiffness=params.contact_stiffness)
            self.base_surface = SceneSurface(pile, friction_mu=params.friction_mu,
                                             contact_stiffness=params.contact_stiffness)
        else:
            self.base_surface = _pick_surface(params, gen)
        self.top = _surface_top(self.base_surface)
        self.z_free = self.top + _TIP_DROP + 0.04
        self.x = float(gen.uniform(-0.02, 0.02))
        self.y = float(gen.uniform(-0.02, 0.02))
        self.z = self.z_free
        self.yaw = 0.0
        self.aperture = 0.9
        self.tether = None
        self.phase = "free"
        self.timer = float(gen.uniform(0.9, 1.5))
        self._glide = None
        self._next_cycle()

    # -- cycle setup --------------------------------------------------------

    def _next_cycle(self):
        gen = self.gen
        self.act = self.acts[int(gen.integers(0, len(self.acts)))]
        self.target = float(gen.uniform(1.0, 8.0)) if self.act != "grasp" \
            else float(gen.uniform(1.0, 3.5))
        self.speed = float(gen.uniform(0.02, 0.05))
        goal_x = float(gen.uniform(-0.02, 0.02))
        goal_y = float(gen.uniform(-0.02, 0.02))
        goal_yaw = float(gen.uniform(-0.12, 0.12)) * self.yaw_scale
        goal_ap = float(gen.uniform(0.55, 0.85)) if self.act != "grasp" else 0.9
        self._glide = (goal_x, goal_y, goal_yaw, goal_ap)
        self.slide_dir = (1.0 if gen.random() < 0.5 else -1.0)
        self.slide_angle = float(gen.normal(0.0, 0.10))
        self.slide_speed = float(gen.uniform(0.01, 0.04))
        self.wiggle = float(gen.uniform(0.0, 0.0025))
        self.act_time = float(gen.uniform(2.2, 4.5))
        self.lift_height = float(gen.uniform(0.10, 0.16))
        self.jx = self.jy = 0.0
        self.vjx = self.vjy = 0.0

    def _glide_toward(self, dt):
        gx, gy, gyaw, gap = self._glide
        blend = min(1.0, 2.5 * dt)
        self.x += blend * (gx - self.x)
        self.y += blend * (gy - self.y)
        self.yaw += blend * (gyaw - self.yaw)
        self.aperture += blend * (gap - self.aperture)

    def _lateral_jitter(self, dt):
        # Slow drift of the contact point. Jitter velocity must stay smooth:
        # fast direction flips would flip the friction force inside the 5 ms
        # image/wrench pairing window and poison the labels.
        tau, sd = 0.7, 0.004
        for attr_v, attr_p in (("vjx", "jx"), ("vjy", "jy")):
            v = getattr(self, attr_v)
            v += (-v / tau) * dt + sd * math.sqrt(2.0 * dt / tau) * self.gen.normal()
            setattr(self, attr_v, v)
            setattr(self, attr_p, getattr(self, attr_p) + v * dt)

    # -- per-step update ----------------------------------------------------

    def step(self, dt: float, contact_force: float):
        gen = self.gen
        ph = self.phase
        if ph == "free":
            self._glide_toward(dt)
            self.timer -= dt
            if self.timer <= 0.0:
                self.phase = "descend"
        elif ph == "descend":
            self.z -= self.speed * dt
            if contact_force >= self.target:
                self.z_hold = self.z
                self.hold_t = 0.0
                self.timer = self.act_time
                if self.act == "grasp":
                    self.phase = "close"
                    self.timer = 0.8
                else:
                    self.phase = "hold" if self.act == "push" else "slide"
            elif self.z < self.top - 0.06:
                self.phase = "ascend"   # missed the surface; give up this cycle
        elif ph == "hold":
            self.hold_t += dt
            self.timer -= dt
            self.z = self.z_hold + self.wiggle * math.sin(2.0 * math.pi * 0.4 * self.hold_t)
            self._lateral_jitter(dt)
            if self.timer <= 0.0:
                self.phase = "ascend"
        elif ph == "slide":
            self.hold_t += dt
            self.timer -= dt
            step = self.slide_dir * self.slide_speed * dt
            self.x += step * math.cos(self.slide_angle)
            self.y += step * math.sin(self.slide_angle)
            if abs(self.x) > 0.12:
                self.slide_dir = -self.slide_dir
                self.x = float(np.clip(self.x, -0.12, 0.12))
            if contact_force < 0.25 * self.target:
                self.z -= self.speed * dt       # regain the surface
            self.z = min(self.z, self.z_hold + 0.004)
            if self.timer <= 0.0:
                self.phase = "ascend"
        elif ph == "close":
            self.timer -= dt
            self.aperture = max(0.15, self.aperture - dt / 0.8 * (0.9 - 0.15))
            if self.timer <= 0.0:
                grip = np.array([
                    self.x - math.sin(self.yaw) * _TIP_REACH,
                    self.y + math.cos(self.yaw) * _TIP_REACH,
                    self.z - _TIP_DROP,
                ])
                anchor = (float(grip[0] + gen.uniform(-0.004, 0.004)),
                          float(grip[1] + gen.uniform(-0.004, 0.004)),
                          self.top - 0.02)
                dist = float(np.linalg.norm(grip - np.asarray(anchor)))
                self.tether = SceneSurface(
                    Tether(anchor=anchor, slack_length=dist + 0.003,
                           stiffness=float(gen.uniform(30.0, 70.0))),
                    friction_mu=0.0,
                    contact_stiffness=self.base_surface.contact_stiffness)
                self.z_lift_from = self.z
                self.phase = "lift"
        elif ph == "lift":
            self.z += 0.08 * dt
            if self.z >= self.z_lift_from + self.lift_height:
                self.timer = float(gen.uniform(0.8, 1.5))
                self.phase = "carry"
        elif ph == "carry":
            self.timer -= dt
            self._lateral_jitter(dt)
            if self.timer <= 0.0:
                self.phase = "lower"
        elif ph == "lower":
            self.z -= 0.08 * dt
            if self.z <= self.z_lift_from:
                self.tether = None
                self.phase = "ascend"
        elif ph == "ascend":
            self.z += 0.06 * dt
            self.aperture = min(0.9, self.aperture + dt)
            if self.z >= self.z_free:
                self.z = self.z_free
                self.jx = self.jy = 0.0
                self.vjx = self.vjy = 0.0
                self.timer = float(gen.uniform(0.8, 1.4))
                self.phase = "free"
                self._next_cycle()

        surfaces = [self.base_surface]
        if self.tether is not None:
            surfaces.append(self.tether)
        pose = Pose(np.array([self.x + self.jx, self.y + self.jy, self.z]), self.yaw)
        return pose, self.aperture, surfaces


# ---------------------------------------------------------------------------
# Rollout
# ---------------------------------------------------------------------------

class _ModelCache:
    """Gripper models per quantized aperture (rebuilding per step is wasteful)."""

    def __init__(self, kind: str):
        self.kind = kind
        self._cache = {}

    def at(self, aperture: float) -> GripperModel:
        key = round(aperture * 50.0)
        model = self._cache.get(key)
        if model is None:
            model = gripper_preset(self.kind, key / 50.0)
            self._cache[key] = model
        return model


def generate_primitive(kind: str, env, gripper, cam: CameraModel, rng: Rng,
                       duration: float, rate: float) -> SequenceRecording:
    """Roll out one scripted sequence and return it with in-memory images.

    `env` is an environment id or EnvironmentSpec; `gripper` a kind string or
    GripperModel (its kind is used; the script drives the aperture). Wrenches
    are simulated at WRENCH_RATE_FACTOR x the image rate, and the stored
    frame wrench is the tared, noise-and-drift-corrupted sensor reading.
    """
    if kind not in PRIMITIVES:
        raise ValueError(f"unknown primitive {kind!r}")
    if duration * rate < 2:
        raise ValueError("need at least two frames: duration * rate >= 2")
    envspec = env if isinstance(env, EnvironmentSpec) else environment_preset(str(env))
    gripper_kind = gripper.kind if isinstance(gripper, GripperModel) else str(gripper)
    models = _ModelCache(gripper_kind)
    params = scene_params(envspec.id, gripper_kind)

    dt = 1.0 / (rate * WRENCH_RATE_FACTOR)
    n_w = int(round(duration * rate)) * WRENCH_RATE_FACTOR
    n_img = int(round(duration * rate))
    script_gen = rng.split("script").gen
    tilt = _TiltGravity(rng.split("tilt").gen, dt,
                        scale=1.3 if kind == "manipulate_scene" else 1.0)
    script = _ActivityScript(kind, script_gen, params)

    # Image timestamps carry a random sub-sample phase; pairing them to the
    # wrench clock is genuine nearest-neighbor work, as on the real rig.
    phase = float(rng.split("phase").uniform(0.0, dt))
    image_times = phase + np.arange(n_img) / rate
    wrench_times = np.arange(n_w) * dt
    pairs = synchronize(image_times, wrench_times, image_period=1.0 / rate)
    needed = {j for _, j in pairs}

    true_w = np.empty((n_w, 6))
    configs = {}
    poses = [None] * n_w
    prev_pos = None
    prev_contact = None
    force_mag = 0.0
    for k in range(n_w):
        ext = tilt.step()
        pose, aperture, surfaces = script.step(dt, force_mag)
        model = models.at(aperture)
        vel = (np.zeros(3) if prev_pos is None
               else (pose.position - prev_pos) / dt)
        res = solve_equilibrium(model, pose, surfaces, vel, external=ext,
                                warm_start=prev_contact,
                                need_config=(k in needed))
        total = res.wrench.as_array()
        contact6 = total - ext.as_array()
        prev_contact = Wrench.from_array(contact6)
        force_mag = float(np.linalg.norm(contact6[:3]))
        true_w[k] = total
        poses[k] = pose
        if k in needed:
            configs[k] = res.config
        prev_pos = pose.position

    measured = apply_sensor_model(true_w, rng.split("sensor"))

    # The eye-in-hand camera rides a moving wrist: every frame sees a fresh
    # patch of the environment, so the background is redrawn per frame.
    scene_rng = rng.split("scene")
    effort_rng = rng.split("efforts")
    frames = []
    for i, j in pairs:
        bg = render_background(cam, envspec, scene_rng)
        img = render(configs[j], cam, envspec, scene_rng, background=bg)
        frames.append(Frame(
            timestamp=float(image_times[i]),
            image_path=None,
            wrench=Wrench.from_array(measured[j]),
            effort=simulate_efforts(Wrench.from_array(true_w[j]), effort_rng,
                                    quantum=EFFORT_QUANTUM),
            pose=poses[j],
            env_id=envspec.id,
            image=img,
        ))
    seq = SequenceRecording(primitive=kind, env_id=envspec.id,
                            gripper_kind=gripper_kind, frames=frames,
                            seed=rng.seed, image_rate_hz=rate)
    return tare(seq)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return _FLOAT_FMT % x


def save_sequence(root, seq_id: str, seq: SequenceRecording) -> SequenceEntry:
    """Write frames.csv plus one PNG per frame under <root>/seqs/<seq_id>/."""
    root = Path(root)
    seq_dir = root / "seqs" / seq_id
    img_dir = seq_dir / "img"
    img_dir.mkdir(parents=True, exist_ok=True)
    lines = [CSV_COLUMNS]
    for i, f in enumerate(seq.frames):
        rel = f"seqs/{seq_id}/img/f{i:05d}.png"
        if f.image is not None:
            save_png(root / rel, f.image)
        elif f.image_path is None:
            raise ValueError("frame has neither pixels nor an image path")
        f.image_path = rel
        vals = ([f.timestamp] + list(f.wrench.as_array()) + list(f.effort)
                + list(f.pose.position) + [f.pose.yaw])
        lines.append(",".join(_fmt(v) for v in vals) + "," + rel)
    (seq_dir / "frames.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return SequenceEntry(seq_id=seq_id, primitive=seq.primitive, env_id=seq.env_id,
                         n_frames=len(seq.frames), seed=seq.seed)


def load_sequence(root, entry: SequenceEntry, manifest: Manifest | None = None,
                  load_images: bool = False) -> SequenceRecording:
    root = Path(root)
    text = (root / "seqs" / entry.seq_id / "frames.csv").read_text(encoding="utf-8")
    lines = text.strip().split("\n")
    if lines[0] != CSV_COLUMNS:
        raise ValueError(f"unexpected frame columns in {entry.seq_id}: {lines[0]!r}")
    frames = []
    for line in lines[1:]:
        parts = line.split(",")
        vals = [float(v) for v in parts[:17]]
        rel = parts[17]
        img = None
        if load_images:
            from .render import load_png
            img = load_png(root / rel)
        frames.append(Frame(
            timestamp=vals[0],
            image_path=rel,
            wrench=Wrench.from_array(vals[1:7]),
            effort=np.array(vals[7:13]),
            pose=Pose(np.array(vals[13:16]), vals[16]),
            env_id=entry.env_id,
            image=img,
        ))
    rate = manifest.image_rate_hz if manifest is not None else 0.0
    return SequenceRecording(primitive=entry.primitive, env_id=entry.env_id,
                             gripper_kind=(manifest.gripper_kind if manifest else ""),
                             frames=frames, seed=entry.seed,
                             image_rate_hz=rate, seq_id=entry.seq_id)


def save_manifest(manifest: Manifest) -> Path:
    root = Path(manifest.root)
    root.mkdir(parents=True, exist_ok=True)
    lines = [
        "# softwrench dataset manifest",
        f"version={manifest.version}",
        f"gripper={manifest.gripper_kind}",
        f"image_rate_hz={_fmt(manifest.image_rate_hz)}",
        f"wrench_rate_hz={_fmt(manifest.wrench_rate_hz)}",
        "# seq_id,primitive,env_id,n_frames,seed",
    ]
    for e in manifest.entries:
        lines.append(f"{e.seq_id},{e.primitive},{e.env_id},{e.n_frames},{e.seed}")
    path = root / "manifest.txt"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_manifest(root, validate: bool = True) -> Manifest:
    root = Path(root)
    header = {}
    entries = []
    for line in (root / "manifest.txt").read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line and "," not in line:
            key, val = line.split("=", 1)
            header[key.strip()] = val.strip()
        else:
            seq_id, primitive, env_id, n_frames, seed = line.split(",")
            entries.append(SequenceEntry(seq_id, primitive, env_id,
                                         int(n_frames), int(seed)))
    manifest = Manifest(
        root=str(root),
        version=int(header.get("version", "1")),
        gripper_kind=header.get("gripper", "tendon_actuated"),
        image_rate_hz=float(header.get("image_rate_hz", "10")),
        wrench_rate_hz=float(header.get("wrench_rate_hz", "100")),
        entries=entries,
    )
    if validate:
        for e in entries:
            csv_path = root / "seqs" / e.seq_id / "frames.csv"
            if not csv_path.exists():
                raise FileNotFoundError(f"missing {csv_path}")
            n = len(csv_path.read_text(encoding="utf-8").strip().split("\n")) - 1
            if n != e.n_frames:
                raise ValueError(
                    f"{e.seq_id}: manifest says {e.n_frames} frames, file has {n}")
    return manifest


# ---------------------------------------------------------------------------
# Dataset orchestration
# ---------------------------------------------------------------------------

def _worker_generate(args) -> SequenceEntry:
    (root, seq_id, kind, env_id, gripper_kind, cam, seed, duration, rate) = args
    seq = generate_primitive(kind, env_id, gripper_kind, cam, Rng(seed),
                             duration, rate)
    return save_sequence(root, seq_id, seq)


def generate_dataset(root, seed: int = 0,
                     envs=DEFAULT_ENVS,
                     primitives=PRIMITIVES,
                     gripper_kind: str = "tendon_actuated",
                     seconds_per_combo: float = 150.0,
                     sequences_per_combo: int = 3,
                     image_rate: float = 10.0,
                     cam: CameraModel | None = None,
                     jobs: int = 1,
                     progress=None) -> Manifest:
    """Generate and persist the full dataset; returns the saved manifest.

    Work is split per sequence; sequence seeds derive only from the global
    seed and the (env, primitive, repeat) index, so results are byte-identical
    no matter how many workers run.
    """
    cam = cam or CameraModel()
    duration = seconds_per_combo / sequences_per_combo
    master = Rng(seed).split("gen-data")
    tasks = []
    idx = 0
    for env_id in envs:
        for kind in primitives:
            for rep in range(sequences_per_combo):
                seq_seed = int(master.split_index(idx).integers(0, 2 ** 63))
                tasks.append((str(root), f"seq_{idx:04d}", kind, env_id,
                              gripper_kind, cam, seq_seed, duration, image_rate))
                idx += 1
    Path(root).mkdir(parents=True, exist_ok=True)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(_worker_generate, tasks))
    else:
        entries = []
        for t in tasks:
            entries.append(_worker_generate(t))
            if progress:
                progress(f"  {t[1]} {t[2]}/{t[3]}: {entries[-1].n_frames} frames")
    manifest = Manifest(root=str(root), version=1, gripper_kind=gripper_kind,
                        image_rate_hz=image_rate,
                        wrench_rate_hz=image_rate * WRENCH_RATE_FACTOR,
                        entries=entries)
    save_manifest(manifest)
    return manifest
