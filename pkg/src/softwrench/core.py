"""Shared math and data primitives: wrenches, poses, images, seeded randomness.

Coordinate convention (wrist frame, fixed across the whole package):
  +X : lateral, image-horizontal
  +Y : forward along the fingers, image-vertical
  +Z : camera optical axis (depth); a fingertip pressed down into a surface
       receives a reaction force with positive Z

Units are SI throughout: newtons, newton-meters, meters, seconds, radians.
A wrench is always expressed at the wrist origin in the wrist frame.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np


def _vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected 3-vector, got shape {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class Wrench:
    """6-axis load: 3 force components (N) and 3 torque components (N·m)."""

    force: np.ndarray
    torque: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "force", _vec3(self.force))
        object.__setattr__(self, "torque", _vec3(self.torque))
        if not (np.isfinite(self.force).all() and np.isfinite(self.torque).all()):
            raise ValueError("wrench components must be finite")

    @staticmethod
    def zero() -> "Wrench":
        return Wrench(np.zeros(3), np.zeros(3))

    @staticmethod
    def from_array(a) -> "Wrench":
        a = np.asarray(a, dtype=float).reshape(6)
        return Wrench(a[:3], a[3:])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])

    def __repr__(self):
        f, t = self.force, self.torque
        return (f"Wrench(F=({f[0]:.4g},{f[1]:.4g},{f[2]:.4g}), "
                f"T=({t[0]:.4g},{t[1]:.4g},{t[2]:.4g}))")


def wrench_add(a: Wrench, b: Wrench) -> Wrench:
    return Wrench(a.force + b.force, a.torque + b.torque)


def wrench_sub(a: Wrench, b: Wrench) -> Wrench:
    return Wrench(a.force - b.force, a.torque - b.torque)


def wrench_scale(w: Wrench, s: float) -> Wrench:
    return Wrench(w.force * s, w.torque * s)


def wrench_allclose(a: Wrench, b: Wrench, atol: float = 1e-12) -> bool:
    return bool(np.allclose(a.as_array(), b.as_array(), atol=atol, rtol=0.0))


def wrap_angle(theta: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    return float((theta + np.pi) % (2.0 * np.pi) - np.pi)


@dataclass(frozen=True, eq=False)
class Pose:
    """Planar robot pose: 3D position plus yaw about +Z.

    Yaw-only orientation is all the tasks and data scripts need; roll/pitch
    excursions of the wrist are modeled as a hidden gravity disturbance in
    the dataset scripts, not as part of the pose.
    """

    position: np.ndarray
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position))
        if not np.isfinite(self.position).all() or not np.isfinite(self.yaw):
            raise ValueError("pose must be finite")
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    def rotation(self) -> np.ndarray:
        """3x3 rotation matrix mapping wrist-frame vectors to world."""
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def to_world(self, local_points: np.ndarray) -> np.ndarray:
        """Transform (..., 3) wrist-frame points into world coordinates."""
        return local_points @ self.rotation().T + self.position


def vector_projection(d, f) -> np.ndarray:
    """Project d onto the axis spanned by f: (d·f / ||f||^2) f."""
    d = _vec3(d)
    f = _vec3(f)
    ff = float(f @ f)
    if ff == 0.0:
        raise ValueError("degenerate projection axis")
    return (float(d @ f) / ff) * f


def validate_image(img: np.ndarray, resolution: int | None = None) -> np.ndarray:
    """Check the package image convention: (H, W, 3) floats in [0, 1]."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {img.shape}")
    if resolution is not None and img.shape[:2] != (resolution, resolution):
        raise ValueError(
            f"expected {resolution}x{resolution} image, got {img.shape[0]}x{img.shape[1]}")
    if img.dtype.kind != "f":
        raise ValueError("image pixels must be floats in [0, 1]")
    if float(img.min()) < 0.0 or float(img.max()) > 1.0:
        raise ValueError("image pixels out of [0, 1]")
    return img


def _stable_hash64(name: str) -> int:
    # sha256 keeps sub-stream derivation independent of PYTHONHASHSEED.
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass(eq=False)
class Rng:
    """Deterministic, splittable random stream.

    Identical (seed, path) pairs always yield identical streams; children
    created via split() are independent of how much the parent has drawn.
    """

    seed: int
    path: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        self.seed = int(self.seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed, *self.path])))

    @property
    def gen(self) -> np.random.Generator:
        return self._gen

    def split(self, name: str) -> "Rng":
        """Child stream identified by a stable name."""
        return Rng(self.seed, self.path + (_stable_hash64(name),))

    def split_index(self, index: int) -> "Rng":
        """Child stream identified by an integer (sequence ids, trials)."""
        return Rng(self.seed, self.path + (int(index),))

    # Passthroughs for the common draws.
    def uniform(self, lo=0.0, hi=1.0, size=None):
        return self._gen.uniform(lo, hi, size=size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size=size)

    def integers(self, lo, hi=None, size=None):
        return self._gen.integers(lo, hi, size=size)
