"""Eye-in-hand camera model: RGB images of the deformed gripper.

The camera is a pinhole over the crop region (no fisheye model): world X maps
to image-horizontal, world Y to image-vertical (up), and Z deflection is only
visible through the fingertip disc radius. Scene surfaces are not drawn; the
procedural background stands in for scene appearance.

Rasterization runs at `supersample`x resolution with a half-pixel soft edge
and is block-averaged down, so sub-pixel fingertip motion produces smooth
pixel gradients. All pixel-center coordinates are kept symmetric about the
optical axis, which makes renders of X-mirrored configurations bit-exact
horizontal flips of each other (over a symmetric background) -- the fact the
flip augmentation depends on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage

from .core import Rng, _stable_hash64
from .gripper import GripperConfiguration

STROKE_COLOR = np.array([0.82, 0.82, 0.86])
DISC_COLOR = np.array([0.86, 0.30, 0.24])
# Dark rims guarantee a luminance edge around the gripper on any background
# tint, so shape cues survive palettes never seen in training.
RIM_COLOR = np.array([0.07, 0.06, 0.09])
_RIM_WIDTH = 1.5
# Stroke half-widths per segment (palm to tip) and fingertip disc radius,
# in cropped-image pixels.
_SEGMENT_WIDTH = (6.5, 5.0, 4.0)
_DISC_RADIUS = 9.0


@dataclass(frozen=True)
class CameraModel:
    """Crop-region pinhole camera.

    resolution: output image side after crop (images are square).
    scale: pixels per meter in the X-Y plane.
    principal: raw-pixel coordinates where the wrist origin projects.
    depth_gain: fractional fingertip-disc shrink per meter of +Z deflection.
    crop_window: (x0, y0, x1, y1) rectangle in raw image coordinates.
    """

    resolution: int = 64
    scale: float = 800.0
    raw_size: int = 96
    principal: tuple = (48.0, 96.0)
    depth_gain: float = 13.5
    crop_window: tuple = (16, 16, 80, 80)
    supersample: int = 2

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        x0, y0, x1, y1 = self.crop_window
        if not (0 <= x0 < x1 <= self.raw_size and 0 <= y0 < y1 <= self.raw_size):
            raise ValueError("crop_window must lie within the raw image bounds")

    def sample_grids(self):
        """Supersampled pixel-center coordinates, centered on the principal point."""
        x0, y0, x1, y1 = self.crop_window
        n = self.resolution * self.supersample
        step_u = (x1 - x0) / n
        step_v = (y1 - y0) / n
        u = (np.arange(n) + 0.5) * step_u + (x0 - self.principal[0])
        v = (np.arange(n) + 0.5) * step_v + (y0 - self.principal[1])
        return np.meshgrid(u, v)  # (vgrid rows, ugrid cols)

    def project(self, points_xy: np.ndarray) -> np.ndarray:
        """World (x, y) -> centered crop pixel coordinates (u, v)."""
        pts = np.asarray(points_xy, dtype=float)
        out = np.empty_like(pts)
        out[..., 0] = self.scale * pts[..., 0]
        out[..., 1] = -self.scale * pts[..., 1]
        return out


@dataclass(frozen=True)
class EnvironmentSpec:
    """Procedural background recipe for one recording environment."""

    id: str
    palette: tuple                # 3 RGB colors in [0, 1]
    noise_octaves: int = 4
    seed: int = 0
    clutter_count: int = 6
    clutter_size: tuple = (0.08, 0.22)   # fraction of image side
    lighting_gain: float = 1.0
    palette_jitter: float = 0.18         # per-draw spread around the palette

    def __post_init__(self):
        if not (0.6 <= self.lighting_gain <= 1.4):
            raise ValueError("lighting_gain must be in [0.6, 1.4]")


def environment_preset(env_id: str) -> EnvironmentSpec:
    """Derive a stable environment from its id (distinct ids, distinct seeds)."""
    seed = _stable_hash64("env:" + env_id)
    gen = Rng(seed).gen
    base = gen.uniform(0.30, 0.54, size=3)
    palette = tuple(
        tuple(np.clip(base + gen.uniform(-0.12, 0.12, size=3), 0.0, 1.0))
        for _ in range(3))
    return EnvironmentSpec(
        id=env_id,
        palette=palette,
        noise_octaves=3,
        seed=seed,
        clutter_count=int(gen.integers(2, 6)),
        clutter_size=(0.08, 0.22),
        lighting_gain=float(gen.uniform(0.8, 1.2)),
        palette_jitter=0.16,
    )


def uniform_environment(env_id: str = "uniform", value: float = 0.45) -> EnvironmentSpec:
    """Constant-color, clutter-free background (mirror-symmetry tests)."""
    c = (value, value, value)
    return EnvironmentSpec(id=env_id, palette=(c, c, c), noise_octaves=1,
                           seed=_stable_hash64("env:" + env_id),
                           clutter_count=0, lighting_gain=1.0,
                           palette_jitter=0.0)


def _value_noise(gen: np.random.Generator, size: int, octaves: int) -> np.ndarray:
    """Multi-octave bilinear value noise in [0, 1]."""
    acc = np.zeros((size, size))
    amp, total, res = 1.0, 0.0, 4
    for _ in range(octaves):
        lattice = gen.random((res + 1, res + 1))
        coords = np.linspace(0.0, res, size)
        i0 = np.minimum(coords.astype(int), res - 1)
        frac = coords - i0
        rows = (lattice[i0, :] * (1 - frac)[:, None] + lattice[i0 + 1, :] * frac[:, None])
        up = rows[:, i0] * (1 - frac)[None, :] + rows[:, i0 + 1] * frac[None, :]
        acc += amp * up
        total += amp
        amp *= 0.55
        res = min(res * 2, size)
    return acc / total


def render_background(cam: CameraModel, env: EnvironmentSpec, rng: Rng) -> np.ndarray:
    """Supersampled background: palette-mapped value noise plus clutter.

    The palette family is the environment's identity; the noise realization
    and clutter are drawn from `rng`, so each recording sees a fresh patch of
    the same room (a fixed rng seed pins the whole scene dressing, and one
    draw per sequence keeps it static across that sequence's frames).
    """
    n = cam.resolution * cam.supersample
    gen = rng.gen
    tex_gen = Rng(env.seed).split_index(int(gen.integers(0, 2 ** 62))).gen
    noise = _value_noise(tex_gen, n, env.noise_octaves)
    # The environment fixes the palette family and nominal lighting; each
    # draw shifts both, the way different corners of one room share a tint
    # but not exact colors. palette_jitter 0 pins everything (uniform test
    # environments must stay bit-reproducible constants).
    varies = 1.0 if env.palette_jitter > 0 else 0.0
    gain = float(np.clip(env.lighting_gain + varies * gen.uniform(-0.1, 0.1),
                         0.6, 1.4))
    jitter = gen.uniform(-env.palette_jitter, env.palette_jitter, size=(3, 3))
    p0, p1, p2 = (np.clip(np.asarray(c, dtype=float) + jitter[k], 0.0, 1.0)
                  for k, c in enumerate(env.palette))
    t = np.clip(noise, 0.0, 1.0)[..., None]
    low = p0 + (p1 - p0) * np.clip(t * 2.0, 0.0, 1.0)
    img = low + (p2 - low) * np.clip(t * 2.0 - 1.0, 0.0, 1.0)

    for _ in range(env.clutter_count):
        cx, cy = gen.uniform(0.0, n, size=2)
        half_w = 0.5 * n * gen.uniform(*env.clutter_size)
        half_h = 0.5 * n * gen.uniform(*env.clutter_size)
        color = np.clip(np.asarray(env.palette[int(gen.integers(0, 3))])
                        * gen.uniform(0.6, 1.4), 0.0, 1.0)
        xs = slice(max(0, int(cx - half_w)), min(n, int(cx + half_w)))
        ys = slice(max(0, int(cy - half_h)), min(n, int(cy + half_h)))
        img[ys, xs] = color
    return np.clip(img * gain, 0.0, 1.0)


def _segment_alpha(ug, vg, a, b, half_width):
    """Anti-aliased coverage of a thick segment at the supersample grid."""
    abx, aby = b[0] - a[0], b[1] - a[1]
    apx, apy = ug - a[0], vg - a[1]
    denom = abx * abx + aby * aby
    if denom > 0.0:
        t = np.clip((apx * abx + apy * aby) / denom, 0.0, 1.0)
    else:
        t = 0.0
    dx = apx - t * abx
    dy = apy - t * aby
    d = np.sqrt(dx * dx + dy * dy)
    return np.clip((half_width - d) * 2.0 + 0.5, 0.0, 1.0)


def _disc_alpha(ug, vg, center, radius):
    dx = ug - center[0]
    dy = vg - center[1]
    d = np.sqrt(dx * dx + dy * dy)
    return np.clip((radius - d) * 2.0 + 0.5, 0.0, 1.0)


def render(config: GripperConfiguration, cam: CameraModel, env: EnvironmentSpec,
           rng: Rng, background: np.ndarray | None = None) -> np.ndarray:
    """Render one frame; pass a cached `render_background` result to reuse it."""
    img = (render_background(cam, env, rng) if background is None
           else background).copy()
    ug, vg = cam.sample_grids()

    # Each paint layer combines its primitives with max-coverage, which keeps
    # compositing independent of finger enumeration order -- the mirror-flip
    # identity relies on that. Paint order: stroke rims, strokes, disc rims,
    # discs.
    nodes_px = cam.project(config.nodes[..., :2])
    stroke_alpha = np.zeros_like(ug)
    stroke_rim = np.zeros_like(ug)
    for finger in nodes_px:
        for k in range(3):
            hw = 0.5 * _SEGMENT_WIDTH[k]
            stroke_rim = np.maximum(
                stroke_rim,
                _segment_alpha(ug, vg, finger[k], finger[k + 1], hw + _RIM_WIDTH))
            stroke_alpha = np.maximum(
                stroke_alpha,
                _segment_alpha(ug, vg, finger[k], finger[k + 1], hw))
    img = img * (1.0 - stroke_rim[..., None]) + RIM_COLOR * stroke_rim[..., None]
    img = img * (1.0 - stroke_alpha[..., None]) + STROKE_COLOR * stroke_alpha[..., None]

    tips_px = cam.project(config.tips[:, :2])
    dz = config.tip_deflections[:, 2]
    disc_alpha = np.zeros_like(ug)
    disc_rim = np.zeros_like(ug)
    for i in range(2):
        radius = np.clip(_DISC_RADIUS * (1.0 - cam.depth_gain * dz[i]), 2.5, 13.0)
        disc_rim = np.maximum(disc_rim,
                              _disc_alpha(ug, vg, tips_px[i], radius + _RIM_WIDTH))
        disc_alpha = np.maximum(disc_alpha, _disc_alpha(ug, vg, tips_px[i], radius))
    img = img * (1.0 - disc_rim[..., None]) + RIM_COLOR * disc_rim[..., None]
    img = img * (1.0 - disc_alpha[..., None]) + DISC_COLOR * disc_alpha[..., None]

    # Column pairs are summed first so the reduction commutes with horizontal
    # flips bit-exactly; a plain mean over both block axes does not.
    ss = cam.supersample
    out = img
    while out.shape[1] > cam.resolution:
        out = out[:, 0::2] + out[:, 1::2]
    while out.shape[0] > cam.resolution:
        out = out[0::2] + out[1::2]
    return out / float(ss * ss)


def save_png(path, img: np.ndarray) -> None:
    """Persist an image; pixels are quantized to 8 bits only here."""
    q = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    PILImage.fromarray(q, mode="RGB").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return arr.astype(float) / 255.0


def load_png_u8(path) -> np.ndarray:
    with PILImage.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)
