import numpy as np
import pytest

from softwrench.core import Rng, Wrench
from softwrench.gripper import deform, gripper_preset, mirror_x_configuration
from softwrench.render import (CameraModel, environment_preset, load_png,
                               render, render_background, save_png,
                               uniform_environment)

CAM = CameraModel()
GRIPPER = gripper_preset("tendon_actuated")


def test_render_deterministic():
    cfg = deform(GRIPPER, Wrench([1.0, -0.5, 2.0], [0.05, 0.0, -0.02]))
    env = environment_preset("lab")
    a = render(cfg, CAM, env, Rng(5))
    b = render(cfg, CAM, env, Rng(5))
    assert np.array_equal(a, b)
    assert a.shape == (64, 64, 3)
    assert a.min() >= 0.0 and a.max() <= 1.0


def test_x_deflection_changes_band_around_fingertips():
    env = uniform_environment()
    rest = deform(GRIPPER, Wrench.zero())
    # 5 mm of pure lateral fingertip motion.
    pushed = deform(GRIPPER, Wrench([0.005 / 0.004, 0, 0], [0, 0, 0]))
    diff = np.abs(render(pushed, CAM, env, Rng(1))
                  - render(rest, CAM, env, Rng(1))).sum(axis=2)
    assert diff.mean() > 0.0
    row_mass = diff.sum(axis=1)
    tip_px = CAM.project(GRIPPER.rest_tips[:, :2])
    tip_row = int(round(tip_px[0, 1] + 32))
    band = np.zeros(64, dtype=bool)
    band[max(0, tip_row - 14):tip_row + 15] = True
    assert row_mass[band].sum() >= 0.8 * row_mass.sum()


def test_distinct_environments_differ():
    cfg = deform(GRIPPER, Wrench.zero())
    a = render_background(CAM, environment_preset("office1"), Rng(1))
    b = render_background(CAM, environment_preset("office2"), Rng(1))
    assert np.abs(a - b).mean() > 0.01


def test_mirror_consistency_pixel_exact():
    env = uniform_environment()
    w = Wrench([2.0, 1.0, -3.0], [0.1, -0.05, 0.2])
    cfg = deform(GRIPPER, w)
    img = render(cfg, CAM, env, Rng(2))
    img_m = render(mirror_x_configuration(cfg), CAM, env, Rng(2))
    assert np.array_equal(img_m, img[:, ::-1, :])


def test_observability_x_exceeds_z():
    # Same force magnitude: lateral force moves pixels much more than depth.
    env = uniform_environment()
    rest = render(deform(GRIPPER, Wrench.zero()), CAM, env, Rng(3))
    fx = render(deform(GRIPPER, Wrench([3.0, 0, 0], [0, 0, 0])), CAM, env, Rng(3))
    fz = render(deform(GRIPPER, Wrench([0, 0, 3.0], [0, 0, 0])), CAM, env, Rng(3))
    dx = np.abs(fx - rest).mean()
    dz = np.abs(fz - rest).mean()
    assert dz > 0.0
    assert dx > dz


def test_depth_shrinks_disc():
    env = uniform_environment(value=0.0)
    # Red disc pixel count as a proxy for its area.
    def red_area(w):
        img = render(deform(GRIPPER, w), CAM, env, Rng(4))
        return int(((img[:, :, 0] > 0.4) & (img[:, :, 1] < 0.35)).sum())
    assert red_area(Wrench([0, 0, 5.0], [0, 0, 0])) < red_area(Wrench.zero())
    assert red_area(Wrench([0, 0, -3.0], [0, 0, 0])) > red_area(Wrench.zero())


def test_crop_window_validation():
    with pytest.raises(ValueError):
        CameraModel(crop_window=(0, 0, 200, 200))


def test_lighting_gain_range():
    with pytest.raises(ValueError):
        uniform_environment().__class__(id="x", palette=((0, 0, 0),) * 3,
                                        lighting_gain=2.0)


def test_png_round_trip(tmp_path):
    img = Rng(9).gen.random((64, 64, 3))
    path = tmp_path / "f.png"
    save_png(path, img)
    back = load_png(path)
    # Quantization to 8 bits happens exactly once, at persistence.
    assert np.abs(back - img).max() <= 0.5 / 255.0 + 1e-12
    save_png(tmp_path / "g.png", back)
    assert (tmp_path / "f.png").read_bytes() == (tmp_path / "g.png").read_bytes()
