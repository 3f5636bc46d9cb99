"""Walk through the physical core: deform a soft gripper, press it into a
surface, solve the coupled equilibrium, and render what the wrist camera
sees.

Run:  python demos/01_simulate_and_render.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from softwrench.core import Pose, Rng, Wrench
from softwrench.gripper import (Plane, SceneSurface, contact_wrench, deform,
                                gripper_preset, solve_equilibrium)
from softwrench.render import (CameraModel, environment_preset, render,
                               save_png, uniform_environment)

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/01")
out.mkdir(parents=True, exist_ok=True)

# A gripper is a two-finger skeleton plus a 6x6 compliance. The pneumatic
# preset is 2.5x softer than the tendon-actuated one.
tendon = gripper_preset("tendon_actuated", aperture=0.8)
pneumatic = gripper_preset("pneumatic", aperture=0.8)
print("compliance diagonals (m/N, rad/Nm):")
print("  tendon   ", np.diag(tendon.compliance))
print("  pneumatic", np.diag(pneumatic.compliance))

# Pure kinematics: a lateral force deflects the fingertips linearly.
w = Wrench([2.0, 0.0, 0.0], [0.0, 0.0, 0.0])
cfg = deform(tendon, w)
print(f"\n2 N lateral force -> fingertip deflection "
      f"{cfg.tip_deflections[0]} m")

# Press into a plane: the fixed point couples deformation and penalty contact.
surface = SceneSurface(Plane(-0.11), friction_mu=0.2, contact_stiffness=220.0)
pose = Pose(np.array([0.0, 0.0, -0.03]))
res = solve_equilibrium(tendon, pose, surface, np.zeros(3))
print(f"\npressed into a plane: converged={res.converged} "
      f"after {res.iterations} iterations")
print(f"  reaction wrench: F={np.round(res.wrench.force, 3)} N, "
      f"T={np.round(res.wrench.torque, 4)} N*m")
check = contact_wrench(tendon, pose, surface, np.zeros(3), config=res.config)
print(f"  self-consistency residual: "
      f"{np.abs(check.as_array() - res.wrench.as_array()).max():.2e}")

# Render frames: same pose, increasing load. Watch the fingertip discs
# shrink as the reaction force grows (the depth cue).
cam = CameraModel()
env = environment_preset("lab")
for i, fz in enumerate([0.0, 2.0, 5.0, 8.0]):
    cfg = deform(tendon, Wrench([0.0, 0.0, fz], [0.0, 0.0, 0.0]))
    img = render(cfg, cam, env, Rng(7))
    save_png(out / f"load_fz{fz:.0f}N.png", img)
print(f"\nwrote load sweep renders to {out}")

# The fact the flip augmentation relies on: mirroring the physical state
# mirrors the image pixel-for-pixel (over a symmetric background).
from softwrench.gripper import mirror_x_configuration

env_u = uniform_environment()
cfg = deform(tendon, Wrench([1.5, -0.5, 3.0], [0.1, 0.05, -0.08]))
img = render(cfg, cam, env_u, Rng(1))
img_m = render(mirror_x_configuration(cfg), cam, env_u, Rng(1))
print("mirror render == horizontal flip:",
      np.array_equal(img_m, img[:, ::-1, :]))
