"""Generate a small synthetic dataset and inspect what lands on disk: the
manifest, per-sequence CSVs with tared sensor wrenches and actuator
efforts, and the per-frame PNGs.

Run:  python demos/02_generate_dataset.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from softwrench.dataset import (generate_dataset, load_sequence,
                                split_by_environment)

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/02/data")

manifest = generate_dataset(
    out, seed=0,
    envs=("lab", "office1", "home"),
    primitives=("push", "slide", "grasp"),
    seconds_per_combo=10.0,
    sequences_per_combo=1,
    jobs=2,
)
print(f"dataset: {manifest.total_frames()} frames in "
      f"{len(manifest.entries)} sequences under {out}")

# The manifest is plain text; the split drops one whole environment.
train, test = split_by_environment(manifest, "home")
print(f"train envs: {train.env_ids()}   test envs: {test.env_ids()}")

# Look at one sequence: taring pins the first frame to exactly zero, and the
# effort vector is an affine (rank-5) image of the true wrench.
seq = load_sequence(out, train.entries[0], manifest)
w = np.stack([f.wrench.as_array() for f in seq.frames])
print(f"\n{train.entries[0].seq_id} ({seq.primitive}):")
print("  first-frame wrench:", w[0])
print("  |F| over time     :", np.round(np.linalg.norm(w[:, :3], axis=1), 2)[::10])
print("  effort[0]         :", np.round(seq.frames[0].effort, 2))
print("  image files       :", seq.frames[0].image_path, "...")
