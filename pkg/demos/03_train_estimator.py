"""Train the image-to-wrench regressor on a quick dataset, then verify the
pieces the trainer depends on: the torque-weighted loss, the flip/photometric
augmentations, and the analytic gradients.

A quick run cannot reach the accuracy of the full pipeline (30k frames,
20k iterations); this is a guided tour, not the benchmark.

Run:  python demos/03_train_estimator.py [work_dir]
"""

import sys
from pathlib import Path

import numpy as np

from softwrench.core import Rng
from softwrench.dataset import generate_dataset, split_by_environment
from softwrench.estimator import (RegressionModel, TrainConfig, TrainingSet,
                                  augment_photometric, flip_frame,
                                  gradient_check, loss, predict, save_model,
                                  torque_weight, train)

work = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/03")
data = work / "data"

manifest = generate_dataset(data, seed=3, envs=("lab", "office1", "home"),
                            primitives=("push", "slide", "grasp"),
                            seconds_per_combo=12.0, sequences_per_combo=1,
                            jobs=2)
train_m, _ = split_by_environment(manifest, "home")
train_set = TrainingSet.from_manifest(train_m)
print(f"training frames: {len(train_set)}")

# The torque weight balances newtons against newton-meters in the loss.
c = torque_weight(train_set.targets)
print(f"torque weight c = sigma_F / sigma_T = {c:.2f}")
print("loss example: force err (1,0,0), torque err (0,0,0.5), c=2 ->",
      loss([1, 0, 0, 0, 0, 0.5], np.zeros(6), c=2.0))

# Augmentations: flipping mirrors the image and reflects the wrench (force
# is a vector, torque a pseudovector); photometric jitter stays in [0,1].
img = train_set.image_batch([0])[0]
w = train_set.targets[0]
fimg, fw = flip_frame(img, w)
print("flip wrench map:", np.round(w, 2), "->", np.round(fw, 2))
print("photometric output range:",
      float(augment_photometric(img, Rng(1)).min()),
      float(augment_photometric(img, Rng(1)).max()))

# Check the analytic gradients before spending time on training.
model = RegressionModel.create(seed=0)
err = gradient_check(model, img, w, c=c, rng=Rng(5))
print(f"gradient check, max relative error: {err:.2e}")

cfg = TrainConfig(iterations=2500, seed=0)
result = train(model, train_set, cfg)
print(f"trained {cfg.iterations} iterations: batch loss "
      f"{result.curve[0][1]:.2f} -> {result.curve[-1][1]:.2f}")
save_model(work / "estimator.ckpt", result)

sample = predict(model, train_set.image_batch([10])[0])
print("prediction on a training frame:", np.round(sample.as_array(), 2))
print("target:                        ", np.round(train_set.targets[10], 2))
