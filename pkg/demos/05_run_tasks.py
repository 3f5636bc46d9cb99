"""Run the three closed-loop tasks with the ground-truth passthrough
estimator: grasp a pile, drag a tethered blanket until the lateral force
threshold, and wipe marker off a limb cylinder under force regulation.

Pass a trained checkpoint to drive the tasks with the vision model instead:
    python demos/05_run_tasks.py [checkpoint.ckpt]
"""

import sys

import numpy as np

from softwrench.control import run_trials, summarize, wipe_step

model = None
if len(sys.argv) > 1:
    from softwrench.estimator import load_model
    model = load_model(sys.argv[1])
    print(f"driving tasks with {sys.argv[1]}")
else:
    print("driving tasks with the ground-truth passthrough")

# The wiping law in isolation: on-target force plus an orthogonal stride.
step = wipe_step(np.zeros(3), f_hat=[0.0, 0.0, 5.0], d=[0.02, 0.0, 0.0], k_f=5.0)
print("wipe step at regulated force:", step)
step = wipe_step(np.zeros(3), f_hat=[0.0, 0.0, 4.0], d=[0.0, 0.0, 0.0], k_f=5.0)
print("wipe step 1 N under target  :", step, "(presses toward the surface)")

results = []
for task, trials in (("grasp", 5), ("cover", 5), ("clean", 3)):
    rs = run_trials(task, model, trials, base_seed=42)
    results.extend(rs)
    for k, r in enumerate(rs):
        cov = "" if r.coverage is None else f"  coverage={r.coverage:.3f}"
        print(f"{task} trial {k}: success={r.success}{cov}  "
              f"({len(r.trace)} steps)")

print("\n" + summarize(results))
