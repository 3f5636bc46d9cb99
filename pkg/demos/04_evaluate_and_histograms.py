"""Evaluate estimators against the baselines on a held-out environment and
export the figure data: the RMSE report, per-axis 2D histograms (gt vs
estimate), and a time-series trace.

Run:  python demos/04_evaluate_and_histograms.py [work_dir]
"""

import sys
from pathlib import Path

import numpy as np

from softwrench.baselines import effort_fit, mean_fit
from softwrench.dataset import generate_dataset, load_sequence, split_by_environment
from softwrench.estimator import TrainConfig, TrainingSet, torque_weight
from softwrench.evaluation import (axis_histograms, evaluate,
                                   export_timeseries, write_histogram,
                                   write_report)

work = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/04")
data = work / "data"

manifest = generate_dataset(data, seed=4, envs=("lab", "office1", "home"),
                            primitives=("push", "grasp"),
                            seconds_per_combo=10.0, sequences_per_combo=1,
                            jobs=2)
train_m, test_m = split_by_environment(manifest, "home")
train_set = TrainingSet.from_manifest(train_m)
test_set = TrainingSet.from_manifest(test_m)

# Mean guesser: the floor every method must beat.
guesser = mean_fit(train_set.targets)
mean_preds = np.tile(guesser.mean, (len(test_set), 1))

# Effort baseline: same loss, same optimizer, motor efforts as input.
c = torque_weight(train_set.targets)
mlp, _ = effort_fit(train_set.efforts, train_set.targets,
                    TrainConfig(iterations=4000, seed=0), c=c)
mlp_preds = mlp.predict_batch(test_set.efforts)

reports = [
    evaluate("mean_guesser", "holdout:home", mean_preds, test_set.targets),
    evaluate("effort_mlp", "holdout:home", mlp_preds, test_set.targets),
]
work.mkdir(parents=True, exist_ok=True)
write_report(work / "report.csv", reports)
for rep in reports:
    print(f"{rep.method:14s} RMSE_F={rep.rmse_f:.3f} N  RMSE_T={rep.rmse_t:.4f} N*m")

# Per-axis 2D histograms on symmetric ranges: perfect estimation piles all
# counts on the diagonal; a constant guesser fills a single column.
for h in axis_histograms(mlp_preds, test_set.targets, bins=40):
    write_histogram(work / f"hist_effort_{h.axis}.txt", h)
print(f"\nhistogram grids -> {work}/hist_effort_*.txt "
      "(render with gnuplot or any heatmap tool)")

# Time-series export for one held-out sequence, using the effort baseline.
entry = test_m.entries[0]
seq = load_sequence(data, entry, manifest)
export_timeseries(work / f"timeseries_{entry.seq_id}.csv", seq.frames,
                  lambda f: mlp.predict(f.effort).as_array())
print(f"time series      -> {work}/timeseries_{entry.seq_id}.csv")
