"""Command-line entry point: gen-data, train, eval, run-task, export-plots.

Exit codes: 0 success, 1 usage error, 2 runtime failure. All randomness
derives from --seed through named sub-streams, and every command echoes its
resolved configuration into the output directory.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import baselines, control, dataset, estimator, evaluation
from .config import load_config, resolve, write_config_echo


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="softwrench", description=__doc__)
    sub = p.add_subparsers(dest="command")

    g = sub.add_parser("gen-data", help="generate the synthetic dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--config")
    g.add_argument("--seed", type=int)
    g.add_argument("--gripper", choices=["tendon_actuated", "pneumatic"])
    g.add_argument("--envs")
    g.add_argument("--primitives")
    g.add_argument("--seconds-per-combo", type=float, dest="seconds_per_combo")
    g.add_argument("--sequences-per-combo", type=int, dest="sequences_per_combo")
    g.add_argument("--image-rate", type=float, dest="image_rate")
    g.add_argument("--quick", action="store_true",
                   help="small dataset (<= 3k frames) for fast runs")
    g.add_argument("--jobs", type=int)

    t = sub.add_parser("train", help="train the estimator or a baseline")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--config")
    t.add_argument("--method", choices=["estimator", "effort_mlp", "mean_guesser"])
    t.add_argument("--holdout-env", dest="holdout_env")
    t.add_argument("--iters", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--batch", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--c-mode", dest="c_mode", choices=["norm", "per_axis"])
    t.add_argument("--no-flip", action="store_true")
    t.add_argument("--no-photometric", action="store_true")

    e = sub.add_parser("eval", help="evaluate checkpoints on the holdout split")
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--checkpoint", action="append", default=[])
    e.add_argument("--holdout-env", dest="holdout_env")
    e.add_argument("--histogram-bins", type=int, dest="histogram_bins")
    e.add_argument("--timeseries", type=int,
                   help="export gt/estimate traces for this many test sequences")
    e.add_argument("--seed", type=int)

    r = sub.add_parser("run-task", help="run seeded closed-loop task trials")
    r.add_argument("task", nargs="?")
    r.add_argument("--out", required=True)
    r.add_argument("--checkpoint")
    r.add_argument("--estimator", choices=["gt", "model"], default=None,
                   help="'gt' runs the ground-truth passthrough")
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)

    x = sub.add_parser("export-plots", help="reformat evaluation grids for gnuplot")
    x.add_argument("--eval-dir", required=True, dest="eval_dir")
    x.add_argument("--out", required=True)
    return p


def _flags(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys}


def cmd_gen_data(args) -> int:
    defaults = {
        "seed": 0, "gripper": "tendon_actuated",
        "envs": ",".join(dataset.DEFAULT_ENVS),
        "primitives": ",".join(dataset.PRIMITIVES),
        "seconds_per_combo": 150.0, "sequences_per_combo": 3,
        "image_rate": 10.0, "jobs": 1,
    }
    fv = load_config(args.config) if args.config else {}
    cfg = resolve(defaults, fv, _flags(args, ["seed", "gripper", "envs",
                                              "primitives", "seconds_per_combo",
                                              "sequences_per_combo", "image_rate",
                                              "jobs"]))
    if args.quick:
        cfg["seconds_per_combo"] = 15.0
        cfg["sequences_per_combo"] = 1
    envs = [s for s in str(cfg["envs"]).split(",") if s]
    prims = [s for s in str(cfg["primitives"]).split(",") if s]
    bad = [p for p in prims if p not in dataset.PRIMITIVES]
    if bad or not envs:
        raise UsageError(f"invalid primitives {bad} or empty env list")
    out = Path(args.out)
    manifest = dataset.generate_dataset(
        out, seed=int(cfg["seed"]), envs=envs, primitives=prims,
        gripper_kind=str(cfg["gripper"]),
        seconds_per_combo=float(cfg["seconds_per_combo"]),
        sequences_per_combo=int(cfg["sequences_per_combo"]),
        image_rate=float(cfg["image_rate"]), jobs=int(cfg["jobs"]),
        progress=lambda msg: print(msg))
    write_config_echo(out, cfg)
    counts = {}
    for entry in manifest.entries:
        counts[entry.primitive] = counts.get(entry.primitive, 0) + entry.n_frames
    for prim in prims:
        print(f"{prim}: {counts.get(prim, 0)} frames")
    print(f"total: {manifest.total_frames()} frames in {len(manifest.entries)} "
          f"sequences -> {out}")
    return 0


def _load_training_set(data_dir, holdout_env):
    manifest = dataset.load_manifest(data_dir)
    if holdout_env not in manifest.env_ids():
        raise UsageError(f"holdout env {holdout_env!r} not in dataset "
                         f"(has {manifest.env_ids()})")
    return dataset.split_by_environment(manifest, holdout_env)


def cmd_train(args) -> int:
    defaults = {"method": "estimator", "holdout_env": "home", "iters": 20000,
                "lr": 1e-4, "batch": 4, "seed": 0, "c_mode": "norm",
                "flip": True, "photometric": True}
    fv = load_config(args.config) if args.config else {}
    cfg = resolve(defaults, fv, _flags(args, ["method", "holdout_env", "iters",
                                              "lr", "batch", "seed", "c_mode"]))
    if args.no_flip:
        cfg["flip"] = False
    if args.no_photometric:
        cfg["photometric"] = False
    train_manifest, _ = _load_training_set(args.data, cfg["holdout_env"])
    train_set = estimator.TrainingSet.from_manifest(train_manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    tc = estimator.TrainConfig(
        learning_rate=float(cfg["lr"]), batch_size=int(cfg["batch"]),
        iterations=int(cfg["iters"]), c_mode=str(cfg["c_mode"]),
        flip=bool(cfg["flip"]), photometric=bool(cfg["photometric"]),
        seed=int(cfg["seed"]))
    method = str(cfg["method"])
    if method == "estimator":
        model = estimator.RegressionModel.create(seed=tc.seed)
        result = estimator.train(model, train_set, tc)
        estimator.save_model(out / "estimator.ckpt", result)
        estimator.save_loss_curve(out / "loss_curve.csv", result.curve)
        print(f"estimator: final batch loss {result.curve[-1][1]:.4g}, "
              f"c={result.torque_weight:.3g}")
    elif method == "effort_mlp":
        c = estimator.torque_weight(train_set.targets, mode=tc.c_mode)
        mlp, curve = baselines.effort_fit(train_set.efforts, train_set.targets,
                                          tc, c=c)
        baselines.save_effort_mlp(out / "effort_mlp.ckpt", mlp,
                                  config={"c": c, "iters": tc.iterations})
        estimator.save_loss_curve(out / "loss_curve.csv", curve)
        print(f"effort_mlp: final batch loss {curve[-1][1]:.4g}, c={c:.3g}")
    elif method == "mean_guesser":
        guesser = baselines.mean_fit(train_set.targets)
        baselines.save_mean_guesser(out / "mean_guesser.ckpt", guesser)
        print(f"mean_guesser: mean wrench {np.round(guesser.mean, 4).tolist()}")
    else:
        raise UsageError(f"unknown method {method!r}")
    write_config_echo(out, cfg)
    return 0


def _checkpoint_predictions(path, test_set):
    kind, _, _, _ = estimator.load_checkpoint(path)
    if kind == "estimator":
        model = estimator.load_model(path)
        preds = []
        for i in range(0, len(test_set), 256):
            batch = test_set.image_batch(range(i, min(i + 256, len(test_set))))
            preds.append(estimator.predict_batch(model, batch))
        return kind, np.vstack(preds)
    obj = baselines.load_baseline(path)
    if isinstance(obj, baselines.MeanGuesser):
        return kind, np.tile(obj.mean, (len(test_set), 1))
    return kind, obj.predict_batch(test_set.efforts)


def cmd_eval(args) -> int:
    defaults = {"holdout_env": "home", "histogram_bins": 60, "timeseries": 1,
                "seed": 0}
    cfg = resolve(defaults, {}, _flags(args, ["holdout_env", "histogram_bins",
                                              "timeseries", "seed"]))
    if not args.checkpoint:
        raise UsageError("need at least one --checkpoint")
    _, test_manifest = _load_training_set(args.data, cfg["holdout_env"])
    test_set = estimator.TrainingSet.from_manifest(test_manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for path in args.checkpoint:
        kind, preds = _checkpoint_predictions(path, test_set)
        report = evaluation.evaluate(kind, f"holdout:{cfg['holdout_env']}",
                                     preds, test_set.targets)
        reports.append(report)
        hists = evaluation.axis_histograms(preds, test_set.targets,
                                           bins=int(cfg["histogram_bins"]))
        for h in hists:
            evaluation.write_histogram(out / f"hist_{kind}_{h.axis}.txt", h)
        print(f"{kind}: RMSE_F={report.rmse_f:.4g} N  RMSE_T={report.rmse_t:.4g} N*m")
    evaluation.write_report(out / "report.csv", reports)

    n_ts = int(cfg["timeseries"])
    est_paths = [p for p in args.checkpoint
                 if estimator.load_checkpoint(p)[0] == "estimator"]
    if n_ts > 0 and est_paths:
        model = estimator.load_model(est_paths[0])
        root = Path(test_manifest.root)
        for entry in test_manifest.entries[:n_ts]:
            seq = dataset.load_sequence(root, entry, test_manifest)

            def predict_frame(frame):
                from .render import load_png
                img = load_png(root / frame.image_path)
                return estimator.predict(model, img).as_array()

            evaluation.export_timeseries(out / f"timeseries_{entry.seq_id}.csv",
                                         seq.frames, predict_frame)
    write_config_echo(out, cfg)
    return 0


def cmd_run_task(args) -> int:
    defaults = {"trials": 10, "seed": 0}
    cfg = resolve(defaults, {}, _flags(args, ["trials", "seed"]))
    if args.task not in control.TASKS:
        raise UsageError(f"unknown task {args.task!r}; valid names: "
                         f"{', '.join(sorted(control.TASKS))}")
    use_gt = (args.estimator == "gt") or (args.checkpoint is None)
    model = None if use_gt else estimator.load_model(args.checkpoint)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = control.run_trials(args.task, model, int(cfg["trials"]),
                                 base_seed=int(cfg["seed"]))
    (out / "task_summary.txt").write_text(control.summarize(results),
                                          encoding="utf-8")
    trace_lines = ["task,trial,success,coverage"]
    for k, r in enumerate(results):
        cov = "" if r.coverage is None else f"{r.coverage:.4f}"
        trace_lines.append(f"{r.task},{k},{int(r.success)},{cov}")
        rows = ["t,axis,gt,est"]
        for t, _, est, gt in r.trace:
            ga, ea = gt.as_array(), est.as_array()
            for a, name in enumerate(evaluation.AXIS_NAMES):
                rows.append(f"{t:.9g},{name},{ga[a]:.9g},{ea[a]:.9g}")
        (out / f"trace_{args.task}_{k:02d}.csv").write_text(
            "\n".join(rows) + "\n", encoding="utf-8")
    (out / "trials.csv").write_text("\n".join(trace_lines) + "\n",
                                    encoding="utf-8")
    cfg["task"] = args.task
    cfg["estimator"] = "gt" if use_gt else args.checkpoint
    write_config_echo(out, cfg)
    print(control.summarize(results))
    return 0


def cmd_export_plots(args) -> int:
    eval_dir = Path(args.eval_dir)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = 0
    for hist_path in sorted(eval_dir.glob("hist_*.txt")):
        h = evaluation.read_histogram(hist_path)
        centers = 0.5 * (h.edges[:-1] + h.edges[1:])
        lines = ["# gt est count (gnuplot: splot ... with pm3d / image)"]
        for i, gc in enumerate(centers):
            for j, ec in enumerate(centers):
                lines.append(f"{gc:.9g} {ec:.9g} {int(h.counts[i, j])}")
            lines.append("")
        (out / (hist_path.stem + ".dat")).write_text("\n".join(lines) + "\n",
                                                     encoding="utf-8")
        n += 1
    for ts_path in sorted(eval_dir.glob("timeseries_*.csv")):
        rows = ts_path.read_text(encoding="utf-8").strip().split("\n")[1:]
        by_axis = {}
        for row in rows:
            t, axis, gt, est = row.split(",")
            by_axis.setdefault(axis, []).append(f"{t} {gt} {est}")
        lines = []
        for axis in evaluation.AXIS_NAMES:
            lines.append(f"# axis {axis}: t gt est")
            lines.extend(by_axis.get(axis, []))
            lines.append("")
            lines.append("")
        (out / (ts_path.stem + ".dat")).write_text("\n".join(lines) + "\n",
                                                   encoding="utf-8")
        n += 1
    write_config_echo(out, {"eval_dir": str(eval_dir), "exported": n})
    print(f"exported {n} gnuplot files to {out}")
    return 0


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "run-task": cmd_run_task,
    "export-plots": cmd_export_plots,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return 1
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (KeyError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
