"""Metrics and figure-data export: vector RMSE, per-axis 2D histograms,
time-series traces.

RMSE uses the vector form sqrt(mean ||error||^2) separately for the force
and torque halves. Histograms bin (ground truth, estimate) pairs per axis on
a symmetric square grid so the diagonal marks perfect estimation; the grids
are emitted as plain text that any plotting tool can consume (rendering the
figures themselves is out of scope).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

AXIS_NAMES = ("fx", "fy", "fz", "tx", "ty", "tz")

REPORT_COLUMNS = ("method,split,n,rmse_f,rmse_t,"
                  "rmse_fx,rmse_fy,rmse_fz,rmse_tx,rmse_ty,rmse_tz")


@dataclass(frozen=True)
class EvalReport:
    method: str
    split: str
    n: int
    rmse_f: float
    rmse_t: float
    per_axis: tuple   # 6 values, AXIS_NAMES order

    def to_line(self) -> str:
        vals = [self.rmse_f, self.rmse_t, *self.per_axis]
        return ",".join([self.method, self.split, str(self.n)]
                        + [f"{v:.9g}" for v in vals])


def _check_pair(predictions, ground_truths):
    p = np.asarray(predictions, dtype=float)
    g = np.asarray(ground_truths, dtype=float)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    if p.ndim != 2 or p.shape[1] != 6 or p.shape[0] == 0:
        raise ValueError("expected nonempty (n, 6) arrays")
    return p, g


def rmse(predictions, ground_truths):
    """(RMSE_F, RMSE_T) with 3-vector Euclidean error norms."""
    p, g = _check_pair(predictions, ground_truths)
    d = p - g
    rf = float(np.sqrt((d[:, :3] ** 2).sum(axis=1).mean()))
    rt = float(np.sqrt((d[:, 3:] ** 2).sum(axis=1).mean()))
    return rf, rt


def rmse_per_axis(predictions, ground_truths) -> np.ndarray:
    p, g = _check_pair(predictions, ground_truths)
    return np.sqrt(((p - g) ** 2).mean(axis=0))


def evaluate(method: str, split: str, predictions, ground_truths) -> EvalReport:
    rf, rt = rmse(predictions, ground_truths)
    per_axis = rmse_per_axis(predictions, ground_truths)
    return EvalReport(method=method, split=split,
                      n=int(np.asarray(predictions).shape[0]),
                      rmse_f=rf, rmse_t=rt, per_axis=tuple(map(float, per_axis)))


def write_report(path, reports) -> None:
    lines = [REPORT_COLUMNS] + [r.to_line() for r in reports]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class AxisHistogram:
    axis: str
    counts: np.ndarray     # (bins, bins); rows = ground truth, cols = estimate
    edges: np.ndarray      # (bins + 1,), shared by both axes
    log_scale: bool = True

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def axis_histograms(predictions, ground_truths, bins: int = 60,
                    log_scale: bool = True):
    """One symmetric-range 2D histogram of (gt, est) per wrench axis."""
    p, g = _check_pair(predictions, ground_truths)
    out = []
    for a, name in enumerate(AXIS_NAMES):
        m = float(max(np.abs(p[:, a]).max(), np.abs(g[:, a]).max()))
        if m == 0.0:
            m = 1e-9
        edges = np.linspace(-m, m, bins + 1)
        counts, _, _ = np.histogram2d(g[:, a], p[:, a], bins=(edges, edges))
        out.append(AxisHistogram(axis=name, counts=counts.astype(int),
                                 edges=edges, log_scale=log_scale))
    return out


def write_histogram(path, hist: AxisHistogram) -> None:
    """Text grid with a 2-line header (axis tag, then the shared bin edges)."""
    lines = [
        f"# axis={hist.axis} bins={hist.counts.shape[0]} "
        f"log_scale={int(hist.log_scale)} rows=gt cols=est",
        "# edges=" + ",".join(f"{e:.9g}" for e in hist.edges),
    ]
    for row in hist.counts:
        lines.append(",".join(str(int(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_histogram(path) -> AxisHistogram:
    lines = Path(path).read_text(encoding="utf-8").strip().split("\n")
    head = dict(kv.split("=", 1) for kv in lines[0][2:].split() if "=" in kv)
    edges = np.array([float(v) for v in lines[1].split("=", 1)[1].split(",")])
    counts = np.array([[int(v) for v in ln.split(",")] for ln in lines[2:]])
    return AxisHistogram(axis=head["axis"], counts=counts, edges=edges,
                         log_scale=bool(int(head.get("log_scale", "1"))))


def timeseries_rows(frames, predict_fn):
    """Rows (t, axis, gt, est) for all six axes of every frame."""
    rows = []
    for f in frames:
        est = predict_fn(f)
        gt = f.wrench.as_array()
        for a, name in enumerate(AXIS_NAMES):
            rows.append((f.timestamp, name, float(gt[a]), float(est[a])))
    return rows


def export_timeseries(path, frames, predict_fn) -> None:
    rows = timeseries_rows(frames, predict_fn)
    lines = ["t,axis,gt,est"]
    for t, name, gt, est in rows:
        lines.append(f"{t:.9g},{name},{gt:.9g},{est:.9g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
