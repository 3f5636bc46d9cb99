"""Image-to-wrench regressor: loss, augmentations, trainer, gradient check.

The model maps a 64x64x3 image to 6 outputs read as (Fx,Fy,Fz) newtons and
(Tx,Ty,Tz) newton-meters. Training minimizes

    L = ||F - Fhat||^2 + c ||T - That||^2

averaged over the batch, with Adam. The torque weight c defaults to the
ratio of force-norm to torque-norm standard deviations over the training
set (a per-axis variant is selectable). Augmentation is a random horizontal
flip with the matching wrench reflection (forces are vectors, torques are
pseudovectors) plus photometric jitter.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .core import Rng, Wrench, validate_image
from .dataset import Manifest, load_sequence
from .nn import Adam, Network, build_conv_regressor, network_from_descriptor
from .render import load_png_u8

RESOLUTION = 64

# Wrench reflection through the Y-Z plane (image mirrored about its vertical
# centerline): force is a vector, torque a pseudovector.
FLIP_SIGNS = np.array([-1.0, 1.0, 1.0, 1.0, -1.0, -1.0])

_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 4
    iterations: int = 20000
    torque_weight: float | None = None   # None: computed from the train set
    c_mode: str = "norm"                 # "norm" or "per_axis"
    flip: bool = True
    photometric: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.torque_weight is not None and self.torque_weight <= 0:
            raise ValueError("torque weight must be positive")


class RegressionModel:
    """Convolutional image-to-wrench regressor (thin wrapper over Network)."""

    def __init__(self, net: Network):
        self.net = net
        self.resolution = net.descriptor.get("resolution", RESOLUTION)

    @staticmethod
    def create(seed: int = 0, resolution: int = RESOLUTION) -> "RegressionModel":
        net = build_conv_regressor(resolution=resolution)
        net.init_params(Rng(seed).split("init").gen)
        return RegressionModel(net)

    @property
    def params(self):
        return self.net.params

    def forward(self, batch: np.ndarray, train: bool = False) -> np.ndarray:
        return self.net.forward(batch, train=train)


def predict(model: RegressionModel, image: np.ndarray) -> Wrench:
    """Deterministic forward pass on a single image."""
    img = validate_image(np.asarray(image, dtype=float), model.resolution)
    out = model.forward(img[None])
    if not np.isfinite(out).all():
        raise FloatingPointError("non-finite model output")
    return Wrench.from_array(out[0])


def predict_batch(model: RegressionModel, images: np.ndarray) -> np.ndarray:
    return model.forward(np.asarray(images, dtype=float))


def loss(pred, target, c: float) -> float:
    """Squared force error plus c times squared torque error."""
    if c <= 0:
        raise ValueError("torque weight c must be positive")
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    target = np.atleast_2d(np.asarray(target, dtype=float))
    df = pred[:, :3] - target[:, :3]
    dt = pred[:, 3:] - target[:, 3:]
    per = (df * df).sum(axis=1) + c * (dt * dt).sum(axis=1)
    return float(per.mean())


def loss_and_grad(pred: np.ndarray, target: np.ndarray, c: float):
    """Batch-mean loss and its gradient with respect to the predictions."""
    d = pred - target
    w = np.array([1.0, 1.0, 1.0, c, c, c])
    value = float(((d * d) * w).sum(axis=1).mean())
    grad = 2.0 * w * d / d.shape[0]
    return value, grad


def torque_weight(targets: np.ndarray, mode: str = "norm") -> float:
    """Loss weight c from the training wrenches.

    "norm": std of force-vector norms over std of torque-vector norms.
    "per_axis": same ratio on per-axis stds pooled across the three axes.
    """
    t = np.asarray(targets, dtype=float)
    if t.ndim != 2 or t.shape[1] != 6 or t.shape[0] < 2:
        raise ValueError("need at least 2 samples of 6-vector wrenches")
    if mode == "norm":
        sf = float(np.linalg.norm(t[:, :3], axis=1).std())
        st = float(np.linalg.norm(t[:, 3:], axis=1).std())
    elif mode == "per_axis":
        sf = float(np.sqrt(t[:, :3].var(axis=0).mean()))
        st = float(np.sqrt(t[:, 3:].var(axis=0).mean()))
    else:
        raise ValueError(f"unknown c mode {mode!r}")
    if st == 0.0:
        raise ValueError("degenerate torque distribution")
    return sf / st


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------

def flip_frame(image: np.ndarray, wrench6: np.ndarray):
    """Mirror the image horizontally and reflect the wrench to match."""
    return image[:, ::-1, :].copy(), np.asarray(wrench6, dtype=float) * FLIP_SIGNS


def augment_flip(image: np.ndarray, wrench6: np.ndarray, rng: Rng):
    """Apply flip_frame with probability 0.5."""
    if rng.gen.random() < 0.5:
        return flip_frame(image, wrench6)
    return image, np.asarray(wrench6, dtype=float)


def _hue_matrix(turns: float) -> np.ndarray:
    """Rotation about the gray axis (1,1,1)/sqrt(3) by turns*2pi."""
    theta = 2.0 * np.pi * turns
    u = np.full(3, 1.0 / np.sqrt(3.0))
    K = np.array([[0.0, -u[2], u[1]], [u[2], 0.0, -u[0]], [-u[1], u[0], 0.0]])
    return (np.cos(theta) * np.eye(3) + np.sin(theta) * K
            + (1.0 - np.cos(theta)) * np.outer(u, u))


def photometric(image: np.ndarray, brightness: float = 0.0, contrast: float = 1.0,
                saturation: float = 1.0, hue_turns: float = 0.0) -> np.ndarray:
    """Brightness, contrast, saturation, hue in that fixed order, then clamp.

    Identity parameters short-circuit so an untouched image passes through
    bit-exactly.
    """
    out = image
    if brightness != 0.0:
        out = out + brightness
    if contrast != 1.0:
        out = (out - 0.5) * contrast + 0.5
    if saturation != 1.0:
        gray = out @ _LUMA
        out = gray[..., None] + (out - gray[..., None]) * saturation
    if hue_turns != 0.0:
        out = out @ _hue_matrix(hue_turns).T
    if out is image:
        return image
    return np.clip(out, 0.0, 1.0)


def augment_photometric(image: np.ndarray, rng: Rng) -> np.ndarray:
    gen = rng.gen
    return photometric(image,
                       brightness=float(gen.uniform(-0.2, 0.2)),
                       contrast=float(gen.uniform(0.8, 1.25)),
                       saturation=float(gen.uniform(0.8, 1.25)),
                       hue_turns=float(gen.uniform(-0.05, 0.05)))


# ---------------------------------------------------------------------------
# Training data access
# ---------------------------------------------------------------------------

class TrainingSet:
    """All frames of a manifest decoded into memory (uint8 images)."""

    def __init__(self, images, targets, efforts, env_ids, seq_bounds):
        self.images = images
        self.targets = targets
        self.efforts = efforts
        self.env_ids = env_ids
        self.seq_bounds = seq_bounds   # seq_id -> (start, end) frame rows

    @staticmethod
    def from_manifest(manifest: Manifest) -> "TrainingSet":
        root = Path(manifest.root)
        images, targets, efforts, env_ids = [], [], [], []
        bounds = {}
        row = 0
        for entry in manifest.entries:
            seq = load_sequence(root, entry, manifest)
            for f in seq.frames:
                images.append(load_png_u8(root / f.image_path))
                targets.append(f.wrench.as_array())
                efforts.append(f.effort)
                env_ids.append(f.env_id)
            bounds[entry.seq_id] = (row, row + len(seq.frames))
            row += len(seq.frames)
        if not images:
            raise ValueError("manifest contains no frames")
        return TrainingSet(np.stack(images), np.stack(targets),
                           np.stack(efforts), env_ids, bounds)

    def __len__(self):
        return self.images.shape[0]

    def image_batch(self, idx) -> np.ndarray:
        return self.images[idx].astype(float) / 255.0


@dataclass
class TrainResult:
    model: object
    curve: list                  # (iteration, batch loss)
    torque_weight: float
    config: TrainConfig


def _resolve_c(cfg: TrainConfig, targets: np.ndarray) -> float:
    if cfg.torque_weight is not None:
        return cfg.torque_weight
    return torque_weight(targets, mode=cfg.c_mode)


def train(model: RegressionModel, train_set: TrainingSet,
          cfg: TrainConfig) -> TrainResult:
    """Minibatch Adam on the weighted squared-error loss.

    Deterministic given cfg.seed: batch order, augmentation draws, and the
    update sequence all derive from it. Aborts with a diagnostic if the loss
    goes non-finite.
    """
    n = len(train_set)
    if n == 0:
        raise ValueError("empty training set")
    c = _resolve_c(cfg, train_set.targets)
    batch_gen = Rng(cfg.seed).split("batch").gen
    aug_rng = Rng(cfg.seed).split("augment")
    adam = Adam(model.net.params.size, cfg.learning_rate)
    curve = []
    for it in range(cfg.iterations):
        idx = batch_gen.integers(0, n, size=cfg.batch_size)
        x = train_set.image_batch(idx)
        t = train_set.targets[idx].copy()
        for i in range(cfg.batch_size):
            if cfg.flip:
                x[i], t[i] = augment_flip(x[i], t[i], aug_rng)
            if cfg.photometric:
                x[i] = augment_photometric(x[i], aug_rng)
        pred = model.forward(x, train=True)
        value, dpred = loss_and_grad(pred, t, c)
        if not np.isfinite(value):
            raise RuntimeError(
                f"training diverged at iteration {it}: loss={value!r}")
        model.net.zero_grads()
        model.net.backward(dpred)
        adam.step(model.net.params, model.net.grads)
        if it % 50 == 0 or it == cfg.iterations - 1:
            curve.append((it, value))
    return TrainResult(model=model, curve=curve, torque_weight=c, config=cfg)


def train_vectors(net: Network, inputs: np.ndarray, targets: np.ndarray,
                  cfg: TrainConfig, c: float) -> list:
    """Same loop for plain feature-vector regressors (the effort baseline)."""
    n = inputs.shape[0]
    if n == 0:
        raise ValueError("empty training set")
    batch_gen = Rng(cfg.seed).split("batch").gen
    adam = Adam(net.params.size, cfg.learning_rate)
    curve = []
    for it in range(cfg.iterations):
        idx = batch_gen.integers(0, n, size=cfg.batch_size)
        pred = net.forward(inputs[idx], train=True)
        value, dpred = loss_and_grad(pred, targets[idx], c)
        if not np.isfinite(value):
            raise RuntimeError(
                f"training diverged at iteration {it}: loss={value!r}")
        net.zero_grads()
        net.backward(dpred)
        adam.step(net.params, net.grads)
        if it % 50 == 0 or it == cfg.iterations - 1:
            curve.append((it, value))
    return curve


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------

def gradient_check(model: RegressionModel, image: np.ndarray, target6,
                   c: float, n_samples: int = 50, step: float = 1e-4,
                   rng: Rng | None = None,
                   _corrupt_head_factor: float = 1.0) -> float:
    """Max relative error of the analytic loss gradient vs central differences.

    Samples parameters stratified across layer groups (every group gets
    probed, including the head). `_corrupt_head_factor` scales the analytic
    head gradient and exists so tests can prove the check catches a wrong
    gradient.
    """
    rng = rng or Rng(0)
    gen = rng.split("gradcheck").gen
    x = np.asarray(image, dtype=float)[None]
    t = np.asarray(target6, dtype=float)[None]

    pred = model.forward(x, train=True)
    _, dpred = loss_and_grad(pred, t, c)
    model.net.zero_grads()
    model.net.backward(dpred)
    analytic = model.net.grads.copy()
    if _corrupt_head_factor != 1.0:
        _, start, end = model.net.param_groups[-1]
        analytic[start:end] *= _corrupt_head_factor

    groups = [g for g in model.net.param_groups]
    picks = []
    gi = 0
    while len(picks) < n_samples:
        _, start, end = groups[gi % len(groups)]
        picks.append(int(gen.integers(start, end)))
        gi += 1

    params = model.net.params
    max_rel = 0.0
    for i in picks:
        keep = params[i]
        params[i] = keep + step
        lp = loss(model.forward(x), t, c)
        params[i] = keep - step
        lm = loss(model.forward(x), t, c)
        params[i] = keep
        numeric = (lp - lm) / (2.0 * step)
        rel = abs(analytic[i] - numeric) / max(abs(numeric), 1e-3)
        max_rel = max(max_rel, rel)
    return max_rel


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

_CKPT_MAGIC = "softwrench-checkpoint v1"


def save_checkpoint(path, kind: str, net: Network, config: dict | None = None,
                    extra: dict | None = None) -> None:
    """Versioned text container: descriptor + config echo + base64 float64."""
    blob = base64.b64encode(net.params.astype("<f8").tobytes()).decode("ascii")
    lines = [
        _CKPT_MAGIC,
        f"kind={kind}",
        "arch=" + json.dumps(net.descriptor, sort_keys=True),
        "config=" + json.dumps(config or {}, sort_keys=True),
        "extra=" + json.dumps(extra or {}, sort_keys=True),
        "params=" + blob,
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path):
    """Returns (kind, net, config, extra)."""
    text = Path(path).read_text(encoding="utf-8").strip().split("\n")
    if text[0] != _CKPT_MAGIC:
        raise ValueError(f"not a checkpoint file: {path}")
    fields = dict(line.split("=", 1) for line in text[1:])
    kind = fields["kind"]
    desc = json.loads(fields["arch"])
    net = network_from_descriptor(desc)
    params = np.frombuffer(base64.b64decode(fields["params"]), dtype="<f8")
    net.set_params(params.astype(float))
    return kind, net, json.loads(fields["config"]), json.loads(fields["extra"])


def save_model(path, result: TrainResult) -> None:
    cfg = asdict(result.config)
    cfg["resolved_torque_weight"] = result.torque_weight
    save_checkpoint(path, "estimator", result.model.net, config=cfg)


def load_model(path) -> RegressionModel:
    kind, net, _, _ = load_checkpoint(path)
    if kind != "estimator":
        raise ValueError(f"checkpoint {path} holds a {kind!r}, not an estimator")
    return RegressionModel(net)


def save_loss_curve(path, curve) -> None:
    lines = ["iter,loss"] + [f"{it},{v:.9g}" for it, v in curve]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
