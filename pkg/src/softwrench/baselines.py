"""Comparison methods: the mean guesser and the effort-driven MLP.

Both predict the same tared wrench targets as the image regressor. The mean
guesser is the constant per-component training mean. The effort MLP maps the
six standardized actuator efforts through two hidden tanh layers of 64 units
and trains with the same loss and Adam settings as the image model; since
the effort matrix has rank 5, its accuracy along the matrix kernel direction
is capped at the mean guesser's.
"""

from __future__ import annotations

import warnings

import numpy as np

from .core import Rng, Wrench
from .estimator import (TrainConfig, load_checkpoint, save_checkpoint,
                        torque_weight, train_vectors)
from .nn import Network, build_mlp


class MeanGuesser:
    """Predicts the training-set mean wrench regardless of input."""

    def __init__(self, mean6: np.ndarray):
        self.mean = np.asarray(mean6, dtype=float).reshape(6)

    def predict(self, _frame=None) -> Wrench:
        return Wrench.from_array(self.mean)


def mean_fit(targets: np.ndarray) -> MeanGuesser:
    t = np.asarray(targets, dtype=float)
    if t.ndim != 2 or t.shape[1] != 6 or t.shape[0] == 0:
        raise ValueError("need a nonempty (n, 6) target array")
    return MeanGuesser(t.mean(axis=0))


def mean_predict(guesser: MeanGuesser, _frame=None) -> Wrench:
    return guesser.predict(_frame)


class EffortMlp:
    """Effort-vector regressor with input standardization."""

    def __init__(self, net: Network, mu: np.ndarray, sd: np.ndarray):
        self.net = net
        self.mu = np.asarray(mu, dtype=float).reshape(6)
        self.sd = np.asarray(sd, dtype=float).reshape(6)

    def predict(self, effort6) -> Wrench:
        e = (np.asarray(effort6, dtype=float).reshape(6) - self.mu) / self.sd
        return Wrench.from_array(self.net.forward(e[None])[0])

    def predict_batch(self, efforts: np.ndarray) -> np.ndarray:
        e = (np.asarray(efforts, dtype=float) - self.mu) / self.sd
        return self.net.forward(e)


def effort_fit(efforts: np.ndarray, targets: np.ndarray, cfg: TrainConfig,
               c: float | None = None, hidden=(64, 64)):
    """Train the effort baseline; returns (EffortMlp, loss curve)."""
    e = np.asarray(efforts, dtype=float)
    t = np.asarray(targets, dtype=float)
    if e.shape[0] == 0:
        raise ValueError("no efforts in the training set")
    mu = e.mean(axis=0)
    sd = e.std(axis=0)
    dead = sd == 0.0
    if dead.any():
        warnings.warn(f"constant effort channels {np.flatnonzero(dead).tolist()} "
                      "standardized to zero")
        sd = np.where(dead, 1.0, sd)
    if c is None:
        c = cfg.torque_weight if cfg.torque_weight is not None \
            else torque_weight(t, mode=cfg.c_mode)
    net = build_mlp(6, hidden=hidden, n_out=6)
    net.init_params(Rng(cfg.seed).split("mlp-init").gen)
    curve = train_vectors(net, (e - mu) / sd, t, cfg, c)
    return EffortMlp(net, mu, sd), curve


def effort_predict(mlp: EffortMlp, effort6) -> Wrench:
    return mlp.predict(effort6)


# -- checkpoint adapters ------------------------------------------------------

def save_mean_guesser(path, guesser: MeanGuesser, config: dict | None = None):
    net = Network([], {"type": "empty"})
    save_checkpoint(path, "mean_guesser", net, config=config,
                    extra={"mean": guesser.mean.tolist()})


def save_effort_mlp(path, mlp: EffortMlp, config: dict | None = None):
    save_checkpoint(path, "effort_mlp", mlp.net, config=config,
                    extra={"mu": mlp.mu.tolist(), "sd": mlp.sd.tolist()})


def load_baseline(path):
    """Load either baseline kind from a checkpoint file."""
    kind, net, config, extra = load_checkpoint(path)
    if kind == "mean_guesser":
        return MeanGuesser(np.array(extra["mean"]))
    if kind == "effort_mlp":
        return EffortMlp(net, np.array(extra["mu"]), np.array(extra["sd"]))
    raise ValueError(f"checkpoint {path} holds a {kind!r}, not a baseline")
