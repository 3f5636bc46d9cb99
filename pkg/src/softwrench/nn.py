"""Feed-forward layers with analytic gradients on a flat parameter vector.

Everything is float64 numpy. A Network owns one flat parameter array and one
flat gradient array; layers hold reshaped views into both, so the optimizer
and the checkpoint format only ever deal with a single vector. Convolutions
are 3x3 stride-2 pad-1 (im2col + matmul); nonlinearities are tanh, which
keeps activations bounded.
"""

from __future__ import annotations

import numpy as np


def _he_uniform(gen: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    a = np.sqrt(6.0 / fan_in)
    return gen.uniform(-a, a, size=shape)


class Conv3x3s2:
    """3x3 convolution, stride 2, pad 1, NHWC."""

    def __init__(self, cin: int, cout: int):
        self.cin, self.cout = cin, cout
        self.param_shapes = [(3, 3, cin, cout), (cout,)]
        self.W = self.b = self.dW = self.db = None
        self._cache = None

    def init_params(self, gen):
        self.W[...] = _he_uniform(gen, self.W.shape, fan_in=9 * self.cin)
        self.b[...] = 0.0

    def forward(self, x, train=False):
        B, H, Wd, C = x.shape
        Ho, Wo = H // 2, Wd // 2
        xp = np.zeros((B, H + 2, Wd + 2, C))
        xp[:, 1:H + 1, 1:Wd + 1, :] = x
        s = xp.strides
        win = np.lib.stride_tricks.as_strided(
            xp, (B, Ho, Wo, 3, 3, C),
            (s[0], 2 * s[1], 2 * s[2], s[1], s[2], s[3]))
        cols = win.reshape(B * Ho * Wo, 9 * C)
        y = cols @ self.W.reshape(9 * C, self.cout) + self.b
        if train:
            self._cache = (cols, (B, H, Wd, C))
        return y.reshape(B, Ho, Wo, self.cout)

    def backward(self, dy):
        cols, (B, H, Wd, C) = self._cache
        Ho, Wo = H // 2, Wd // 2
        dyf = dy.reshape(-1, self.cout)
        self.dW += (cols.T @ dyf).reshape(self.W.shape)
        self.db += dyf.sum(axis=0)
        dcols = (dyf @ self.W.reshape(9 * C, self.cout).T).reshape(
            B, Ho, Wo, 3, 3, C)
        dxp = np.zeros((B, H + 2, Wd + 2, C))
        for ki in range(3):
            for kj in range(3):
                dxp[:, ki:ki + 2 * Ho:2, kj:kj + 2 * Wo:2, :] += dcols[:, :, :, ki, kj, :]
        return dxp[:, 1:H + 1, 1:Wd + 1, :]


class ChannelCenter:
    """Per-image channel centering plus global contrast normalization.

    Kills color-cast and lighting/contrast sensitivity: a room tint or lamp
    level never seen in training must not shift the features the head
    extrapolates from. No parameters; sits ahead of the first convolution,
    so its backward path is never consumed.
    """

    param_shapes = ()

    def forward(self, x, train=False):
        centered = x - x.mean(axis=(1, 2), keepdims=True)
        scale = centered.std(axis=(1, 2, 3), keepdims=True) + 0.05
        return centered / scale

    def backward(self, dy):
        return dy


class Tanh:
    param_shapes = ()

    def __init__(self):
        self._y = None

    def forward(self, x, train=False):
        y = np.tanh(x)
        if train:
            self._y = y
        return y

    def backward(self, dy):
        return dy * (1.0 - self._y * self._y)


class GlobalAvgPool:
    param_shapes = ()

    def __init__(self):
        self._hw = None

    def forward(self, x, train=False):
        self._hw = x.shape[1:3]
        return x.mean(axis=(1, 2))

    def backward(self, dy):
        h, w = self._hw
        return np.broadcast_to(dy[:, None, None, :] / (h * w),
                               (dy.shape[0], h, w, dy.shape[1])).copy()


class Dense:
    def __init__(self, n_in: int, n_out: int, zero_init: bool = False):
        self.n_in, self.n_out = n_in, n_out
        self.zero_init = zero_init
        self.param_shapes = [(n_in, n_out), (n_out,)]
        self.W = self.b = self.dW = self.db = None
        self._x = None

    def init_params(self, gen):
        if self.zero_init:
            self.W[...] = 0.0
        else:
            self.W[...] = _he_uniform(gen, self.W.shape, fan_in=self.n_in)
        self.b[...] = 0.0

    def forward(self, x, train=False):
        if train:
            self._x = x
        return x @ self.W + self.b

    def backward(self, dy):
        self.dW += self._x.T @ dy
        self.db += dy.sum(axis=0)
        return dy @ self.W.T


class Network:
    """Layer stack over a single flat parameter/gradient vector."""

    def __init__(self, layers, descriptor: dict):
        self.layers = layers
        self.descriptor = descriptor
        sizes = []
        for layer in layers:
            for shape in layer.param_shapes:
                sizes.append(int(np.prod(shape)))
        self.params = np.zeros(int(np.sum(sizes)) if sizes else 0)
        self.grads = np.zeros_like(self.params)
        self._bind_views()

    def _bind_views(self):
        off = 0
        self.param_groups = []
        for layer in self.layers:
            views = []
            for shape in layer.param_shapes:
                n = int(np.prod(shape))
                views.append((self.params[off:off + n].reshape(shape),
                              self.grads[off:off + n].reshape(shape), off))
                off += n
            if views:
                layer.W, layer.dW = views[0][0], views[0][1]
                layer.b, layer.db = views[1][0], views[1][1]
                self.param_groups.append(
                    (type(layer).__name__, views[0][2], views[1][2] + views[1][0].size))

    def init_params(self, gen):
        for layer in self.layers:
            if layer.param_shapes:
                layer.init_params(gen)

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy

    def zero_grads(self):
        self.grads[...] = 0.0

    def set_params(self, flat: np.ndarray):
        if flat.shape != self.params.shape:
            raise ValueError(
                f"parameter vector has {flat.size} entries, expected {self.params.size}")
        self.params[...] = flat


class Adam:
    """Standard Adam on a flat vector (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, n: int, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray):
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grads * grads
        mhat = self.m / (1.0 - self.beta1 ** self.t)
        vhat = self.v / (1.0 - self.beta2 ** self.t)
        params -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def build_conv_regressor(resolution: int = 64, channels=(8, 16, 32, 64),
                         n_out: int = 6) -> Network:
    """Channel centering, 4 stride-2 conv stages, global average pool, head."""
    layers = [ChannelCenter()]
    cin = 3
    for cout in channels:
        layers.append(Conv3x3s2(cin, cout))
        layers.append(Tanh())
        cin = cout
    layers.append(GlobalAvgPool())
    layers.append(Dense(cin, n_out))
    descriptor = {"type": "conv_regressor", "resolution": resolution,
                  "in_channels": 3, "channels": list(channels), "n_out": n_out}
    return Network(layers, descriptor)


def build_mlp(n_in: int, hidden=(64, 64), n_out: int = 6) -> Network:
    layers = []
    d = n_in
    for h in hidden:
        layers.append(Dense(d, h))
        layers.append(Tanh())
        d = h
    layers.append(Dense(d, n_out))
    descriptor = {"type": "mlp", "n_in": n_in, "hidden": list(hidden),
                  "n_out": n_out}
    return Network(layers, descriptor)


def network_from_descriptor(desc: dict) -> Network:
    if desc["type"] == "conv_regressor":
        return build_conv_regressor(desc["resolution"], tuple(desc["channels"]),
                                    desc["n_out"])
    if desc["type"] == "mlp":
        return build_mlp(desc["n_in"], tuple(desc["hidden"]), desc["n_out"])
    if desc["type"] == "empty":
        return Network([], desc)
    raise ValueError(f"unknown network type {desc['type']!r}")
