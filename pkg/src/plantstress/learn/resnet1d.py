"""Small 1-D residual CNN with hand-written backpropagation.

Layout is (batch, length, channels). Each residual block is::

    h = relu(conv_a(x));  out = relu(conv_b(h) + skip(x))

where ``skip`` is the identity, or a bias-free 1x1 projection when the
channel count changes. Blocks feed global average pooling and a softmax head.
There is no batch normalisation, so gradients are exact and checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .base import FitError, make_rng


@dataclass(frozen=True)
class Arch:
    in_channels: int = 2
    length: int = 48
    n_blocks: int = 3
    filters: int = 16
    kernel: int = 5
    n_classes: int = 2

    def __post_init__(self):
        if self.kernel % 2 != 1:
            raise ValueError("kernel must be odd for same padding")


def init_params(arch: Arch, rng) -> dict:
    """He-normal conv weights; all biases start at zero."""
    p = {}
    c_in = arch.in_channels
    for b in range(arch.n_blocks):
        F, K = arch.filters, arch.kernel
        p[f"b{b}.wa"] = rng.normal(0, np.sqrt(2.0 / (c_in * K)), (F, c_in * K))
        p[f"b{b}.ba"] = np.zeros(F)
        p[f"b{b}.wb"] = rng.normal(0, np.sqrt(2.0 / (F * K)), (F, F * K))
        p[f"b{b}.bb"] = np.zeros(F)
        if c_in != F:
            p[f"b{b}.proj"] = rng.normal(0, np.sqrt(1.0 / c_in), (c_in, F))
        c_in = F
    p["head.w"] = rng.normal(0, np.sqrt(1.0 / c_in), (arch.n_classes, c_in))
    p["head.b"] = np.zeros(arch.n_classes)
    return p


def _im2col(x, K):
    pad = K // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (0, 0)))
    cols = sliding_window_view(xp, K, axis=1)  # N x L x C x K
    N, L, C, _ = cols.shape
    return cols.reshape(N * L, C * K)


def _col2im(dcols, N, L, C, K):
    pad = K // 2
    d = dcols.reshape(N, L, C, K)
    dxp = np.zeros((N, L + 2 * pad, C))
    for j in range(K):
        dxp[:, j:j + L, :] += d[:, :, :, j]
    return dxp[:, pad:pad + L, :]


def _conv(x, w, b, K):
    N, L, _ = x.shape
    cols = _im2col(x, K)
    return (cols @ w.T + b).reshape(N, L, -1), cols


def forward(params, x, arch: Arch):
    """Return ``(logits, cache)`` for input of shape (N, L, C)."""
    cache = []
    h = x
    for b in range(arch.n_blocks):
        za, cols_a = _conv(h, params[f"b{b}.wa"], params[f"b{b}.ba"], arch.kernel)
        ha = np.maximum(za, 0.0)
        zb, cols_b = _conv(ha, params[f"b{b}.wb"], params[f"b{b}.bb"], arch.kernel)
        proj = params.get(f"b{b}.proj")
        skip = h @ proj if proj is not None else h
        z = zb + skip
        out = np.maximum(z, 0.0)
        cache.append((h, cols_a, za, cols_b, z))
        h = out
    pooled = h.mean(axis=1)
    logits = pooled @ params["head.w"].T + params["head.b"]
    return logits, (cache, pooled, h.shape)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grads(params, x, y, arch: Arch):
    """Mean cross-entropy of integer labels ``y`` and its parameter gradients."""
    N = x.shape[0]
    logits, (cache, pooled, hshape) = forward(params, x, arch)
    prob = softmax(logits)
    loss = -np.mean(np.log(prob[np.arange(N), y] + 1e-300))
    dlogits = prob.copy()
    dlogits[np.arange(N), y] -= 1.0
    dlogits /= N
    g = {"head.w": dlogits.T @ pooled, "head.b": dlogits.sum(axis=0)}
    dh = np.repeat((dlogits @ params["head.w"])[:, None, :], hshape[1], axis=1) / hshape[1]
    K = arch.kernel
    for b in reversed(range(arch.n_blocks)):
        h_in, cols_a, za, cols_b, z = cache[b]
        Nn, L, C = h_in.shape
        dz = dh * (z > 0)
        F = dz.shape[2]
        dz2 = dz.reshape(Nn * L, F)
        g[f"b{b}.wb"] = dz2.T @ cols_b
        g[f"b{b}.bb"] = dz2.sum(axis=0)
        dha = _col2im(dz2 @ params[f"b{b}.wb"], Nn, L, F, K)
        dza = (dha * (za > 0)).reshape(Nn * L, F)
        g[f"b{b}.wa"] = dza.T @ cols_a
        g[f"b{b}.ba"] = dza.sum(axis=0)
        dx = _col2im(dza @ params[f"b{b}.wa"], Nn, L, C, K)
        proj = params.get(f"b{b}.proj")
        if proj is not None:
            g[f"b{b}.proj"] = h_in.reshape(Nn * L, C).T @ dz2
            dx += dz @ proj.T
        else:
            dx += dz
        dh = dx
    return loss, g


@dataclass
class ResNet1dModel:
    arch: Arch
    params: dict
    channel_mean: np.ndarray
    channel_scale: np.ndarray
    classes: np.ndarray
    hyper: dict = field(default_factory=dict)
    loss_history: list = field(default_factory=list)

    def _prepare(self, windows):
        x = np.asarray(windows, dtype=float)
        if x.ndim != 3 or x.shape[1:] != (self.arch.length, self.arch.in_channels):
            raise ValueError(f"expected windows of shape (n, {self.arch.length}, "
                             f"{self.arch.in_channels}), got {x.shape}")
        return (x - self.channel_mean) / self.channel_scale

    def predict_proba(self, windows, batch=256):
        x = self._prepare(windows)
        out = [softmax(forward(self.params, x[s:s + batch], self.arch)[0])
               for s in range(0, x.shape[0], batch)]
        return np.concatenate(out) if out else np.zeros((0, self.arch.n_classes))

    def predict(self, windows):
        return self.classes[np.argmax(self.predict_proba(windows), axis=1)]

    def to_dict(self):
        return {"arch": self.arch.__dict__.copy(),
                "params": {k: v.tolist() for k, v in self.params.items()},
                "channel_mean": self.channel_mean.tolist(),
                "channel_scale": self.channel_scale.tolist(),
                "classes": self.classes.tolist(), "hyper": dict(self.hyper),
                "loss_history": list(self.loss_history)}

    @classmethod
    def from_dict(cls, d):
        return cls(Arch(**d["arch"]), {k: np.array(v, dtype=float) for k, v in d["params"].items()},
                   np.array(d["channel_mean"]), np.array(d["channel_scale"]),
                   np.array(d["classes"]), dict(d["hyper"]), list(d["loss_history"]))


def fit_resnet1d(windows, y, epochs=12, batch_size=32, lr=0.01, momentum=0.9,
                 n_blocks=3, filters=16, kernel=5, seed=0):
    """Train by seeded mini-batch SGD with momentum on cross-entropy.

    Inputs are z-scored per channel with training statistics kept in the model.
    """
    x = np.asarray(windows, dtype=float)
    y = np.asarray(y)
    if x.ndim != 3:
        raise ValueError(f"windows must be (n, length, channels), got {x.shape}")
    classes, codes = np.unique(y, return_inverse=True)
    if classes.size < 2:
        raise FitError("need at least two classes")
    mean = x.mean(axis=(0, 1))
    scale = x.std(axis=(0, 1))
    scale = np.where(scale > 0, scale, 1.0)
    z = (x - mean) / scale
    arch = Arch(x.shape[2], x.shape[1], n_blocks, filters, kernel, classes.size)
    rng = make_rng(seed)
    params = init_params(arch, rng)
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    history = []
    n = x.shape[0]
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, batch_size):
            idx = order[s:s + batch_size]
            loss, grads = loss_and_grads(params, z[idx], codes[idx], arch)
            total += loss * idx.size
            for k in params:
                velocity[k] = momentum * velocity[k] - lr * grads[k]
                params[k] += velocity[k]
        history.append(total / n)
        if not np.isfinite(history[-1]):
            raise FitError("training diverged")
    hyper = {"epochs": epochs, "batch_size": batch_size, "lr": lr, "momentum": momentum,
             "seed": seed}
    return ResNet1dModel(arch, params, mean, scale, classes, hyper, history)
