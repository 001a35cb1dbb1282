"""Tiny multilayer perceptrons with hand-written backpropagation.

Parameters of every network live in one flat float64 vector; layers are
views into it, so optimizers and checkpoints only deal with flat arrays.
"""
from __future__ import annotations

import numpy as np


class MLP:
    """Fully connected net: tanh hidden layers, linear output."""

    def __init__(self, sizes, rng=None, out_gain=1.0, params=None):
        self.sizes = tuple(int(s) for s in sizes)
        self.shapes = [(a, b) for a, b in zip(self.sizes[:-1], self.sizes[1:])]
        self.size = sum(a * b + b for a, b in self.shapes)
        if params is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            params = self._init(rng, out_gain)
        self.params = np.asarray(params, dtype=float)
        if self.params.shape != (self.size,):
            raise ValueError(f"expected {self.size} parameters, got {self.params.shape}")

    def _init(self, rng, out_gain):
        flat = []
        for k, (a, b) in enumerate(self.shapes):
            gain = out_gain if k == len(self.shapes) - 1 else np.sqrt(2.0)
            w = _orthogonal(rng, a, b) * gain
            flat += [w.ravel(), np.zeros(b)]
        return np.concatenate(flat)

    def layers(self, params=None):
        p = self.params if params is None else params
        out, i = [], 0
        for a, b in self.shapes:
            w = p[i:i + a * b].reshape(a, b)
            i += a * b
            out.append((w, p[i:i + b]))
            i += b
        return out

    def forward(self, x, params=None):
        """Return the output and the activations needed by :meth:`backward`."""
        acts = [x]
        h = x
        layers = self.layers(params)
        for k, (w, b) in enumerate(layers):
            h = h @ w + b
            if k < len(layers) - 1:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def backward(self, acts, dout, params=None):
        """Gradient of ``sum(dout * output)`` with respect to the flat parameters."""
        layers = self.layers(params)
        grads = []
        g = dout
        for k in range(len(layers) - 1, -1, -1):
            w, _ = layers[k]
            grads.append((acts[k].T @ g, g.sum(axis=0)))
            if k > 0:
                g = (g @ w.T) * (1.0 - acts[k] ** 2)
        flat = []
        for gw, gb in reversed(grads):
            flat += [gw.ravel(), gb]
        return np.concatenate(flat)


def _orthogonal(rng, rows, cols):
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q if rows >= cols else q.T


class Adam:
    def __init__(self, size, lr=3e-4, betas=(0.9, 0.999), eps=1e-8):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params, grad):
        """In-place descent step on ``params``."""
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad * grad
        mhat = self.m / (1 - self.b1 ** self.t)
        vhat = self.v / (1 - self.b2 ** self.t)
        params -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
