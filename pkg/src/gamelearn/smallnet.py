"""Minimal dense networks used by the labs.

Hidden layers are tanh; the output layer is linear followed by one of three
transforms: identity, sigmoid into [0, 1], or a sigmoid rescaled into
[lo, hi].  Dropout is realized as an explicit, seed-derived mask object so
that one drawn mask can be treated as one deterministic function and reused
across many inputs.  Training is plain SGD on (optionally weighted) squared
error with gradients from hand-written backprop.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = ["Net", "DropoutSample", "DivergenceError"]

FORMAT_TAG = "smallnet-v1"
OUTPUT_TRANSFORMS = ("identity", "sigmoid", "affine")


class DivergenceError(RuntimeError):
    """Loss became non-finite; learning rate is too large for the data."""


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True, eq=False)
class DropoutSample:
    """One concrete draw of keep/drop masks, one mask per hidden layer.

    Entries are Bernoulli(1 - dropout_rate) indicators drawn from the
    recorded seed, so the same seed always reproduces the same masks.
    """

    seed: int
    masks: tuple

    @classmethod
    def draw(cls, net: "Net", seed: int) -> "DropoutSample":
        rng = np.random.default_rng(seed)
        keep = 1.0 - net.dropout_rate
        masks = tuple(
            (rng.random(width) < keep).astype(float)
            for width in net.layer_dims[1:-1])
        return cls(seed=int(seed), masks=masks)


class Net:
    """Fully connected tanh network with a fixed output transform."""

    __slots__ = ("layer_dims", "weights", "biases", "output_transform",
                 "out_lo", "out_hi", "dropout_rate")

    def __init__(self, layer_dims, weights, biases, output_transform="identity",
                 out_lo=0.0, out_hi=1.0, dropout_rate=0.0):
        self.layer_dims = tuple(int(d) for d in layer_dims)
        if len(self.layer_dims) < 2 or any(d < 1 for d in self.layer_dims):
            raise ValueError(f"bad layer dims {layer_dims!r}")
        if output_transform not in OUTPUT_TRANSFORMS:
            raise ValueError(f"unknown output transform {output_transform!r}")
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError(f"dropout rate {dropout_rate!r} outside [0, 1)")
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float) for b in biases]
        expect = list(zip(self.layer_dims[1:], self.layer_dims[:-1]))
        got = [w.shape for w in self.weights]
        if got != [tuple(s) for s in expect] or \
                [b.shape for b in self.biases] != [(d,) for d in self.layer_dims[1:]]:
            raise ValueError("weight shapes do not match layer dims")
        self.output_transform = output_transform
        self.out_lo = float(out_lo)
        self.out_hi = float(out_hi)
        if output_transform == "affine" and not self.out_hi > self.out_lo:
            raise ValueError("affine output needs out_hi > out_lo")
        self.dropout_rate = float(dropout_rate)

    @classmethod
    def init(cls, layer_dims, rng, output_transform="identity",
             out_lo=0.0, out_hi=1.0, dropout_rate=0.0) -> "Net":
        """Fresh network with uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) draws."""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(layer_dims, weights, biases, output_transform,
                   out_lo, out_hi, dropout_rate)

    # -- evaluation ----------------------------------------------------

    def _check_sample(self, sample):
        if sample is None:
            return
        widths = tuple(m.shape[0] for m in sample.masks)
        if widths != tuple(self.layer_dims[1:-1]):
            raise ValueError("dropout sample does not match hidden layers")

    def forward(self, x, sample: DropoutSample | None = None):
        """Evaluate on one input of shape (d_in,) or a batch (n, d_in).

        With a dropout sample, surviving hidden units are scaled by
        1 / (1 - dropout_rate) so the expectation over masks matches the
        plain forward pass.
        """
        self._check_sample(sample)
        h = np.asarray(x, dtype=float)
        single = h.ndim == 1
        if single:
            h = h[None, :]
        if h.ndim != 2 or h.shape[1] != self.layer_dims[0]:
            raise ValueError(
                f"input shape {np.shape(x)!r} does not match d_in {self.layer_dims[0]}")
        scale = 1.0 / (1.0 - self.dropout_rate)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            if i < last:
                h = np.tanh(z)
                if sample is not None:
                    h = h * (sample.masks[i] * scale)
            else:
                h = self._transform(z)
        return h[0] if single else h

    def _transform(self, z):
        if self.output_transform == "identity":
            return z
        if self.output_transform == "sigmoid":
            return _sigmoid(z)
        return self.out_lo + (self.out_hi - self.out_lo) * _sigmoid(z)

    # -- training ------------------------------------------------------

    def _stack_batch(self, batch):
        # fast path: a pre-stacked (inputs, targets) array pair
        if isinstance(batch, tuple) and len(batch) == 2:
            xs = np.asarray(batch[0], dtype=float)
            ys = np.asarray(batch[1], dtype=float)
            if xs.ndim == 1:
                xs = xs[:, None]
            if ys.ndim == 1:
                ys = ys[:, None]
            if xs.shape[0] == 0:
                raise ValueError("empty batch")
            return xs, ys
        xs, ys = [], []
        for x, y in batch:
            xs.append(np.atleast_1d(np.asarray(x, dtype=float)))
            ys.append(np.atleast_1d(np.asarray(y, dtype=float)))
        if not xs:
            raise ValueError("empty batch")
        return np.stack(xs), np.stack(ys)

    def loss_and_gradients(self, batch, sample_weights=None,
                           sample: DropoutSample | None = None):
        """Weighted squared-error loss and its parameter gradients.

        The loss is ``sum_i w_i * |f(x_i) - y_i|^2`` with ``w_i`` defaulting
        to 1/n, i.e. the plain batch MSE.
        """
        self._check_sample(sample)
        xs, ys = self._stack_batch(batch)
        n = xs.shape[0]
        if sample_weights is None:
            sw = np.full(n, 1.0 / n)
        else:
            sw = np.asarray(sample_weights, dtype=float)
            if sw.shape != (n,):
                raise ValueError("sample_weights length does not match batch")
        scale = 1.0 / (1.0 - self.dropout_rate)
        last = len(self.weights) - 1

        h = xs
        hiddens = [h]
        z_out = None
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            if i < last:
                h = np.tanh(z)
                if sample is not None:
                    h = h * (sample.masks[i] * scale)
                hiddens.append(h)
            else:
                z_out = z
        if self.output_transform == "identity":
            pred = z_out
            dz = np.ones_like(z_out)
        elif self.output_transform == "sigmoid":
            pred = _sigmoid(z_out)
            dz = pred * (1.0 - pred)
        else:
            sig = _sigmoid(z_out)
            pred = self.out_lo + (self.out_hi - self.out_lo) * sig
            dz = (self.out_hi - self.out_lo) * sig * (1.0 - sig)

        err = pred - ys
        loss = float(np.sum(sw * np.sum(err * err, axis=1)))

        grad_w = [None] * len(self.weights)
        grad_b = [None] * len(self.biases)
        delta = 2.0 * sw[:, None] * err * dz
        for i in range(last, -1, -1):
            grad_w[i] = delta.T @ hiddens[i]
            grad_b[i] = delta.sum(axis=0)
            if i > 0:
                back = delta @ self.weights[i]
                hid = hiddens[i]
                if sample is not None:
                    back = back * (sample.masks[i - 1] * scale)
                    # undo the mask scaling on h before the tanh derivative
                    pre = np.where(sample.masks[i - 1] > 0.0, hid / scale, 0.0)
                    delta = back * (1.0 - pre * pre)
                else:
                    delta = back * (1.0 - hid * hid)
        return loss, grad_w, grad_b

    def train_step(self, batch, learning_rate, sample_weights=None,
                   sample: DropoutSample | None = None) -> float:
        """One SGD step in place; returns the pre-step loss.

        Raises :class:`DivergenceError` when the loss is no longer finite.
        """
        loss, grad_w, grad_b = self.loss_and_gradients(
            batch, sample_weights=sample_weights, sample=sample)
        if not math.isfinite(loss):
            raise DivergenceError("divergence")
        lr = float(learning_rate)
        for w, gw in zip(self.weights, grad_w):
            w -= lr * gw
        for b, gb in zip(self.biases, grad_b):
            b -= lr * gb
        return loss

    # -- parameter plumbing ---------------------------------------------

    def parameter_vector(self):
        return np.concatenate(
            [w.ravel() for w in self.weights] + [b.ravel() for b in self.biases])

    def set_parameter_vector(self, vec) -> None:
        vec = np.asarray(vec, dtype=float)
        if vec.size != self.n_parameters():
            raise ValueError("parameter vector length mismatch")
        offset = 0
        for w in self.weights:
            w[...] = vec[offset:offset + w.size].reshape(w.shape)
            offset += w.size
        for b in self.biases:
            b[...] = vec[offset:offset + b.size]
            offset += b.size

    def n_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_TAG,
            "layer_dims": list(self.layer_dims),
            "output_transform": self.output_transform,
            "out_lo": self.out_lo,
            "out_hi": self.out_hi,
            "dropout_rate": self.dropout_rate,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Net":
        if data.get("format") != FORMAT_TAG:
            raise ValueError(f"unknown net format {data.get('format')!r}")
        return cls(data["layer_dims"], data["weights"], data["biases"],
                   data["output_transform"], data["out_lo"], data["out_hi"],
                   data["dropout_rate"])

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "Net":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def copy(self) -> "Net":
        return Net(self.layer_dims, [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases], self.output_transform,
                   self.out_lo, self.out_hi, self.dropout_rate)
