"""Built-in reference backbone: a small conv -> relu -> maxpool stack with a
global-average-pooled linear head.

Small enough to train on a laptop CPU in minutes yet expressive enough to
memorize a small image set, which is what the end-to-end sanity checks need.
Thanks to the global average pool the same weights work for any input size
that survives three 2x2 poolings (H, W >= 8).
"""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from .. import _kernels as kernels
from ..exceptions import ArgumentError
from ..seeding import rng_for
from .handles import ModelHandle, ParameterInfo

CHANNELS = (16, 32, 64)
KERNEL = 3
PAD = 1
POOL = 2

HEAD_NAMES = ("head.weight", "head.bias")


def _tensor_order(num_blocks: int = len(CHANNELS)) -> list[str]:
    names = []
    for i in range(1, num_blocks + 1):
        names += [f"conv{i}.weight", f"conv{i}.bias"]
    names += list(HEAD_NAMES)
    return names


def init_tensors(num_classes: int, seed: int, dtype=np.float32,
                 in_channels: int = 3) -> dict[str, np.ndarray]:
    """Fresh weights: uniform +-1/sqrt(fan_in), biases zero."""
    rng = rng_for("tiny-cnn-init", seed)
    tensors: dict[str, np.ndarray] = {}
    cin = in_channels
    for i, cout in enumerate(CHANNELS, start=1):
        bound = 1.0 / math.sqrt(cin * KERNEL * KERNEL)
        tensors[f"conv{i}.weight"] = rng.uniform(
            -bound, bound, size=(cout, cin, KERNEL, KERNEL)
        ).astype(dtype)
        tensors[f"conv{i}.bias"] = np.zeros(cout, dtype=dtype)
        cin = cout
    tensors["head.weight"] = init_head_weight(num_classes, CHANNELS[-1], seed, dtype)
    tensors["head.bias"] = np.zeros(num_classes, dtype=dtype)
    return tensors


def init_head_weight(num_classes: int, fan_in: int, seed: int, dtype=np.float32):
    bound = 1.0 / math.sqrt(fan_in)
    rng = rng_for("tiny-cnn-head", seed)
    return rng.uniform(-bound, bound, size=(num_classes, fan_in)).astype(dtype)


class TinyCnnHandle(ModelHandle):
    def __init__(self, arch, num_classes, freeze, tensors, dtype=np.float32):
        super().__init__(arch, num_classes, freeze)
        self.dtype = np.dtype(dtype)
        self._tensors = {k: np.ascontiguousarray(v, dtype=self.dtype)
                         for k, v in tensors.items()}

    @classmethod
    def build(cls, arch, num_classes, freeze, seed=0, dtype=np.float32):
        h, w = arch.input_dims[1], arch.input_dims[2]
        min_side = POOL ** len(CHANNELS)
        if h < min_side or w < min_side:
            raise ArgumentError(
                f"tiny-cnn needs inputs of at least {min_side}x{min_side}, "
                f"got {h}x{w}"
            )
        return cls(arch, num_classes, freeze,
                   init_tensors(num_classes, seed, dtype=dtype))

    # -- structure ---------------------------------------------------------

    def head_parameter_names(self):
        return HEAD_NAMES

    def parameter_inventory(self):
        return [
            ParameterInfo(name, tuple(self._tensors[name].shape),
                          self.is_trainable(name))
            for name in _tensor_order()
        ]

    # -- compute -----------------------------------------------------------

    def _forward_cached(self, x):
        t = self._tensors
        x = np.ascontiguousarray(x, dtype=self.dtype)
        cache = []
        h = x
        for i in range(1, len(CHANNELS) + 1):
            z = kernels.conv2d_forward(h, t[f"conv{i}.weight"], t[f"conv{i}.bias"], PAD)
            r = np.maximum(z, 0)
            p, idx = kernels.maxpool2d_forward(r, POOL)
            cache.append({"input": h, "pre_relu": z, "pool_idx": idx,
                          "relu_shape": r.shape})
            h = p
        feats = h.mean(axis=(2, 3))
        logits = feats @ t["head.weight"].T + t["head.bias"]
        return logits, feats, h.shape, cache

    def forward(self, batch):
        batch = np.asarray(batch)
        self._check_batch(batch)
        logits, _, _, _ = self._forward_cached(batch)
        return logits

    def loss_and_gradients(self, batch, labels):
        batch = np.asarray(batch)
        self._check_batch(batch)
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim != 1 or labels.shape[0] != batch.shape[0]:
            raise ArgumentError("labels must be a vector matching the batch size")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ArgumentError("label outside [0, num_classes)")

        logits, feats, pooled_shape, cache = self._forward_cached(batch)
        n = batch.shape[0]

        # stable log-softmax; dlogits = (softmax - onehot) / B for the mean loss
        shifted = logits - logits.max(axis=1, keepdims=True)
        logsumexp = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        logp = shifted - logsumexp
        loss = float(-logp[np.arange(n), labels].mean())
        dlogits = np.exp(logp)
        dlogits[np.arange(n), labels] -= 1.0
        dlogits /= n
        dlogits = dlogits.astype(self.dtype)

        t = self._tensors
        grads: dict[str, np.ndarray] = {}
        if self.is_trainable("head.weight"):
            grads["head.weight"] = dlogits.T @ feats
            grads["head.bias"] = dlogits.sum(axis=0)

        if any(self.is_trainable(f"conv{i}.weight")
               for i in range(1, len(CHANNELS) + 1)):
            dfeat = dlogits @ t["head.weight"]
            area = pooled_shape[2] * pooled_shape[3]
            g = np.broadcast_to(
                (dfeat / self.dtype.type(area))[:, :, None, None], pooled_shape
            ).astype(self.dtype)
            for i in range(len(CHANNELS), 0, -1):
                layer = cache[i - 1]
                g = kernels.maxpool2d_backward(g, layer["pool_idx"],
                                               layer["relu_shape"], POOL)
                g = g * (layer["pre_relu"] > 0)
                gx, gw, gb = kernels.conv2d_backward(
                    layer["input"], t[f"conv{i}.weight"], g, PAD, need_gx=(i > 1)
                )
                if self.is_trainable(f"conv{i}.weight"):
                    grads[f"conv{i}.weight"] = gw
                    grads[f"conv{i}.bias"] = gb
                g = gx
        return loss, grads

    # -- tensor access -----------------------------------------------------

    def get_tensors(self):
        return {k: v.copy() for k, v in self._tensors.items()}

    def set_tensors(self, tensors: Mapping[str, np.ndarray]):
        for name, value in tensors.items():
            if name not in self._tensors:
                raise ArgumentError(f"unknown tensor {name!r}")
            current = self._tensors[name]
            value = np.asarray(value, dtype=self.dtype)
            if value.shape != current.shape:
                raise ArgumentError(
                    f"tensor {name!r}: shape {value.shape} != {current.shape}"
                )
            self._tensors[name] = np.ascontiguousarray(value.copy())

    def apply_updates(self, deltas: Mapping[str, np.ndarray]):
        for name, delta in deltas.items():
            self._tensors[name] += delta.astype(self.dtype, copy=False)
