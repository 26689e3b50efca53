"""Published CNN backbones behind the optional torch/torchvision provider.

The registry reports these architectures as unavailable when the provider
is not importable; nothing here is imported unless a build is requested.
Modules run in inference mode permanently: dropout is inert and batch-norm
uses its stored statistics even while the trainable tensors are optimized,
which keeps every run deterministic on CPU.
"""

from __future__ import annotations

import importlib.util
from typing import Mapping

import numpy as np

from ..exceptions import ArgumentError, RegistryError
from ..seeding import derive_seed
from .handles import ModelHandle, ParameterInfo

# registry name -> (torchvision constructor, head submodule prefix)
TV_BUILDERS = {
    "alexnet": ("alexnet", "classifier.6"),
    "densenet": ("densenet121", "classifier"),
    "squeezenet": ("squeezenet1_1", "classifier.1"),
    "shufflenet": ("shufflenet_v2_x1_0", "fc"),
    "resnext": ("resnext50_32x4d", "fc"),
}


def provider_available() -> bool:
    return (importlib.util.find_spec("torch") is not None
            and importlib.util.find_spec("torchvision") is not None)


def build_torch_handle(arch, num_classes, freeze, seed=0):
    if not provider_available():
        raise RegistryError(
            f"architecture {arch.name!r} needs the torch/torchvision provider, "
            "which is not installed (pip install torch torchvision)"
        )
    import torch
    from torchvision import models as tv_models

    ctor_name, head_prefix = TV_BUILDERS[arch.name]
    torch.manual_seed(derive_seed("torch-init", arch.name, seed) % (2 ** 63))
    module = getattr(tv_models, ctor_name)(num_classes=num_classes)
    module.eval()
    return TorchBackboneHandle(arch, num_classes, freeze, module, head_prefix)


class TorchBackboneHandle(ModelHandle):
    def __init__(self, arch, num_classes, freeze, module, head_prefix: str):
        super().__init__(arch, num_classes, freeze)
        import torch

        self._torch = torch
        self._module = module
        self._head_prefix = head_prefix + "."
        for name, param in module.named_parameters():
            param.requires_grad_(self.is_trainable(name))

    # -- structure ---------------------------------------------------------

    def head_parameter_names(self):
        return tuple(
            name for name, _ in self._module.named_parameters()
            if name.startswith(self._head_prefix)
        )

    def is_trainable(self, name):
        if self.freeze.mode == "train_all":
            return True
        return name.startswith(self._head_prefix)

    def parameter_inventory(self):
        return [
            ParameterInfo(name, tuple(p.shape), self.is_trainable(name))
            for name, p in self._module.named_parameters()
        ]

    # -- compute -----------------------------------------------------------

    def _to_tensor(self, batch):
        self._check_batch(batch)
        return self._torch.from_numpy(
            np.ascontiguousarray(batch, dtype=np.float32)
        )

    def forward(self, batch):
        batch = np.asarray(batch)
        x = self._to_tensor(batch)
        with self._torch.no_grad():
            logits = self._module(x)
        return logits.numpy()

    def loss_and_gradients(self, batch, labels):
        torch = self._torch
        batch = np.asarray(batch)
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim != 1 or labels.shape[0] != batch.shape[0]:
            raise ArgumentError("labels must be a vector matching the batch size")
        x = self._to_tensor(batch)
        y = torch.from_numpy(labels)
        self._module.zero_grad(set_to_none=True)
        with torch.enable_grad():
            logits = self._module(x)
            loss = torch.nn.functional.cross_entropy(logits, y)
            loss.backward()
        grads = {
            name: p.grad.detach().numpy().copy()
            for name, p in self._module.named_parameters()
            if p.grad is not None
        }
        self._module.zero_grad(set_to_none=True)
        return float(loss.item()), grads

    # -- tensor access -----------------------------------------------------

    def get_tensors(self):
        return {
            name: tensor.detach().numpy().copy()
            for name, tensor in self._module.state_dict().items()
        }

    def set_tensors(self, tensors: Mapping[str, np.ndarray]):
        torch = self._torch
        state = self._module.state_dict()
        for name, value in tensors.items():
            if name not in state:
                raise ArgumentError(f"unknown tensor {name!r}")
            target = state[name]
            value = np.asarray(value)
            if tuple(value.shape) != tuple(target.shape):
                raise ArgumentError(
                    f"tensor {name!r}: shape {tuple(value.shape)} != {tuple(target.shape)}"
                )
            state[name] = torch.from_numpy(
                np.ascontiguousarray(value)
            ).to(dtype=target.dtype)
        self._module.load_state_dict(state)

    def apply_updates(self, deltas: Mapping[str, np.ndarray]):
        torch = self._torch
        params = dict(self._module.named_parameters())
        with torch.no_grad():
            for name, delta in deltas.items():
                params[name].add_(torch.from_numpy(
                    np.ascontiguousarray(delta, dtype=np.float32)
                ))
