"""Backbone registry: architecture specs, weight-initialization modes, and
the layer-freeze policy used for transfer-learning runs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..exceptions import ArgumentError, RegistryError, WeightLoadError
from ..tensormap import read_tensor_map
from ..exceptions import FormatError
from . import torch_backbones
from .handles import ModelHandle
from .tinycnn import TinyCnnHandle, init_head_weight

DEFAULT_INPUT_DIMS = (3, 224, 224)

FREEZE_MODES = ("train_all", "freeze_all_but_last")
INIT_MODES = ("scratch", "pretrained")


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    input_dims: tuple[int, int, int] = DEFAULT_INPUT_DIMS
    structural_descriptor: str = ""

    def __post_init__(self):
        if self.name not in _DESCRIPTORS:
            raise RegistryError(
                f"unknown architecture {self.name!r}; "
                f"registered: {', '.join(sorted(_DESCRIPTORS))}"
            )
        dims = tuple(int(d) for d in self.input_dims)
        if len(dims) != 3 or dims[0] != 3 or dims[1] < 1 or dims[2] < 1:
            raise ArgumentError(f"input_dims must be (3, H, W), got {self.input_dims}")
        object.__setattr__(self, "input_dims", dims)
        if not self.structural_descriptor:
            object.__setattr__(self, "structural_descriptor", _DESCRIPTORS[self.name])


@dataclass(frozen=True)
class FreezePolicy:
    """Which parameters the optimizer may update."""

    mode: str = "train_all"

    def __post_init__(self):
        if self.mode not in FREEZE_MODES:
            raise ArgumentError(
                f"freeze mode must be one of {FREEZE_MODES}, got {self.mode!r}"
            )


TRAIN_ALL = FreezePolicy("train_all")
FREEZE_ALL_BUT_LAST = FreezePolicy("freeze_all_but_last")


@dataclass(frozen=True)
class WeightInit:
    """Scratch vs pretrained initialization, with the tensor-map source."""

    mode: str = "scratch"
    weight_source: str | None = None

    def __post_init__(self):
        if self.mode not in INIT_MODES:
            raise ArgumentError(
                f"init mode must be one of {INIT_MODES}, got {self.mode!r}"
            )
        if self.mode == "pretrained" and not self.weight_source:
            raise ArgumentError("pretrained initialization requires a weight_source")


SCRATCH = WeightInit("scratch")

_DESCRIPTORS = {
    "tiny-cnn": "3 blocks of 3x3 conv + relu + 2x2 maxpool (16/32/64 channels), "
                "global average pool, linear head (built in)",
    "alexnet": "classic 5-conv / 3-fc ImageNet CNN (torchvision alexnet)",
    "densenet": "densely connected conv blocks with transition layers "
                "(torchvision densenet121)",
    "squeezenet": "fire modules built on 1x1 squeeze convolutions, "
                  "convolutional classifier (torchvision squeezenet1_1)",
    "shufflenet": "pointwise group convolutions with channel shuffle "
                  "(torchvision shufflenet_v2_x1_0)",
    "resnext": "residual network with grouped split-transform-merge blocks "
               "(torchvision resnext50_32x4d)",
}


def registered_names() -> tuple[str, ...]:
    return tuple(_DESCRIPTORS)


def is_available(name: str) -> bool:
    if name not in _DESCRIPTORS:
        return False
    if name == "tiny-cnn":
        return True
    return torch_backbones.provider_available()


def list_architectures() -> list[dict]:
    """Rows for `zoo list`: name, structural summary, availability."""
    return [
        {"name": name, "descriptor": desc, "available": is_available(name)}
        for name, desc in _DESCRIPTORS.items()
    ]


def spec(name: str, input_dims=DEFAULT_INPUT_DIMS) -> ArchitectureSpec:
    return ArchitectureSpec(name=name, input_dims=tuple(input_dims))


def build_model(arch, num_classes: int, init: WeightInit = SCRATCH,
                freeze: FreezePolicy = TRAIN_ALL, seed: int = 0) -> ModelHandle:
    """Construct a network emitting ``num_classes`` logits.

    Under ``freeze_all_but_last`` only the classifier head's tensors are
    marked trainable.  Pretrained initialization loads every non-head tensor
    by name from the weight source; head tensors are kept only when their
    class dimension already matches ``num_classes`` and are freshly
    re-initialized otherwise.
    """
    if isinstance(arch, str):
        arch = spec(arch)
    if num_classes < 2:
        raise ArgumentError(f"num_classes must be >= 2, got {num_classes}")

    if init.mode == "scratch" and freeze.mode == "freeze_all_but_last":
        warnings.warn(
            "freeze_all_but_last with scratch initialization trains a fresh head "
            "on top of frozen random features; this is almost certainly unintended",
            UserWarning,
            stacklevel=2,
        )

    if arch.name == "tiny-cnn":
        handle = TinyCnnHandle.build(arch, num_classes, freeze, seed=seed)
    else:
        handle = torch_backbones.build_torch_handle(arch, num_classes, freeze,
                                                    seed=seed)

    if init.mode == "pretrained":
        _load_pretrained(handle, arch, init.weight_source, seed)
    return handle


def _class_axis_matches(shape: tuple[int, ...], num_classes: int) -> bool:
    # Heads emit one value per class; the class axis is the leading one for
    # both linear (C, F) and conv (C, F, kh, kw) classifier tensors, and the
    # only one for biases.
    return len(shape) >= 1 and shape[0] == num_classes


def _load_pretrained(handle: ModelHandle, arch, source, seed: int) -> None:
    path = Path(source)
    if not path.exists():
        raise WeightLoadError(f"weight source {path} does not exist")
    try:
        tensors, meta = read_tensor_map(path)
    except FormatError as exc:
        raise WeightLoadError(str(exc)) from exc
    source_arch = meta.get("arch")
    if source_arch is not None and source_arch != arch.name:
        raise WeightLoadError(
            f"weight source was saved for arch {source_arch!r}, not {arch.name!r}"
        )
    # Checkpoints prefix model tensors; accept either layout.
    prefixed = {k[len("model/"):]: v for k, v in tensors.items()
                if k.startswith("model/")}
    if prefixed:
        tensors = prefixed

    head_names = set(handle.head_parameter_names())
    current = handle.get_tensors()
    updates: dict[str, np.ndarray] = {}
    for name, value in current.items():
        if name in head_names:
            incoming = tensors.get(name)
            if incoming is not None and tuple(incoming.shape) == tuple(value.shape) \
                    and _class_axis_matches(incoming.shape, handle.num_classes):
                updates[name] = incoming
            continue  # otherwise keep the fresh head for this class count
        if name not in tensors:
            raise WeightLoadError(f"weight source is missing tensor {name!r}")
        if tuple(tensors[name].shape) != tuple(value.shape):
            raise WeightLoadError(
                f"tensor {name!r}: source shape {tuple(tensors[name].shape)} "
                f"does not match model shape {tuple(value.shape)}"
            )
        updates[name] = tensors[name]
    handle.set_tensors(updates)
