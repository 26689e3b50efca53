"""Backbone registry, freeze policy, weight initialization, model handles."""

from .handles import ModelHandle, ParameterInfo
from .registry import (
    DEFAULT_INPUT_DIMS,
    FREEZE_ALL_BUT_LAST,
    SCRATCH,
    TRAIN_ALL,
    ArchitectureSpec,
    FreezePolicy,
    WeightInit,
    build_model,
    is_available,
    list_architectures,
    registered_names,
    spec,
)
from .tinycnn import TinyCnnHandle

__all__ = [
    "ArchitectureSpec",
    "DEFAULT_INPUT_DIMS",
    "FREEZE_ALL_BUT_LAST",
    "FreezePolicy",
    "ModelHandle",
    "ParameterInfo",
    "SCRATCH",
    "TRAIN_ALL",
    "TinyCnnHandle",
    "WeightInit",
    "build_model",
    "is_available",
    "list_architectures",
    "registered_names",
    "spec",
]
