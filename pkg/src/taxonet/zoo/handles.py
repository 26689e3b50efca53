"""Uniform facade over a built network.

A handle exposes just enough surface for the training loop, the evaluator
and the checkpoint writer: a forward pass, fused loss+gradients over the
trainable tensors, and named access to every learnable tensor.  Gradients
and tensors cross the boundary as plain numpy arrays, so one optimizer
implementation serves every backbone provider.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..exceptions import ArgumentError


@dataclass(frozen=True)
class ParameterInfo:
    name: str
    shape: tuple[int, ...]
    trainable: bool


class ModelHandle(ABC):
    """Opaque reference to a built network plus its parameter inventory."""

    def __init__(self, arch, num_classes: int, freeze):
        self.arch = arch
        self.num_classes = num_classes
        self.freeze = freeze

    # -- structure ---------------------------------------------------------

    @abstractmethod
    def head_parameter_names(self) -> tuple[str, ...]:
        """Names of the final class-producing layer's tensors."""

    @abstractmethod
    def parameter_inventory(self) -> list[ParameterInfo]:
        """Every learnable tensor exactly once, with its trainable flag."""

    def trainable_parameter_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parameter_inventory() if p.trainable)

    def is_trainable(self, name: str) -> bool:
        if self.freeze.mode == "train_all":
            return True
        return name in self.head_parameter_names()

    # -- compute -----------------------------------------------------------

    @abstractmethod
    def forward(self, batch: np.ndarray) -> np.ndarray:
        """Logits of shape (B, num_classes) for a (B, C, H, W) batch."""

    @abstractmethod
    def loss_and_gradients(
        self, batch: np.ndarray, labels: np.ndarray
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Mean cross-entropy plus gradients for the trainable tensors only."""

    # -- tensor access -----------------------------------------------------

    @abstractmethod
    def get_tensors(self) -> dict[str, np.ndarray]:
        """Copies of every stateful tensor (learnable plus any buffers)."""

    @abstractmethod
    def set_tensors(self, tensors: Mapping[str, np.ndarray]) -> None:
        """Overwrite named tensors; shapes must match exactly."""

    @abstractmethod
    def apply_updates(self, deltas: Mapping[str, np.ndarray]) -> None:
        """In-place ``tensor += delta`` for each named delta."""

    # -- shared helpers ------------------------------------------------------

    def _check_batch(self, batch: np.ndarray) -> None:
        expected = tuple(self.arch.input_dims)
        if batch.ndim != 4 or tuple(batch.shape[1:]) != expected:
            raise ArgumentError(
                f"expected batch of shape (B, {', '.join(map(str, expected))}), "
                f"got {tuple(batch.shape)}"
            )
