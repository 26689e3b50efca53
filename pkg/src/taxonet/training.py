"""Cross-entropy optimization with momentum SGD, plus history emission and
bit-exact checkpoint/resume.

The optimizer is plain gradient descent with momentum,

    v <- momentum * v + g
    theta <- theta - lr * v,

applied only to tensors the freeze policy marks trainable.  Each epoch's
batch order comes from a generator keyed on (seed, epoch), so resuming from
a checkpoint replays exactly the batches an uninterrupted run would have
seen.  Runs are deterministic in single-worker mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .curation import PreprocessSpec, SplitAssignment
from .dataio import BatchLoader
from .exceptions import (
    ArgumentError,
    CheckpointError,
    ConfigError,
    FormatError,
    NumericError,
)
from .manifest import DatasetManifest
from .seeding import derive_seed, rng_for
from .tensormap import read_tensor_map, write_tensor_map
from .zoo import (
    ArchitectureSpec,
    FreezePolicy,
    ModelHandle,
    SCRATCH,
    TRAIN_ALL,
    WeightInit,
    build_model,
    spec as arch_spec,
)

CHECKPOINT_FORMAT = "taxonet-checkpoint"
CHECKPOINT_VERSION = 1
HISTORY_HEADER = "epoch,train_loss,val_loss,val_top1_error"


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------

def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable log-softmax along the last axis."""
    x = np.asarray(logits)
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def cross_entropy(logits, label: int) -> float:
    """-log softmax(logits)[label], computed via the log-sum-exp form.

    Finite for any finite logits; adding a constant to every logit leaves
    the value unchanged up to rounding.
    """
    x = np.asarray(logits, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ArgumentError("logits must be a vector of length >= 2")
    if not np.isfinite(x).all():
        raise NumericError("non-finite logit passed to cross_entropy")
    label = int(label)
    if not 0 <= label < x.size:
        raise ArgumentError(f"label {label} outside [0, {x.size})")
    m = x.max()
    lse = m + math.log(np.exp(x - m).sum())
    return float(lse - x[label])


def batch_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-example cross-entropy for a (B, C) logit array."""
    logits = np.asarray(logits)
    labels = np.asarray(labels, dtype=np.int64)
    logp = log_softmax(logits.astype(np.float64))
    return -logp[np.arange(labels.shape[0]), labels]


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

class MomentumSgd:
    """Gradient descent with momentum over named numpy tensors."""

    def __init__(self, learning_rate: float, momentum: float = 0.0,
                 velocities: dict[str, np.ndarray] | None = None):
        if learning_rate < 0:
            raise ArgumentError("learning_rate must be >= 0")
        if not 0.0 <= momentum < 1.0:
            raise ArgumentError("momentum must be in [0, 1)")
        self.learning_rate = float(learning_rate)
        self.momentum = float(momentum)
        self.velocities: dict[str, np.ndarray] = dict(velocities or {})

    def step(self, model: ModelHandle, grads: Mapping[str, np.ndarray]) -> None:
        deltas = {}
        for name in sorted(grads):
            g = grads[name]
            v = self.velocities.get(name)
            v = g.copy() if v is None else self.momentum * v + g
            self.velocities[name] = v
            deltas[name] = -self.learning_rate * v
        model.apply_updates(deltas)


def train_step(model: ModelHandle, inputs, labels, optimizer: MomentumSgd) -> float:
    """One optimization step; returns the pre-update batch mean loss."""
    loss, grads = model.loss_and_gradients(inputs, labels)
    if not math.isfinite(loss):
        raise NumericError(
            f"non-finite training loss ({loss}) on a batch of size {len(labels)}"
        )
    optimizer.step(model, grads)
    return loss


# ---------------------------------------------------------------------------
# config / metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    arch: ArchitectureSpec
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    freeze: FreezePolicy = TRAIN_ALL
    init: WeightInit = SCRATCH

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must be in [0, 1)")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    val_loss: float
    val_top1_error: float

    def csv_row(self) -> str:
        return (f"{self.epoch},{self.train_loss!r},{self.val_loss!r},"
                f"{self.val_top1_error!r}")


def append_history(path, metrics: EpochMetrics) -> None:
    path = Path(path)
    if not path.exists():
        path.write_text(HISTORY_HEADER + "\n", encoding="utf-8")
    with path.open("a", encoding="utf-8") as fh:
        fh.write(metrics.csv_row() + "\n")


def read_history(path) -> list[EpochMetrics]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != HISTORY_HEADER:
        raise FormatError(f"{path}: not a history file")
    out = []
    for line in lines[1:]:
        epoch, train_loss, val_loss, val_err = line.split(",")
        out.append(EpochMetrics(int(epoch), float(train_loss),
                                float(val_loss), float(val_err)))
    return out


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------

def save_checkpoint(path, model: ModelHandle, optimizer: MomentumSgd,
                    completed_epochs: int, preprocess: PreprocessSpec,
                    extra_meta: dict | None = None) -> None:
    """Model tensors + optimizer velocities + enough metadata to rebuild."""
    tensors: dict[str, np.ndarray] = {}
    for name, value in model.get_tensors().items():
        tensors[f"model/{name}"] = value
    for name, value in optimizer.velocities.items():
        tensors[f"optimizer/velocity/{name}"] = value
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "arch": model.arch.name,
        "input_dims": list(model.arch.input_dims),
        "num_classes": model.num_classes,
        "freeze": model.freeze.mode,
        "completed_epochs": int(completed_epochs),
        "learning_rate": optimizer.learning_rate,
        "momentum": optimizer.momentum,
        "normalize_mean": list(preprocess.normalize_mean),
        "normalize_std": list(preprocess.normalize_std),
        "target_height": preprocess.target_height,
        "target_width": preprocess.target_width,
    }
    if extra_meta:
        meta.update(extra_meta)
    write_tensor_map(path, tensors, meta)


def load_checkpoint(path) -> tuple[ModelHandle, MomentumSgd, int, dict]:
    """Rebuild (model, optimizer, completed_epochs, metadata) from a file."""
    try:
        tensors, meta = read_tensor_map(path)
    except FormatError as exc:
        raise CheckpointError(str(exc)) from exc
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {meta.get('version')} "
            f"not supported (expected {CHECKPOINT_VERSION})"
        )
    arch = arch_spec(meta["arch"], input_dims=tuple(meta["input_dims"]))
    model = build_model(
        arch,
        int(meta["num_classes"]),
        init=SCRATCH,
        freeze=FreezePolicy(meta["freeze"]),
        seed=0,
    )
    model_tensors = {k[len("model/"):]: v for k, v in tensors.items()
                     if k.startswith("model/")}
    expected = set(model.get_tensors())
    missing = expected - set(model_tensors)
    if missing:
        raise CheckpointError(
            f"{path}: checkpoint is missing model tensors: {sorted(missing)[:5]}"
        )
    model.set_tensors(model_tensors)
    velocities = {k[len("optimizer/velocity/"):]: v for k, v in tensors.items()
                  if k.startswith("optimizer/velocity/")}
    optimizer = MomentumSgd(
        learning_rate=float(meta.get("learning_rate", 0.01)),
        momentum=float(meta.get("momentum", 0.0)),
        velocities=velocities,
    )
    return model, optimizer, int(meta["completed_epochs"]), meta


def checkpoint_preprocess_spec(meta: dict) -> PreprocessSpec:
    return PreprocessSpec(
        target_height=int(meta["target_height"]),
        target_width=int(meta["target_width"]),
        normalize_mean=tuple(meta["normalize_mean"]),
        normalize_std=tuple(meta["normalize_std"]),
    )


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _batched(ids: Sequence[str], batch_size: int):
    for start in range(0, len(ids), batch_size):
        yield ids[start:start + batch_size]


def _evaluate_split(model: ModelHandle, loader: BatchLoader,
                    ids: Sequence[str], batch_size: int) -> tuple[float, float]:
    """(mean cross-entropy, top-1 error) over the given image ids."""
    total_loss = 0.0
    wrong = 0
    for chunk in _batched(ids, batch_size):
        x, y = loader.load_batch(chunk)
        logits = model.forward(x)
        if not np.isfinite(logits).all():
            raise NumericError("non-finite logits during validation pass")
        total_loss += float(batch_cross_entropy(logits, y).sum())
        # ties resolve to the lowest class id, matching the evaluator
        pred = np.argmax(logits, axis=1)
        wrong += int((pred != y).sum())
    n = len(ids)
    return total_loss / n, wrong / n


def fit(
    config: TrainConfig,
    manifest: DatasetManifest,
    split_assignment: SplitAssignment,
    preprocess: PreprocessSpec,
    data_root,
    out_dir=None,
    workers: int = 1,
    resume_from=None,
) -> tuple[ModelHandle, list[EpochMetrics]]:
    """Run the full train/validate loop.

    Per epoch: a seeded reshuffle of the train ids (keyed on seed and epoch
    number), one momentum-SGD pass, then a validation pass.  When ``out_dir``
    is given, per-epoch metrics are appended to ``history.csv`` and the
    last/best-validation-loss checkpoints are written there.
    """
    present = set(manifest.image_ids())
    train_ids = sorted(split_assignment.train_ids & present)
    val_ids = sorted(split_assignment.val_ids & present)
    if not train_ids:
        raise ConfigError("train split is empty")
    if not val_ids:
        raise ConfigError("validation split is empty")

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    start_epoch = 0
    best_val_loss = math.inf
    if resume_from is not None:
        model, optimizer, start_epoch, meta = load_checkpoint(resume_from)
        if model.arch.name != config.arch.name:
            raise CheckpointError(
                f"checkpoint arch {model.arch.name!r} does not match "
                f"configured arch {config.arch.name!r}"
            )
        if model.num_classes != manifest.num_classes:
            raise CheckpointError(
                f"checkpoint has {model.num_classes} classes, "
                f"manifest has {manifest.num_classes}"
            )
        best_val_loss = float(meta.get("best_val_loss", math.inf))
        optimizer.learning_rate = config.learning_rate
        optimizer.momentum = config.momentum
    else:
        model = build_model(
            config.arch,
            manifest.num_classes,
            init=config.init,
            freeze=config.freeze,
            seed=derive_seed("model-init", config.seed),
        )
        optimizer = MomentumSgd(config.learning_rate, config.momentum)

    history: list[EpochMetrics] = []
    with BatchLoader(manifest, preprocess, data_root, workers=workers) as loader:
        for epoch in range(start_epoch + 1, config.epochs + 1):
            perm = rng_for("epoch-shuffle", config.seed, epoch).permutation(
                len(train_ids)
            )
            ordered = [train_ids[i] for i in perm]
            batch_losses = []
            for batch_no, chunk in enumerate(_batched(ordered, config.batch_size)):
                x, y = loader.load_batch(chunk)
                try:
                    batch_losses.append(train_step(model, x, y, optimizer))
                except NumericError as exc:
                    raise NumericError(
                        f"epoch {epoch}, batch {batch_no}: {exc}"
                    ) from exc
            train_loss = float(np.mean(batch_losses))
            val_loss, val_err = _evaluate_split(
                model, loader, val_ids, config.batch_size
            )
            metrics = EpochMetrics(epoch, train_loss, val_loss, val_err)
            history.append(metrics)

            if out_path is not None:
                append_history(out_path / "history.csv", metrics)
                if val_loss < best_val_loss:
                    best_val_loss = val_loss
                    save_checkpoint(
                        out_path / "checkpoint_best.tmap", model, optimizer,
                        epoch, preprocess,
                        extra_meta={"best_val_loss": best_val_loss},
                    )
                save_checkpoint(
                    out_path / "checkpoint_last.tmap", model, optimizer,
                    epoch, preprocess,
                    extra_meta={"best_val_loss": best_val_loss},
                )
            else:
                best_val_loss = min(best_val_loss, val_loss)
    return model, history
