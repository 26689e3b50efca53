"""Dataset curation: deterministic stratified splitting, class-count pruning,
and the fixed-size image preprocessing contract.
"""

from __future__ import annotations

import dataclasses
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as kernels
from .exceptions import ArgumentError, DataError, FormatError, ValidationError
from .manifest import DatasetManifest, write_manifest
from .seeding import rng_for

SPLIT_FORMAT = "taxonet-split"
SPLIT_VERSION = 1


@dataclass(frozen=True)
class SplitAssignment:
    """Seeded train/validation membership for every image in a manifest."""

    train_ids: frozenset[str]
    val_ids: frozenset[str]
    seed: int
    train_fraction: float

    def to_json_bytes(self) -> bytes:
        payload = {
            "format": SPLIT_FORMAT,
            "version": SPLIT_VERSION,
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "num_train": len(self.train_ids),
            "num_val": len(self.val_ids),
            "train_ids": sorted(self.train_ids),
            "val_ids": sorted(self.val_ids),
        }
        return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode("utf-8")

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_json_bytes())


def load_split(path) -> SplitAssignment:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read split file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid split file: {exc}") from exc
    if obj.get("format") != SPLIT_FORMAT:
        raise FormatError(f"{path}: not a split file")
    train = frozenset(obj["train_ids"])
    val = frozenset(obj["val_ids"])
    if train & val:
        raise ValidationError(f"{path}: train and validation ids overlap")
    return SplitAssignment(
        train_ids=train,
        val_ids=val,
        seed=int(obj["seed"]),
        train_fraction=float(obj["train_fraction"]),
    )


@dataclass(frozen=True)
class PruneReport:
    """Audit record of one class-count prune over the train side."""

    threshold: int
    removed_class_ids: tuple[int, ...]
    removed_image_count: int
    retained_image_count: int


@dataclass(frozen=True)
class PreprocessSpec:
    """Target size and per-channel normalization for model input tensors."""

    target_height: int = 224
    target_width: int = 224
    normalize_mean: tuple[float, float, float] = (0.0, 0.0, 0.0)
    normalize_std: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.target_height < 1 or self.target_width < 1:
            raise ArgumentError("preprocess target dimensions must be positive")
        if len(self.normalize_mean) != 3 or len(self.normalize_std) != 3:
            raise ArgumentError("normalize_mean/std must have 3 channel entries")
        if any(s <= 0 for s in self.normalize_std):
            raise ArgumentError("normalize_std components must be positive")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(m: DatasetManifest, train_fraction: float, seed: int) -> SplitAssignment:
    """Stratified per-class 2-way split.

    Within each class the (canonically sorted) image ids are shuffled by a
    generator keyed on (seed, class_id); the first round(fraction * n) go to
    train and the remainder to validation, keeping at least one validation
    record whenever the class has two or more.  The result depends only on
    manifest contents, seed and fraction -- not on record order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ArgumentError(f"train_fraction must be in (0, 1), got {train_fraction}")
    by_class: dict[int, list[str]] = defaultdict(list)
    for r in m.records:
        by_class[r.class_id].append(r.image_id)
    missing = [c for c in range(m.num_classes) if not by_class.get(c)]
    if missing:
        raise ValidationError(
            f"{len(missing)} classes have no records (first: {missing[:5]}); "
            "every class needs at least one image to split"
        )

    train: list[str] = []
    val: list[str] = []
    for class_id in range(m.num_classes):
        ids = sorted(by_class[class_id])
        n = len(ids)
        perm = rng_for("split", seed, class_id).permutation(n)
        n_train = _round_half_up(train_fraction * n)
        if n >= 2:
            n_train = min(n_train, n - 1)
        for pos, idx in enumerate(perm):
            (train if pos < n_train else val).append(ids[idx])
    return SplitAssignment(
        train_ids=frozenset(train),
        val_ids=frozenset(val),
        seed=seed,
        train_fraction=train_fraction,
    )


def _check_split_covers(m: DatasetManifest, s: SplitAssignment) -> None:
    known = s.train_ids | s.val_ids
    for r in m.records:
        if r.image_id not in known:
            raise DataError(
                f"image {r.image_id!r} is missing from the split assignment"
            )


def prune_by_class_count(
    m: DatasetManifest,
    split_assignment: SplitAssignment,
    threshold: int,
    drop_classes: bool = False,
) -> tuple[DatasetManifest, PruneReport]:
    """Remove all train-side records of classes with train count < threshold.

    Validation records are never touched.  By default the label space is left
    intact (the classifier head keeps every class); with ``drop_classes`` the
    pruned classes are additionally removed from the label space, their
    validation records dropped, and the surviving classes re-indexed
    contiguously.
    """
    if threshold < 1:
        raise ArgumentError(f"threshold must be >= 1, got {threshold}")
    _check_split_covers(m, split_assignment)

    train_ids = split_assignment.train_ids
    train_counts = m.class_counts(ids=set(train_ids))
    removed_classes = tuple(
        int(c) for c in range(m.num_classes) if train_counts[c] < threshold
    )
    removed_set = set(removed_classes)

    removed_images = 0
    kept_records = []
    for r in m.records:
        is_train = r.image_id in train_ids
        if is_train and r.class_id in removed_set:
            removed_images += 1
            continue
        if drop_classes and r.class_id in removed_set:
            continue  # validation record of a dropped class
        kept_records.append(r)

    train_total = int(train_counts.sum())
    report = PruneReport(
        threshold=threshold,
        removed_class_ids=removed_classes,
        removed_image_count=removed_images,
        retained_image_count=train_total - removed_images,
    )

    if not drop_classes:
        curated = DatasetManifest(
            records=tuple(kept_records),
            num_classes=m.num_classes,
            class_names=m.class_names,
            categories=m.categories,
        )
        return curated, report

    surviving = [c for c in range(m.num_classes) if c not in removed_set]
    remap = {old: new for new, old in enumerate(surviving)}
    remapped = tuple(
        dataclasses.replace(r, class_id=remap[r.class_id]) for r in kept_records
    )
    curated = DatasetManifest(
        records=remapped,
        num_classes=len(surviving),
        class_names=tuple(m.class_names[c] for c in surviving),
        categories=m.categories,
    )
    return curated, report


def write_prune_report(report: PruneReport, path) -> None:
    """Flat key/value report file (JSON object)."""
    payload = {
        "threshold": report.threshold,
        "removed_class_count": len(report.removed_class_ids),
        "removed_class_ids": list(report.removed_class_ids),
        "removed_image_count": report.removed_image_count,
        "retained_image_count": report.retained_image_count,
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_prune_csv(m: DatasetManifest, split_assignment: SplitAssignment,
                    report: PruneReport, path) -> None:
    """Per-class audit CSV: class_id,train_count,removed."""
    train_counts = m.class_counts(ids=set(split_assignment.train_ids))
    removed = set(report.removed_class_ids)
    lines = ["class_id,train_count,removed"]
    for c in range(m.num_classes):
        lines.append(f"{c},{int(train_counts[c])},{int(c in removed)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_curated_manifest(curated: DatasetManifest, path) -> None:
    write_manifest(curated, path)


def preprocess_image(raw, spec: PreprocessSpec) -> np.ndarray:
    """Raw H x W x 3 pixels -> float32 3 x target_h x target_w feature array.

    Bilinear resize straight to the target size (aspect ratio is not
    preserved), pixel values scaled to [0, 1], then per-channel
    (v - mean) / std normalization.
    """
    arr = np.asarray(raw)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise FormatError(
            f"expected an H x W x 3 pixel array, got shape {arr.shape}"
        )
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise FormatError("image has empty spatial dimensions")
    img = arr.astype(np.float32, copy=False)
    if img.shape[:2] != (spec.target_height, spec.target_width):
        img = kernels.bilinear_resize(img, spec.target_height, spec.target_width)
    img = img / np.float32(255.0)
    mean = np.asarray(spec.normalize_mean, dtype=np.float32)
    std = np.asarray(spec.normalize_std, dtype=np.float32)
    img = (img - mean) / std
    return np.ascontiguousarray(img.transpose(2, 0, 1))
