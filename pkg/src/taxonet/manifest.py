"""Dataset manifest ingestion and per-class distribution statistics.

A manifest is a UTF-8 JSON-lines file: one header object declaring
``num_classes``, ``class_names`` and ``categories``, then one flat record
object per image with keys ``image_id``, ``path``, ``class_id``,
``class_name``, ``category``, ``width_px``, ``height_px``.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .exceptions import ArgumentError, FormatError, ValidationError

_RECORD_KEYS = ("image_id", "path", "class_id", "class_name", "category",
                "width_px", "height_px")


@dataclass(frozen=True)
class ImageRecord:
    """One image entry: identity, label, coarse category, optional pixel dims."""

    image_id: str
    path: str
    class_id: int
    class_name: str
    category: str
    width_px: int = 0
    height_px: int = 0


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[ImageRecord, ...]
    num_classes: int
    class_names: tuple[str, ...]
    categories: tuple[str, ...]

    def __post_init__(self):
        _validate_manifest(self)

    def image_ids(self) -> tuple[str, ...]:
        return tuple(r.image_id for r in self.records)

    def record_by_id(self) -> dict[str, ImageRecord]:
        return {r.image_id: r for r in self.records}

    def class_counts(self, ids: set[str] | None = None) -> np.ndarray:
        """Per-class record counts (length num_classes, zeros included).

        When ``ids`` is given only records with those image_ids are counted.
        """
        counts = np.zeros(self.num_classes, dtype=np.int64)
        for r in self.records:
            if ids is None or r.image_id in ids:
                counts[r.class_id] += 1
        return counts


@dataclass(frozen=True)
class ClassDistribution:
    """Summary statistics over images-per-class counts."""

    counts: dict[int, int]
    max: int
    min: int
    median: float
    std: float


def _validate_manifest(m: DatasetManifest) -> None:
    if m.num_classes < 1:
        raise ValidationError("manifest declares no classes (num_classes < 1)")
    if len(m.class_names) != m.num_classes:
        raise ValidationError(
            f"class_names has {len(m.class_names)} entries, expected {m.num_classes}"
        )
    dup_names = [n for n, k in Counter(m.class_names).items() if k > 1]
    if dup_names:
        raise ValidationError(f"duplicate class names: {dup_names[:5]}")
    if not m.categories:
        raise ValidationError("manifest declares no categories")
    category_set = set(m.categories)
    seen_ids: set[str] = set()
    for r in m.records:
        if not 0 <= r.class_id < m.num_classes:
            raise ValidationError(
                f"record {r.image_id!r}: class_id {r.class_id} outside [0, {m.num_classes})"
            )
        if r.class_name != m.class_names[r.class_id]:
            raise ValidationError(
                f"record {r.image_id!r}: class_name {r.class_name!r} does not match "
                f"declared name {m.class_names[r.class_id]!r} for class {r.class_id}"
            )
        if r.category not in category_set:
            raise ValidationError(
                f"record {r.image_id!r}: category {r.category!r} not in declared set"
            )
        if r.image_id in seen_ids:
            raise ValidationError(f"duplicate image_id {r.image_id!r}")
        seen_ids.add(r.image_id)
        if r.width_px < 0 or r.height_px < 0:
            raise ValidationError(f"record {r.image_id!r}: negative pixel dimensions")


def _parse_header(line: str) -> tuple[int, tuple[str, ...], tuple[str, ...]]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line 1: invalid header: {exc}") from exc
    try:
        return (
            int(obj["num_classes"]),
            tuple(str(n) for n in obj["class_names"]),
            tuple(str(c) for c in obj["categories"]),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"line 1: header missing field: {exc}") from exc


def _parse_record(line: str, lineno: int) -> ImageRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line {lineno}: invalid record: {exc}") from exc
    if not isinstance(obj, dict):
        raise FormatError(f"line {lineno}: record is not a key/value object")
    try:
        return ImageRecord(
            image_id=str(obj["image_id"]),
            path=str(obj["path"]),
            class_id=int(obj["class_id"]),
            class_name=str(obj["class_name"]),
            category=str(obj["category"]),
            width_px=int(obj.get("width_px", 0)),
            height_px=int(obj.get("height_px", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"line {lineno}: bad record field: {exc}") from exc


def load_manifest(source) -> DatasetManifest:
    """Read and validate a manifest file, preserving record order."""
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read manifest {path}: {exc}") from exc

    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise FormatError(f"{path}: empty file, expected a header line")
    num_classes, class_names, categories = _parse_header(lines[0])
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        records.append(_parse_record(line, lineno))
    return DatasetManifest(
        records=tuple(records),
        num_classes=num_classes,
        class_names=class_names,
        categories=categories,
    )


def write_manifest(m: DatasetManifest, path) -> None:
    """Emit a manifest in the line-delimited format read by load_manifest."""
    path = Path(path)
    out = [json.dumps(
        {"num_classes": m.num_classes,
         "class_names": list(m.class_names),
         "categories": list(m.categories)},
        separators=(",", ":"),
    )]
    for r in m.records:
        out.append(json.dumps(
            {k: getattr(r, k) for k in _RECORD_KEYS}, separators=(",", ":")
        ))
    path.write_text("\n".join(out) + "\n", encoding="utf-8")


def compute_class_distribution(m: DatasetManifest) -> ClassDistribution:
    """Images-per-class statistics; classes without records count as 0.

    ``std`` is the sample standard deviation (divisor C-1), defined as 0.0
    for a single class.  The median of an even-length count list is the mean
    of the two middle values.
    """
    if not m.records:
        raise ArgumentError("manifest has no records")
    counts = m.class_counts()
    std = float(counts.std(ddof=1)) if m.num_classes > 1 else 0.0
    return ClassDistribution(
        counts={c: int(n) for c, n in enumerate(counts)},
        max=int(counts.max()),
        min=int(counts.min()),
        median=float(np.median(counts)),
        std=std,
    )


def export_histogram(d: ClassDistribution, bin_width: int) -> dict[int, int]:
    """Histogram of class counts in left-closed right-open bins [lo, lo+w).

    Only non-empty bins are returned; values sum to the number of classes.
    """
    if bin_width < 1:
        raise ArgumentError("bin_width must be >= 1")
    hist: Counter[int] = Counter()
    for count in d.counts.values():
        hist[(count // bin_width) * bin_width] += 1
    return dict(sorted(hist.items()))


def write_histogram_csv(hist: dict[int, int], path) -> None:
    lines = ["bin_lower,class_count"]
    lines += [f"{lo},{n}" for lo, n in sorted(hist.items())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def iter_class_ids(m: DatasetManifest) -> Iterable[int]:
    return range(m.num_classes)
