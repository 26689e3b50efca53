"""Image loading and order-stable batched prefetching.

Native image format is ``.npy`` (H x W x 3 uint8), which the bundled
synthetic generator emits; PNG/JPEG work too when Pillow is installed.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .curation import PreprocessSpec, preprocess_image
from .exceptions import DataError, FormatError
from .manifest import DatasetManifest


def read_image(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"image file {path} does not exist")
    if path.suffix == ".npy":
        try:
            return np.load(path)
        except (OSError, ValueError) as exc:
            raise FormatError(f"cannot load {path}: {exc}") from exc
    try:
        from PIL import Image
    except ImportError as exc:
        raise DataError(
            f"{path}: reading {path.suffix} files requires Pillow "
            "(pip install Pillow)"
        ) from exc
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


class BatchLoader:
    """Loads and preprocesses batches of images by image_id.

    With ``workers > 1`` decoding/preprocessing runs in a thread pool; the
    returned batch always follows the requested id order.
    """

    def __init__(self, manifest: DatasetManifest, preprocess: PreprocessSpec,
                 root, workers: int = 1):
        self._records = manifest.record_by_id()
        self._preprocess = preprocess
        self._root = Path(root)
        self._pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def label_of(self, image_id: str) -> int:
        return self._records[image_id].class_id

    def _load_one(self, image_id: str) -> np.ndarray:
        record = self._records.get(image_id)
        if record is None:
            raise DataError(f"image_id {image_id!r} is not in the manifest")
        raw = read_image(self._root / record.path)
        return preprocess_image(raw, self._preprocess)

    def load_features(self, image_ids) -> np.ndarray:
        ids = list(image_ids)
        if self._pool is not None:
            features = list(self._pool.map(self._load_one, ids))
        else:
            features = [self._load_one(i) for i in ids]
        return np.stack(features, axis=0)

    def load_batch(self, image_ids) -> tuple[np.ndarray, np.ndarray]:
        ids = list(image_ids)
        x = self.load_features(ids)
        y = np.asarray([self.label_of(i) for i in ids], dtype=np.int64)
        return x, y

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
