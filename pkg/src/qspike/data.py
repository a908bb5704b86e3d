"""IDX-format dataset ingestion, class filtering, and k-fold split plans.

IDX is the MNIST container: big-endian magic (0x803 images, 0x801 labels),
dimension words, then raw uint8 payload. Gzipped files are detected by
their two-byte signature. Pixels load as float64 in [0, 1].
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

# Class subsets the benchmark uses by default: four digits for MNIST,
# Sneaker / Ankle boot / Bag / Shirt for FashionMNIST (published label
# order: 7, 9, 8, 6), first four classes for KMNIST.
DEFAULT_CLASSES = {
    "mnist": (6, 7, 8, 9),
    "fashion": (7, 9, 8, 6),
    "kmnist": (0, 1, 2, 3),
}

_SPLIT_NAMES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class IdxFormatError(ValueError):
    """Malformed IDX content: bad magic, truncation, or count mismatch."""


@dataclass
class Dataset:
    images: np.ndarray  # (N, D) float64 in [0, 1]
    labels: np.ndarray  # (N,) int64
    name: str = ""

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 2 or self.labels.shape != (self.images.shape[0],):
            raise ValueError(
                f"images {self.images.shape} and labels {self.labels.shape} disagree")
        if self.labels.size and self.labels.min() < 0:
            raise ValueError("labels must be nonnegative")

    def __len__(self) -> int:
        return self.images.shape[0]


def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _read_header(raw: bytes, n_words: int, path) -> tuple[int, ...]:
    need = 4 * n_words
    if len(raw) < need:
        raise IdxFormatError(f"{path}: truncated header")
    return struct.unpack(f">{n_words}l", raw[:need])


def load_idx(images_path, labels_path, name: str = "") -> Dataset:
    """Load an image/label IDX pair into a flat-pixel Dataset."""
    raw = _read_bytes(images_path)
    magic, count, rows, cols = _read_header(raw, 4, images_path)
    if magic != IMAGE_MAGIC:
        raise IdxFormatError(
            f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}")
    body = raw[16:]
    if len(body) != count * rows * cols:
        raise IdxFormatError(
            f"{images_path}: payload {len(body)} bytes, expected {count * rows * cols}")
    images = np.frombuffer(body, dtype=np.uint8).reshape(count, rows * cols)

    raw = _read_bytes(labels_path)
    magic, n_labels = _read_header(raw, 2, labels_path)
    if magic != LABEL_MAGIC:
        raise IdxFormatError(
            f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}")
    body = raw[8:]
    if len(body) != n_labels:
        raise IdxFormatError(
            f"{labels_path}: payload {len(body)} bytes, expected {n_labels}")
    if n_labels != count:
        raise IdxFormatError(
            f"{labels_path}: {n_labels} labels for {count} images")
    labels = np.frombuffer(body, dtype=np.uint8)
    return Dataset(images / 255.0, labels, name=name)


def write_idx(ds: Dataset, images_path, labels_path,
              image_shape: tuple[int, int] | None = None) -> None:
    """Write a Dataset back out as an IDX pair (inverse of load_idx)."""
    n, d = ds.images.shape
    if image_shape is None:
        side = int(round(np.sqrt(d)))
        if side * side != d:
            raise ValueError(f"cannot infer square image shape from {d} pixels")
        image_shape = (side, side)
    rows, cols = image_shape
    if rows * cols != d:
        raise ValueError(f"image shape {image_shape} does not hold {d} pixels")
    pixels = np.rint(ds.images * 255.0).astype(np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">4l", IMAGE_MAGIC, n, rows, cols))
        f.write(pixels.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">2l", LABEL_MAGIC, n))
        f.write(ds.labels.astype(np.uint8).tobytes())


def filter_classes(ds: Dataset, keep, allow_empty: bool = False) -> Dataset:
    """Keep only the listed classes, relabelled to 0..len(keep)-1 in the
    given order; sample order is preserved."""
    keep = list(keep)
    if not keep:
        raise ValueError("keep must name at least one class")
    if len(set(keep)) != len(keep):
        raise ValueError("keep contains duplicate classes")
    present = set(np.unique(ds.labels).tolist())
    missing = [c for c in keep if c not in present]
    if missing and not allow_empty:
        raise ValueError(f"classes {missing} absent from dataset {ds.name!r}")
    relabel = {c: i for i, c in enumerate(keep)}
    mask = np.isin(ds.labels, keep)
    if not mask.any() and not allow_empty:
        raise ValueError("no samples match the requested classes")
    labels = np.array([relabel[int(c)] for c in ds.labels[mask]], dtype=np.int64)
    return Dataset(ds.images[mask], labels, name=ds.name)


@dataclass
class FoldPlan:
    k: int
    assignments: np.ndarray  # (N,) fold index per sample

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments, dtype=np.int64)

    def val_indices(self, fold: int) -> np.ndarray:
        self._check(fold)
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        self._check(fold)
        return np.flatnonzero(self.assignments != fold)

    def _check(self, fold: int) -> None:
        if not 0 <= fold < self.k:
            raise IndexError(f"fold {fold} out of range for k={self.k}")


def kfold_splits(n: int, k: int, seed) -> FoldPlan:
    """Seeded shuffle then round-robin: fold sizes differ by at most one."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise ValueError(f"cannot split {n} samples into {k} folds")
    order = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[order] = np.arange(n) % k
    return FoldPlan(k=k, assignments=assignments)


def resolve_idx_paths(data_dir, dataset: str, split: str) -> tuple[Path, Path]:
    """Locate the IDX pair for a dataset/split under data_dir.

    Looks in data_dir/<dataset>/ then data_dir/ itself, accepting the
    standard names with or without .gz.
    """
    if split not in _SPLIT_NAMES:
        raise ValueError(f"split must be one of {tuple(_SPLIT_NAMES)}")
    img_name, lbl_name = _SPLIT_NAMES[split]
    base = Path(data_dir)
    tried = []
    for folder in (base / dataset, base):
        for suffix in ("", ".gz"):
            img = folder / (img_name + suffix)
            lbl = folder / (lbl_name + suffix)
            if img.exists() and lbl.exists():
                return img, lbl
            tried.append(str(img))
    raise FileNotFoundError(
        f"no {dataset}/{split} IDX pair under {base}; tried {tried}")


def load_dataset(data_dir, dataset: str, split: str) -> Dataset:
    img, lbl = resolve_idx_paths(data_dir, dataset, split)
    return load_idx(img, lbl, name=f"{dataset}-{split}")
