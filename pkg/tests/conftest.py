"""Shared fixtures: toy model shapes, synthetic blob datasets, and the
optional real-data gate used by the dataset-dependent tests."""

import os
from pathlib import Path

import numpy as np
import pytest

from qspike.data import Dataset
from qspike.model import ModelConfig


def real_data_dir() -> Path | None:
    """Directory holding real IDX datasets, if one is available.

    Checked in order: $QSPIKE_DATA_DIR, then ./data next to the repo root.
    Tests that need the official datasets skip when this returns None.
    """
    env = os.environ.get("QSPIKE_DATA_DIR")
    candidates = [Path(env)] if env else []
    candidates.append(Path(__file__).resolve().parent.parent / "data")
    for c in candidates:
        if c.is_dir():
            return c
    return None


def require_dataset(dataset: str, split: str) -> Path:
    """Skip the calling test unless the named IDX pair exists."""
    from qspike.data import resolve_idx_paths
    root = real_data_dir()
    if root is None:
        pytest.skip("no dataset directory (set QSPIKE_DATA_DIR or create ./data)")
    try:
        resolve_idx_paths(root, dataset, split)
    except FileNotFoundError:
        pytest.skip(f"{dataset}/{split} IDX files not present under {root}")
    return root


@pytest.fixture
def toy_config() -> ModelConfig:
    """Smallest end-to-end shape: 4 pixels, 3 spiking units, 2 features,
    2 qubits, 1 layer, 2 classes."""
    return ModelConfig(in_dim=4, hidden_dim=3, feature_dim=2, n_qubits=2,
                       n_layers=1, n_classes=2, T=4, dt=1.0)


def blob_dataset(n: int, seed: int, side: int = 28, n_classes: int = 4,
                 label_base: int = 0) -> Dataset:
    """Synthetic separable images: class c lights up quadrant c."""
    rng = np.random.default_rng(seed)
    half = side // 2
    imgs = np.zeros((n, side, side))
    labels = rng.integers(0, n_classes, n)
    for i, c in enumerate(labels):
        r0, c0 = (c // 2) * half, (c % 2) * half
        imgs[i, r0:r0 + half, c0:c0 + half] = rng.uniform(0.6, 1.0, (half, half))
        imgs[i] += rng.uniform(0.0, 0.1, (side, side))
    return Dataset(np.clip(imgs, 0.0, 1.0).reshape(n, side * side),
                   labels + label_base)
