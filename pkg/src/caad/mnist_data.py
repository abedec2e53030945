"""One-class digit protocol: train on a single benign digit, treat every
other digit as an anomaly at test time.

Reads the standard IDX files (optionally gzipped) from a local directory;
`data/mnist/` in this repo carries them.  Images are rescaled to [0, 1] and
bilinearly resized so the same network geometry serves digits and spectrum
grids.  The result is packaged as a DatasetBundle: all-keep mask, 0..255
normalization stats, and test labels 1 wherever the digit differs from the
benign class.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .errors import EmptyInput
from .spectral_data import DatasetBundle, DenoiseMask, GridSpec, NormStats

FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def _open_idx(path: Path):
    gz = path.with_name(path.name + ".gz")
    if path.exists():
        return open(path, "rb")
    if gz.exists():
        return gzip.open(gz, "rb")
    raise FileNotFoundError(
        f"missing IDX file {path} (or {gz.name}); see README for how to "
        f"fetch the digit dataset")


def load_idx_images(path: Path) -> np.ndarray:
    with _open_idx(path) as fh:
        magic, n, rows, cols = struct.unpack(">IIII", fh.read(16))
        if magic != 2051:
            raise ValueError(f"bad IDX image magic {magic} in {path}")
        data = np.frombuffer(fh.read(n * rows * cols), dtype=np.uint8)
    return data.reshape(n, rows, cols).copy()  # writable for torch


def load_idx_labels(path: Path) -> np.ndarray:
    with _open_idx(path) as fh:
        magic, n = struct.unpack(">II", fh.read(8))
        if magic != 2049:
            raise ValueError(f"bad IDX label magic {magic} in {path}")
        return np.frombuffer(fh.read(n), dtype=np.uint8).copy()


def _resize(images: np.ndarray, size: int) -> np.ndarray:
    x = torch.as_tensor(images, dtype=torch.float32).unsqueeze(1) / 255.0
    if images.shape[-1] != size:
        x = F.interpolate(x, size=(size, size), mode="bilinear",
                          align_corners=False)
    return x.squeeze(1).clamp(0, 1).numpy()


def build_one_class_bundle(data_dir: str | Path, benign_digit: int = 4,
                           n_train: int = 4089, n_val: int = 1753,
                           image_size: int = 32, seed: int = 0
                           ) -> DatasetBundle:
    """Assemble the one-class bundle: benign-digit train/val, full test set."""
    data_dir = Path(data_dir)
    train_x = load_idx_images(data_dir / FILES["train_images"])
    train_y = load_idx_labels(data_dir / FILES["train_labels"])
    test_x = load_idx_images(data_dir / FILES["test_images"])
    test_y = load_idx_labels(data_dir / FILES["test_labels"])

    benign_pool = np.flatnonzero(train_y == benign_digit)
    if len(benign_pool) < n_train + n_val:
        raise EmptyInput(
            f"only {len(benign_pool)} instances of digit {benign_digit}; "
            f"need {n_train + n_val}")
    rng = np.random.default_rng(seed)
    pool = rng.permutation(benign_pool)
    train_idx = np.sort(pool[:n_train])
    val_idx = np.sort(pool[n_train:n_train + n_val])

    train = _resize(train_x[train_idx], image_size)
    val = _resize(train_x[val_idx], image_size)
    test = _resize(test_x, image_size)
    test_labels = (test_y != benign_digit).astype(np.int64)

    spec = GridSpec(n_freq_bins=image_size, n_bw_bins=image_size,
                    freq_range_hz=(0.0, float(image_size)),
                    bw_range_hz=(0.0, float(image_size)), window_s=1.0)
    splits = {"train": train.astype(np.float32),
              "val": val.astype(np.float32),
              "test": test.astype(np.float32)}
    labels = {"train": None, "val": None, "test": test_labels}
    ids = {"train": [f"train-{i:05d}" for i in range(len(train))],
           "val": [f"val-{i:05d}" for i in range(len(val))],
           "test": [f"test-{i:05d}" for i in range(len(test))]}
    manifest = {
        "kind": "one-class-digits",
        "seed": seed,
        "benign_digit": benign_digit,
        "grid_spec": {"n_freq_bins": image_size, "n_bw_bins": image_size,
                      "freq_range_hz": [0.0, float(image_size)],
                      "bw_range_hz": [0.0, float(image_size)],
                      "window_s": 1.0},
        "stats": {"global_min": 0.0, "global_max": 255.0},
        "mask": {"p_thresh": 0.0,
                 "keep": np.ones((image_size, image_size), dtype=int).tolist(),
                 "nonzero_prob": np.ones((image_size, image_size)).tolist()},
        "splits": {k: {"count": len(v)} for k, v in splits.items()},
        "counts": {
            "test_benign": int((test_labels == 0).sum()),
            "test_anomaly": int((test_labels == 1).sum()),
        },
    }
    mask = DenoiseMask(np.ones((image_size, image_size), dtype=bool), 0.0,
                       np.ones((image_size, image_size)))
    return DatasetBundle(splits, labels, ids, NormStats(0.0, 255.0), mask,
                         spec, manifest)
