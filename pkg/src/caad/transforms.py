"""Negative transformations: corrupt benign grids into synthetic anomalies.

The corrupted twins get label 1 and the originals label 0, which is what lets
a contrastive loss run on otherwise unlabeled benign data.  Salt noise is the
default for spectrum grids; quarter-turn rotations are used for digit images.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EmptyInput, ShapeError, ZeroSalt


@dataclass(frozen=True)
class TransformConfig:
    kind: str = "salt_noise"          # salt_noise | rot90
    salt_fraction: float = 0.05
    salt_value: float = 1.0
    rot_choices: tuple[int, ...] = (1, 2, 3)  # quarter turns
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("salt_noise", "rot90"):
            raise ValueError(f"unknown transform kind: {self.kind}")
        if not (0.0 < self.salt_fraction < 1.0):
            raise ValueError("salt_fraction must be in (0, 1)")
        if self.kind == "rot90":
            if not self.rot_choices:
                raise ValueError("rot_choices must be non-empty")
            if any(k not in (1, 2, 3) for k in self.rot_choices):
                raise ValueError("rot_choices must be quarter turns 1..3")


def salt_noise(grid: np.ndarray, cfg: TransformConfig,
               rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Set exactly floor(salt_fraction * n_pixels) distinct uniformly chosen
    pixels to salt_value; everything else is untouched."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    n_pixels = grid.size
    n_salt = int(cfg.salt_fraction * n_pixels)
    if n_salt == 0:
        raise ZeroSalt(
            f"salt_fraction {cfg.salt_fraction} yields 0 pixels on a "
            f"{grid.shape} grid")
    flat_idx = rng.choice(n_pixels, size=n_salt, replace=False)
    out = grid.copy()
    out.reshape(-1)[flat_idx] = cfg.salt_value
    return out


def rot90(image: np.ndarray, k: int) -> np.ndarray:
    """Counterclockwise quarter-turn rotation, k in {1, 2, 3}."""
    if image.shape[-2] != image.shape[-1]:
        raise ShapeError(f"rot90 needs a square image, got {image.shape}")
    if k not in (1, 2, 3):
        raise ValueError(f"k must be in {{1,2,3}}, got {k}")
    return np.rot90(image, k, axes=(-2, -1)).copy()


def apply_negative(batch: np.ndarray, cfg: TransformConfig,
                   rng: Optional[np.random.Generator] = None
                   ) -> tuple[np.ndarray, Optional[list[int]]]:
    """Transform a (N, H, W) batch instance by instance.

    Returns the corrupted batch and, for rotations, the per-instance quarter
    turn that was drawn (None for salt noise).
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if batch.ndim != 3:
        raise ShapeError(f"expected (N, H, W) batch, got {batch.shape}")
    out = np.empty_like(batch)
    if cfg.kind == "salt_noise":
        for i in range(len(batch)):
            out[i] = salt_noise(batch[i], cfg, rng)
        return out, None
    ks = [int(rng.choice(cfg.rot_choices)) for _ in range(len(batch))]
    for i, k in enumerate(ks):
        out[i] = rot90(batch[i], k)
    return out, ks


@dataclass
class SelfSupSet:
    """Benign grids plus their corrupted twins, labeled 0/1 with pairing."""

    values: np.ndarray        # (2N, H, W)
    labels: np.ndarray        # (2N,), first N zeros then N ones
    source_index: np.ndarray  # (2N,), anomaly i points at its benign source
    rot_log: Optional[list[int]] = None


def build_selfsup_set(benign_grids: np.ndarray, cfg: TransformConfig,
                      rng: Optional[np.random.Generator] = None) -> SelfSupSet:
    """Assemble the class-balanced labeled set {benign: 0, transformed: 1}."""
    if len(benign_grids) == 0:
        raise EmptyInput("no benign grids to transform")
    transformed, ks = apply_negative(benign_grids, cfg, rng)
    n = len(benign_grids)
    values = np.concatenate([benign_grids, transformed])
    labels = np.concatenate([np.zeros(n, dtype=np.int64),
                             np.ones(n, dtype=np.int64)])
    source = np.concatenate([np.arange(n), np.arange(n)])
    return SelfSupSet(values, labels, source, rot_log=ks)
