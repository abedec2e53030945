"""Anomaly scoring and threshold calibration.

Training grids are clustered (one cluster by default, so the centroid is the
mean grid) and the centroids embedded once by the critic in eval mode.  A test
embedding's score is its cosine distance to the centroid embeddings, reduced
over centroids by max (min is exposed as the conventional alternative; with a
single centroid they coincide).  The decision threshold is the strictness
quantile of benign validation scores, and a score must strictly exceed it to
be called an anomaly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from .errors import ConfigError, EmptyInput, NormError
from .nets import Critic

EMB_NORM_TOL = 1e-4


@dataclass
class CentroidBank:
    m: int
    centroids: np.ndarray             # (m, H, W) in grid space
    centroid_embeddings: np.ndarray   # (m, D), unit-norm, frozen-critic eval


@dataclass
class ThresholdCalibration:
    threshold: float
    strictness: float
    n_val: int
    histogram: tuple[list[int], list[float]]  # counts, bin edges
    m: int = 1                                # centroid count used for scores

    def to_json(self) -> dict:
        return {"threshold": self.threshold, "strictness": self.strictness,
                "n_val": self.n_val, "m": self.m,
                "histogram": {"counts": self.histogram[0],
                              "edges": self.histogram[1]}}

    @classmethod
    def from_json(cls, d: dict) -> "ThresholdCalibration":
        return cls(d["threshold"], d["strictness"], d["n_val"],
                   (d["histogram"]["counts"], d["histogram"]["edges"]),
                   d.get("m", 1))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True))

    @classmethod
    def load(cls, path):
        return cls.from_json(json.loads(Path(path).read_text()))


def _kmeans(flat: np.ndarray, m: int, seed: int,
            n_iter: int = 100) -> np.ndarray:
    """Plain Lloyd's iterations with k-means++ style seeding."""
    rng = np.random.default_rng(seed)
    # k-means++ initialization
    centers = [flat[rng.integers(len(flat))]]
    for _ in range(m - 1):
        d2 = np.min([((flat - c) ** 2).sum(axis=1) for c in centers], axis=0)
        probs = d2 / d2.sum() if d2.sum() > 0 else np.full(len(flat), 1 / len(flat))
        centers.append(flat[rng.choice(len(flat), p=probs)])
    centers = np.stack(centers)
    for _ in range(n_iter):
        assign = ((flat[:, None, :] - centers[None]) ** 2).sum(-1).argmin(1)
        new = np.stack([flat[assign == j].mean(axis=0)
                        if (assign == j).any() else centers[j]
                        for j in range(m)])
        if np.allclose(new, centers):
            break
        centers = new
    return centers


def fit_centroids(train_grids: np.ndarray, m: int, critic: Critic,
                  seed: int = 0) -> CentroidBank:
    """Cluster the training grids and embed the centroids with the critic in
    eval mode (dropout off)."""
    if m < 1:
        raise ConfigError("m must be >= 1")
    if m > len(train_grids):
        raise ConfigError(f"m={m} exceeds {len(train_grids)} training grids")
    h, w = train_grids.shape[1:]
    if m == 1:
        centroids = train_grids.mean(axis=0, keepdims=True)
    else:
        flat = train_grids.reshape(len(train_grids), -1).astype(np.float64)
        centroids = _kmeans(flat, m, seed).reshape(m, h, w)
    critic.eval()
    with torch.no_grad():
        _, emb = critic(torch.as_tensor(centroids, dtype=torch.float32),
                        dropout_active=False)
    return CentroidBank(m=m, centroids=centroids.astype(np.float32),
                        centroid_embeddings=emb.numpy())


def anomaly_score(embedding: np.ndarray, bank: CentroidBank,
                  agg: str = "max") -> float:
    """Cosine distance (1 - similarity) to the centroid embeddings, aggregated
    over centroids (max by default; min gives nearest-centroid distance)."""
    return float(score_batch(embedding[None, :], bank, agg)[0])


def score_batch(embeddings: np.ndarray, bank: CentroidBank,
                agg: str = "max") -> np.ndarray:
    norms = np.linalg.norm(embeddings, axis=-1)
    if not np.allclose(norms, 1.0, atol=EMB_NORM_TOL):
        raise NormError("anomaly_score expects unit-norm embeddings")
    dists = 1.0 - embeddings @ bank.centroid_embeddings.T   # (N, m)
    if agg == "max":
        return dists.max(axis=1)
    if agg == "min":
        return dists.min(axis=1)
    raise ConfigError(f"unknown centroid aggregation: {agg}")


def calibrate_threshold(val_scores: np.ndarray,
                        strictness: float = 0.99) -> ThresholdCalibration:
    """Nearest-rank strictness quantile of the benign validation scores."""
    if len(val_scores) == 0:
        raise EmptyInput("no validation scores")
    if not (0.0 < strictness <= 1.0):
        raise ConfigError("strictness must be in (0, 1]")
    ordered = np.sort(np.asarray(val_scores, dtype=np.float64))
    rank = max(1, math.ceil(strictness * len(ordered)))
    theta = float(ordered[rank - 1])
    counts, edges = np.histogram(ordered, bins=min(50, len(ordered)))
    return ThresholdCalibration(threshold=theta, strictness=strictness,
                                n_val=len(ordered),
                                histogram=(counts.tolist(), edges.tolist()))


def classify(score: float, threshold: float) -> int:
    """1 (anomaly) iff the score strictly exceeds the threshold."""
    return int(score > threshold)
