"""Monte-Carlo-dropout inference: stochastic embeddings, vote-based
uncertainty, and selection of the most uncertain instances for expert review.

Each instance gets k stochastic forward passes with dropout active.  Every
pass is scored and thresholded independently; the disagreement between the k
binary votes is the uncertainty (0 = unanimous, 0.5 = split), and 1 minus it
is reported as certainty.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import torch

from .errors import ConfigError, EmptyInput
from .nets import Critic, l2_normalize


@dataclass
class MCEmbeddingSet:
    """k stochastic embeddings of one instance and their renormalized mean."""

    samples: np.ndarray   # (k, D), each row unit-norm
    mean: np.ndarray      # (D,), unit-norm
    k: int
    seed: int


@dataclass
class UncertaintyRecord:
    instance_id: str
    votes: tuple[int, int]     # (benign count, anomaly count), sums to k
    uncertainty: float         # 1 - majority fraction, in [0, 0.5]
    certainty: float           # 1 - uncertainty
    prediction: int            # majority class; ties predict anomaly
    score: float               # anomaly score of the mean embedding


def mc_embed(model: Critic, x: torch.Tensor, k: int = 10,
             seed: int = 0) -> MCEmbeddingSet:
    """Draw k dropout-perturbed embeddings of a single instance."""
    samples, means = mc_embed_batch(model, x.unsqueeze(0), k, seed)
    return MCEmbeddingSet(samples=samples[:, 0], mean=means[0], k=k, seed=seed)


CHUNK = 2048  # keep activation memory bounded on large splits


def _embed_chunked(model: Critic, xs: torch.Tensor,
                   dropout_active: bool) -> torch.Tensor:
    outs = []
    with torch.no_grad():
        for start in range(0, len(xs), CHUNK):
            _, emb = model(xs[start:start + CHUNK],
                           dropout_active=dropout_active)
            outs.append(emb)
    return torch.cat(outs)


def mc_embed_batch(model: Critic, xs: torch.Tensor, k: int = 10,
                   seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """k stochastic passes over a whole batch.

    Returns (samples (k, N, D), means (N, D)); the mean embedding is the
    L2-renormalized arithmetic mean of the k samples.
    """
    if k < 2:
        raise ConfigError(f"MC sampling needs k >= 2, got {k}")
    torch.manual_seed(seed)  # dropout masks are drawn from the global stream
    samples = torch.stack([_embed_chunked(model, xs, dropout_active=True)
                           for _ in range(k)])        # (k, N, D)
    means = l2_normalize(samples.mean(dim=0))
    return samples.numpy(), means.numpy()


def vote_and_score(mc_set: MCEmbeddingSet,
                   scorer: Callable[[np.ndarray], float],
                   threshold: float,
                   instance_id: str = "") -> UncertaintyRecord:
    """Threshold every MC sample's score into a vote and summarize."""
    votes_anom = sum(1 for s in mc_set.samples
                     if scorer(s) > threshold)
    return _record_from_votes(instance_id, mc_set.k - votes_anom, votes_anom,
                              score=float(scorer(mc_set.mean)))


def _record_from_votes(instance_id: str, u_benign: int, u_anom: int,
                       score: float) -> UncertaintyRecord:
    k = u_benign + u_anom
    uncertainty = 1.0 - max(u_benign, u_anom) / k
    prediction = 1 if u_anom >= u_benign else 0  # tie goes to anomaly
    return UncertaintyRecord(instance_id=instance_id,
                             votes=(u_benign, u_anom),
                             uncertainty=uncertainty,
                             certainty=1.0 - uncertainty,
                             prediction=prediction, score=score)


def infer_with_uncertainty(model: Critic, xs: torch.Tensor,
                           ids: Sequence[str],
                           batch_scorer: Callable[[np.ndarray], np.ndarray],
                           threshold: float, k: int = 10, seed: int = 0,
                           mc_dropout: bool = True) -> list[UncertaintyRecord]:
    """Score a full split with MC-dropout voting.

    With mc_dropout=False (the no-UQ ablation) a single deterministic pass is
    used; every vote then agrees and uncertainty collapses to 0.
    """
    model.eval()
    if not mc_dropout:
        emb = _embed_chunked(model, xs, dropout_active=False)
        scores = batch_scorer(emb.numpy())
        out = []
        for i, inst in enumerate(ids):
            anom = int(scores[i] > threshold)
            out.append(_record_from_votes(inst, (1 - anom) * k, anom * k,
                                          score=float(scores[i])))
        return out

    samples, means = mc_embed_batch(model, xs, k, seed)
    mean_scores = batch_scorer(means)
    votes_anom = np.zeros(len(ids), dtype=int)
    for j in range(k):
        votes_anom += (batch_scorer(samples[j]) > threshold).astype(int)
    return [_record_from_votes(inst, k - int(votes_anom[i]),
                               int(votes_anom[i]), float(mean_scores[i]))
            for i, inst in enumerate(ids)]


def select_hil(records: Sequence[UncertaintyRecord],
               h_percent: float) -> list[str]:
    """Ids of the ceil(h% * N) most uncertain records, uncertainty-descending
    with ties broken by instance id."""
    if not records:
        raise EmptyInput("no inference records to select from")
    n = math.ceil(h_percent / 100.0 * len(records))
    ranked = sorted(records, key=lambda r: (-r.uncertainty, r.instance_id))
    return [r.instance_id for r in ranked[:n]]


# -- JSON-lines inference report --------------------------------------------

def write_report(records: Sequence[UncertaintyRecord], path: str | Path):
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(asdict(r), sort_keys=True) + "\n")


def read_report(path: str | Path) -> list[UncertaintyRecord]:
    out = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        d["votes"] = tuple(d["votes"])
        out.append(UncertaintyRecord(**d))
    return out
