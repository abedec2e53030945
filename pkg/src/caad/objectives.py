"""Loss functions for adversarial + contrastive training and feedback retraining.

Sign conventions are fixed here once: the critic maximizes the Wasserstein
objective (mean real score minus mean fake score), so its training loss is
the negation plus the gradient penalty plus the weighted contrastive term.
The contrastive losses are exact double sums over anchors and their positive
sets; anchors with an empty positive set contribute zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import torch

from .errors import EmptyBatch, NormError, NumericalError
from .nets import interpolate_samples

NORM_TOL = 1e-4


@dataclass(frozen=True)
class LossConfig:
    gp_weight: float = 10.0          # gradient-penalty strictness
    contrastive_weight: float = 1.0
    temperature: float = 0.07
    hil_anom_weight: float = 1.0     # pull expert anomalies together, away from train
    hil_benign_weight: float = 1.0   # pull expert benigns together, away from corrupted twins
    hil_separation_weight: float = 1.0  # separate expert benigns from expert anomalies
    recon_weight: float = 0.0        # optional generator reconstruction term

    def __post_init__(self):
        if self.gp_weight < 0:
            raise ValueError("gp_weight must be >= 0")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        for w in (self.contrastive_weight, self.hil_anom_weight,
                  self.hil_benign_weight, self.hil_separation_weight,
                  self.recon_weight):
            if w < 0:
                raise ValueError("loss weights must be >= 0")


def _check_nonempty(t: torch.Tensor, name: str):
    if t.numel() == 0:
        raise EmptyBatch(f"{name} is empty")


def wasserstein_critic_objective(real_scores: torch.Tensor,
                                 fake_scores: torch.Tensor) -> torch.Tensor:
    """Mean real score minus mean fake score; the critic maximizes this."""
    _check_nonempty(real_scores, "real_scores")
    _check_nonempty(fake_scores, "fake_scores")
    return real_scores.mean() - fake_scores.mean()


def gradient_penalty(critic_scores: Callable[[torch.Tensor], torch.Tensor],
                     real_batch: torch.Tensor, fake_batch: torch.Tensor,
                     weight: float,
                     generator: torch.Generator | None = None) -> torch.Tensor:
    """Penalize the critic's input-gradient norm deviating from 1 at points
    interpolated between real and fake samples."""
    if weight == 0:
        return real_batch.new_zeros(())
    mixed = interpolate_samples(real_batch.detach(), fake_batch.detach(),
                                generator)
    mixed.requires_grad_(True)
    scores = critic_scores(mixed)
    grads = torch.autograd.grad(outputs=scores.sum(), inputs=mixed,
                                create_graph=True)[0]
    if not torch.isfinite(grads).all():
        raise NumericalError("non-finite critic input gradients")
    norms = grads.flatten(1).norm(2, dim=1)
    return weight * ((norms - 1.0) ** 2).mean()


def _check_normalized(embeddings: torch.Tensor):
    norms = embeddings.norm(dim=-1)
    if not torch.allclose(norms, torch.ones_like(norms), atol=NORM_TOL):
        worst = (norms - 1.0).abs().max().item()
        raise NormError(f"embeddings not unit-norm (max deviation {worst:.2e})")


def _anchor_log_probs(embeddings: torch.Tensor, labels: torch.Tensor,
                      temperature: float) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-anchor mean log-probability over its positive set, plus the count
    of positives.  Anchors without positives get 0."""
    n = embeddings.shape[0]
    sim = embeddings @ embeddings.T / temperature
    self_mask = torch.eye(n, dtype=torch.bool, device=embeddings.device)
    sim = sim.masked_fill(self_mask, float("-inf"))
    log_denom = torch.logsumexp(sim, dim=1)                  # over Q(i)
    pos_mask = (labels.view(-1, 1) == labels.view(1, -1)) & ~self_mask
    n_pos = pos_mask.sum(dim=1)
    log_prob = sim - log_denom.view(-1, 1)
    pos_sum = (log_prob.masked_fill(~pos_mask, 0.0)).sum(dim=1)
    mean_log_prob = torch.where(n_pos > 0, pos_sum / n_pos.clamp_min(1),
                                torch.zeros_like(pos_sum))
    return mean_log_prob, n_pos


def supcon_loss(embeddings: torch.Tensor, labels: torch.Tensor,
                temperature: float) -> torch.Tensor:
    """Supervised contrastive loss summed over every anchor in the batch."""
    _check_nonempty(embeddings, "embeddings")
    if embeddings.shape[0] < 2:
        raise EmptyBatch("contrastive loss needs a batch of at least 2")
    _check_normalized(embeddings)
    mean_log_prob, _ = _anchor_log_probs(embeddings, labels, temperature)
    return -mean_log_prob.sum()


def supclass_loss(embeddings: torch.Tensor, labels: torch.Tensor, c: int,
                  temperature: float) -> torch.Tensor:
    """Contrastive loss with the anchor set restricted to class c; the
    denominators still range over the whole batch."""
    _check_nonempty(embeddings, "embeddings")
    if embeddings.shape[0] < 2:
        return embeddings.new_zeros(())
    _check_normalized(embeddings)
    mean_log_prob, _ = _anchor_log_probs(embeddings, labels, temperature)
    anchor_mask = labels == c
    if not anchor_mask.any():
        return embeddings.new_zeros(())
    return -mean_log_prob[anchor_mask].sum()


def hil_loss(emb_x: torch.Tensor, emb_x_aug: torch.Tensor,
             emb_hil_benign: torch.Tensor, emb_hil_anom: torch.Tensor,
             cfg: LossConfig) -> torch.Tensor:
    """Feedback loss over three labeled set compositions.

    Term 1 anchors the expert anomalies against the benign training batch,
    term 2 anchors the expert benigns against the corrupted twins of the
    training batch, and term 3 separates expert benigns from expert anomalies.
    Empty feedback classes silently drop their terms.
    """
    if emb_hil_benign.numel() == 0 and emb_hil_anom.numel() == 0 \
            and emb_x.numel() == 0 and emb_x_aug.numel() == 0:
        raise EmptyBatch("all feedback loss inputs are empty")

    def cat_labeled(neg, pos):
        emb = torch.cat([neg, pos]) if neg.numel() and pos.numel() else \
            (neg if neg.numel() else pos)
        labels = torch.cat([
            torch.zeros(len(neg) if neg.numel() else 0, dtype=torch.long),
            torch.ones(len(pos) if pos.numel() else 0, dtype=torch.long)])
        return emb, labels

    total = None
    for weight, benign_side, anom_side, anchor_class in (
            (cfg.hil_anom_weight, emb_x, emb_hil_anom, 1),
            (cfg.hil_benign_weight, emb_hil_benign, emb_x_aug, 0),
            (cfg.hil_separation_weight, emb_hil_benign, emb_hil_anom, 0)):
        emb, labels = cat_labeled(benign_side, anom_side)
        if emb.numel() == 0:
            continue
        term = weight * supclass_loss(emb, labels, anchor_class,
                                      cfg.temperature)
        total = term if total is None else total + term
    if total is None:
        raise EmptyBatch("feedback loss had no non-empty term")
    return total


@dataclass
class CriticLossParts:
    wasserstein: torch.Tensor
    gradient_penalty: torch.Tensor
    contrastive: torch.Tensor
    contrastive_weight: float


def caad_critic_loss(parts: CriticLossParts) -> torch.Tensor:
    """Critic minimization target: negated Wasserstein objective, plus the
    gradient penalty, plus the weighted contrastive term."""
    return (-parts.wasserstein + parts.gradient_penalty
            + parts.contrastive_weight * parts.contrastive)


def retrain_loss(parts: CriticLossParts,
                 hil_term: Optional[torch.Tensor]) -> torch.Tensor:
    """Retraining target: the critic loss plus the feedback loss."""
    base = caad_critic_loss(parts)
    return base if hil_term is None else base + hil_term


def generator_loss(fake_scores: torch.Tensor,
                   recon_pair: Optional[tuple[torch.Tensor, torch.Tensor]] = None,
                   recon_weight: float = 0.0) -> torch.Tensor:
    """Adversarial generator objective (fool the critic), with an optional
    reconstruction term weighted by recon_weight."""
    _check_nonempty(fake_scores, "fake_scores")
    loss = -fake_scores.mean()
    if recon_weight > 0:
        if recon_pair is None:
            raise ValueError("recon_weight > 0 requires a (x, recon) pair")
        x, recon = recon_pair
        loss = loss + recon_weight * torch.mean((x - recon) ** 2)
    return loss
