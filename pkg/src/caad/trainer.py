"""Adversarial + contrastive training loop and the feedback retraining pass.

Every critic step sees three things: the Wasserstein objective on a benign
batch vs its reconstruction, the gradient penalty on interpolates, and the
contrastive loss over the benign batch and its corrupted twins.  The generator
updates once every few critic steps.  Retraining repeats the same loop for a
handful of epochs with the expert-labeled instances folded in through the
feedback loss.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
import torch
import torch.nn.functional as F

from .config import AblationFlags, RunConfig
from .errors import AbortNaN, EmptyInput
from .nets import Critic, CriticSpec, Generator, GeneratorSpec
from .objectives import (CriticLossParts, caad_critic_loss, generator_loss,
                         gradient_penalty, hil_loss, retrain_loss,
                         supcon_loss, wasserstein_critic_objective)
from .spectral_data import DatasetBundle
from .transforms import apply_negative


def seed_everything(seed: int, deterministic: bool = False):
    np.random.seed(seed)
    torch.manual_seed(seed)
    if deterministic:
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)


def build_models(cfg: RunConfig,
                 input_size: tuple[int, int]) -> tuple[Generator, Critic]:
    gen_spec = GeneratorSpec(input_size=input_size,
                             base_channels=cfg.model.gen_base_channels,
                             use_skips=not cfg.ablation.no_unet)
    critic_spec = CriticSpec(input_size=input_size,
                             base_channels=cfg.model.critic_base_channels,
                             embedding_dim=cfg.model.embedding_dim,
                             dropout_p=cfg.model.dropout_p)
    return Generator(gen_spec), Critic(critic_spec)


@dataclass
class Checkpoint:
    generator: Generator
    critic: Critic
    config: RunConfig
    epoch: int
    loss_history: list[dict]
    data_hash: str

    def save(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        torch.save({"generator": self.generator.state_dict(),
                    "critic": self.critic.state_dict()},
                   out_dir / "params.bin")
        manifest = {
            "config": self.config.to_dict(),
            "input_size": list(self.generator.spec.input_size),
            "epoch": self.epoch,
            "data_hash": self.data_hash,
            "format_version": 1,
        }
        (out_dir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True))
        if self.loss_history:
            # epochs short enough to skip the generator update lack its column
            fieldnames = list(dict.fromkeys(
                k for row in self.loss_history for k in row))
            with open(out_dir / "losses.csv", "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=fieldnames,
                                        restval="")
                writer.writeheader()
                writer.writerows(self.loss_history)
        return out_dir

    @classmethod
    def load(cls, in_dir) -> "Checkpoint":
        in_dir = Path(in_dir)
        manifest = json.loads((in_dir / "manifest.json").read_text())
        cfg = RunConfig.from_dict(manifest["config"])
        input_size = tuple(manifest["input_size"])
        generator, critic = build_models(cfg, input_size)
        blobs = torch.load(in_dir / "params.bin", weights_only=True)
        generator.load_state_dict(blobs["generator"])
        critic.load_state_dict(blobs["critic"])
        history = []
        losses_path = in_dir / "losses.csv"
        if losses_path.exists():
            with open(losses_path) as fh:
                history = [dict(row) for row in csv.DictReader(fh)]
        return cls(generator, critic, cfg, manifest["epoch"], history,
                   manifest["data_hash"])

    def clone(self) -> "Checkpoint":
        gen, critic = build_models(self.config,
                                   tuple(self.generator.spec.input_size))
        gen.load_state_dict(self.generator.state_dict())
        critic.load_state_dict(self.critic.state_dict())
        return Checkpoint(gen, critic, self.config, self.epoch,
                          list(self.loss_history), self.data_hash)


def ablate(cfg: RunConfig, no_cl=False, no_uq=False, no_unet=False,
           no_wgan_gp=False) -> RunConfig:
    """Turn ablation switches into a concrete config (flags compose)."""
    flags = AblationFlags(
        no_cl=no_cl or cfg.ablation.no_cl,
        no_uq=no_uq or cfg.ablation.no_uq,
        no_unet=no_unet or cfg.ablation.no_unet,
        no_wgan_gp=no_wgan_gp or cfg.ablation.no_wgan_gp)
    loss = cfg.loss
    if flags.no_cl:
        loss = dataclasses.replace(loss, contrastive_weight=0.0)
    return dataclasses.replace(cfg, loss=loss, ablation=flags)


class _Trainer:
    """Shared machinery for initial training and feedback retraining."""

    def __init__(self, cfg: RunConfig, bundle: DatasetBundle):
        self.cfg = cfg
        self.bundle = bundle
        self.train_x = bundle.train
        if len(self.train_x) < 2:
            raise EmptyInput("training needs at least 2 grids")
        self.batch_size = min(cfg.train.batch_size, len(self.train_x))
        self.use_gan_ce = cfg.ablation.no_wgan_gp

    def setup(self, generator: Generator, critic: Critic):
        tc = self.cfg.train
        self.generator = generator
        self.critic = critic
        betas = (tc.adam_beta1, tc.adam_beta2)
        self.opt_c = torch.optim.Adam(critic.parameters(), lr=tc.lr,
                                      betas=betas)
        self.opt_g = torch.optim.Adam(generator.parameters(), lr=tc.lr,
                                      betas=betas)
        self.rng = np.random.default_rng(tc.seed)

    def epoch_batches(self):
        order = self.rng.permutation(len(self.train_x))
        n_full = len(order) // self.batch_size
        for b in range(n_full):
            yield order[b * self.batch_size:(b + 1) * self.batch_size]

    def critic_step(self, batch_np: np.ndarray,
                    hil: Optional[tuple[torch.Tensor, torch.Tensor]] = None
                    ) -> dict:
        cfg = self.cfg
        x = torch.as_tensor(batch_np)
        aug_np, _ = apply_negative(batch_np, cfg.transform, self.rng)
        x_aug = torch.as_tensor(aug_np)

        self.generator.train()
        self.critic.train()
        with torch.no_grad():
            fake = self.generator(x)

        n = len(x)
        parts = [x, x_aug]
        if hil is not None:
            hil_ben, hil_anom = hil
            parts += [hil_ben, hil_anom]
        scores, embs = self.critic(torch.cat(parts), dropout_active=True)
        fake_scores, _ = self.critic(fake, dropout_active=True)
        real_scores = scores[:n]

        if self.use_gan_ce:
            w_obj = x.new_zeros(())
            gp = x.new_zeros(())
            adv = (F.binary_cross_entropy_with_logits(
                       real_scores, torch.ones_like(real_scores))
                   + F.binary_cross_entropy_with_logits(
                       fake_scores, torch.zeros_like(fake_scores)))
        else:
            w_obj = wasserstein_critic_objective(real_scores, fake_scores)
            gp = gradient_penalty(
                lambda z: self.critic(z, dropout_active=True)[0],
                x, fake, cfg.loss.gp_weight)
            adv = None

        if cfg.loss.contrastive_weight > 0:
            labels = torch.cat([torch.zeros(n, dtype=torch.long),
                                torch.ones(n, dtype=torch.long)])
            contrastive = supcon_loss(embs[:2 * n], labels,
                                      cfg.loss.temperature)
        else:
            contrastive = x.new_zeros(())

        hil_term = None
        if hil is not None and (len(hil_ben) or len(hil_anom)):
            emb_ben = embs[2 * n:2 * n + len(hil_ben)]
            emb_anom = embs[2 * n + len(hil_ben):]
            hil_term = hil_loss(embs[:n], embs[n:2 * n], emb_ben, emb_anom,
                                cfg.loss)

        if self.use_gan_ce:
            loss = adv + cfg.loss.contrastive_weight * contrastive
            if hil_term is not None:
                loss = loss + hil_term
            parts_record = {"wasserstein": 0.0, "gradient_penalty": 0.0}
        else:
            parts_obj = CriticLossParts(
                wasserstein=w_obj, gradient_penalty=gp,
                contrastive=contrastive,
                contrastive_weight=cfg.loss.contrastive_weight)
            loss = retrain_loss(parts_obj, hil_term)
            parts_record = {"wasserstein": w_obj.item(),
                            "gradient_penalty": gp.item()}

        if not torch.isfinite(loss):
            raise AbortNaN("critic loss is not finite")
        self.opt_c.zero_grad()
        loss.backward()
        self.opt_c.step()
        return {"critic_loss": loss.item(),
                "contrastive": contrastive.item(),
                "hil": 0.0 if hil_term is None else hil_term.item(),
                **parts_record}

    def generator_step(self, batch_np: np.ndarray) -> dict:
        cfg = self.cfg
        x = torch.as_tensor(batch_np)
        self.generator.train()
        self.critic.train()
        fake = self.generator(x)
        fake_scores, _ = self.critic(fake, dropout_active=True)
        if self.use_gan_ce:
            loss = F.binary_cross_entropy_with_logits(
                fake_scores, torch.ones_like(fake_scores))
            if cfg.loss.recon_weight > 0:
                loss = loss + cfg.loss.recon_weight * torch.mean((x - fake) ** 2)
        else:
            loss = generator_loss(fake_scores, recon_pair=(x, fake),
                                  recon_weight=cfg.loss.recon_weight)
        if not torch.isfinite(loss):
            raise AbortNaN("generator loss is not finite")
        self.opt_g.zero_grad()
        loss.backward()
        self.opt_g.step()
        return {"generator_loss": loss.item()}

    def run_epochs(self, n_epochs: int, start_epoch: int = 0,
                   hil_arrays: Optional[tuple[np.ndarray, np.ndarray]] = None
                   ) -> list[dict]:
        history = []
        step = 0
        ratio = self.cfg.train.critic_steps_per_gen_step
        for epoch in range(start_epoch, start_epoch + n_epochs):
            sums: dict[str, float] = {}
            counts: dict[str, int] = {}
            last_good = None
            for batch_idx in self.epoch_batches():
                batch = self.train_x[batch_idx]
                hil = None
                if hil_arrays is not None:
                    hil = (torch.as_tensor(hil_arrays[0]),
                           torch.as_tensor(hil_arrays[1]))
                metrics = self.critic_step(batch, hil)
                step += 1
                if step % ratio == 0:
                    metrics.update(self.generator_step(batch))
                for k, v in metrics.items():
                    sums[k] = sums.get(k, 0.0) + v
                    counts[k] = counts.get(k, 0) + 1
            row = {"epoch": epoch}
            row.update({k: sums[k] / counts[k] for k in sorted(sums)})
            history.append(row)
        return history


def train_caad(bundle: DatasetBundle, cfg: RunConfig) -> Checkpoint:
    """Train generator and critic from scratch on the benign train split.

    On a NaN loss the raised AbortNaN carries the checkpoint from the end of
    the last completed epoch in its `.checkpoint` attribute.
    """
    seed_everything(cfg.train.seed, cfg.train.deterministic)
    input_size = bundle.train.shape[1:]
    generator, critic = build_models(cfg, input_size)
    trainer = _Trainer(cfg, bundle)
    trainer.setup(generator, critic)

    out = Checkpoint(generator, critic, cfg, 0, [], bundle.content_hash())
    last_good = out.clone()
    history: list[dict] = []
    for epoch in range(cfg.train.epochs):
        try:
            history += trainer.run_epochs(1, start_epoch=epoch)
        except AbortNaN as e:
            last_good.loss_history = history
            e.checkpoint = last_good
            raise
        last_good = Checkpoint(generator, critic, cfg, epoch + 1, [],
                               bundle.content_hash()).clone()
    return Checkpoint(generator, critic, cfg, cfg.train.epochs, history,
                      bundle.content_hash())


def retrain_caad_ef(checkpoint: Checkpoint, bundle: DatasetBundle,
                    feedback: Mapping[str, int],
                    cfg: Optional[RunConfig] = None) -> Checkpoint:
    """Fine-tune a trained checkpoint for a few epochs with expert labels.

    `feedback` maps test-split instance ids to expert labels (0 benign,
    1 anomaly).  The original train split keeps flowing through the critic and
    generator exactly as before; the feedback instances enter through the
    additional feedback loss each critic step.  Returns a new checkpoint; the
    input checkpoint and the dataset are left untouched.
    """
    cfg = cfg or checkpoint.config
    if checkpoint.data_hash != bundle.content_hash():
        raise ValueError(
            "checkpoint was trained on a different dataset (manifest hash "
            "mismatch); retraining must reuse the original train split")
    if cfg.retrain.epochs == 0:
        return checkpoint
    if not feedback:
        warnings.warn("empty feedback: retraining degrades to plain training")

    id_to_idx = {inst: i for i, inst in enumerate(bundle.ids["test"])}
    missing = [i for i in feedback if i not in id_to_idx]
    if missing:
        raise KeyError(f"feedback ids not in test split: {missing[:5]}")
    ben_idx = [id_to_idx[i] for i, lab in sorted(feedback.items()) if lab == 0]
    anom_idx = [id_to_idx[i] for i, lab in sorted(feedback.items()) if lab == 1]
    hil_ben = bundle.test[ben_idx] if ben_idx else np.zeros(
        (0,) + bundle.test.shape[1:], dtype=np.float32)
    hil_anom = bundle.test[anom_idx] if anom_idx else np.zeros(
        (0,) + bundle.test.shape[1:], dtype=np.float32)

    out = checkpoint.clone()
    seed_everything(cfg.train.seed + 1, cfg.train.deterministic)
    trainer = _Trainer(cfg, bundle)
    trainer.setup(out.generator, out.critic)
    hil_arrays = (hil_ben, hil_anom) if feedback else None
    history = trainer.run_epochs(cfg.retrain.epochs,
                                 start_epoch=checkpoint.epoch,
                                 hil_arrays=hil_arrays)
    return Checkpoint(out.generator, out.critic, cfg,
                      checkpoint.epoch + cfg.retrain.epochs,
                      list(checkpoint.loss_history) + history,
                      bundle.content_hash())
