"""Generator (UNet autoencoder) and critic networks.

The generator reconstructs density grids; its reconstructions are the fake
distribution for adversarial training.  The critic scores realness and, from
the layer before the scalar head, exposes a unit-norm embedding used for the
contrastive loss, anomaly scoring, and MC-dropout uncertainty.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ShapeError


@dataclass(frozen=True)
class GeneratorSpec:
    input_size: tuple[int, int] = (32, 32)
    base_channels: int = 16
    use_skips: bool = True            # False = plain encoder-decoder ablation
    recon_head_channels: int = 0      # 0 = derive from base_channels

    def __post_init__(self):
        h, w = self.input_size
        if min(h, w) < 20:
            raise ShapeError(
                f"input {self.input_size} too small for 5 stride-2 stages")


@dataclass(frozen=True)
class CriticSpec:
    input_size: tuple[int, int] = (32, 32)
    base_channels: int = 16
    embedding_dim: int = 512
    dropout_p: float = 0.5


def l2_normalize(v: torch.Tensor, dim: int = -1,
                 eps: float = 1e-12) -> torch.Tensor:
    return v / v.norm(dim=dim, keepdim=True).clamp_min(eps)


def _down_channels(c: int) -> list[int]:
    return [c, 2 * c, 4 * c, 8 * c, 8 * c]


class Generator(nn.Module):
    """5 stride-2 down blocks, 5 shape-preserving blocks at the bottleneck,
    5 transposed-conv up blocks (mirroring encoder shapes), sigmoid output."""

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        chans = _down_channels(spec.base_channels)

        self.downs = nn.ModuleList()
        in_ch = 1
        for out_ch in chans:
            self.downs.append(nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 4, stride=2, padding=1),
                nn.BatchNorm2d(out_ch),
                nn.LeakyReLU(0.2, inplace=True)))
            in_ch = out_ch

        bottleneck = chans[-1]
        self.sames = nn.ModuleList()
        for _ in range(5):
            self.sames.append(nn.Sequential(
                nn.Conv2d(bottleneck, bottleneck, 3, padding=1),
                nn.MaxPool2d(3, stride=1, padding=1),
                nn.BatchNorm2d(bottleneck),
                nn.LeakyReLU(0.2, inplace=True)))

        self.ups = nn.ModuleList()
        self.up_norms = nn.ModuleList()
        up_out = list(reversed(chans[:-1])) + [spec.base_channels]
        in_ch = bottleneck
        for i, out_ch in enumerate(up_out):
            self.ups.append(nn.ConvTranspose2d(in_ch, out_ch, 4,
                                               stride=2, padding=1))
            self.up_norms.append(nn.BatchNorm2d(out_ch))
            in_ch = out_ch
            if spec.use_skips and i < 4:
                in_ch += up_out[i]  # concatenated encoder features
        self.head = nn.Conv2d(spec.base_channels, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() == 3:
            x = x.unsqueeze(1)
        if tuple(x.shape[-2:]) != tuple(self.spec.input_size):
            raise ShapeError(
                f"generator expects {self.spec.input_size}, got "
                f"{tuple(x.shape[-2:])}")
        skips = []
        sizes = [x.shape[-2:]]
        h = x
        for down in self.downs:
            h = down(h)
            skips.append(h)
            sizes.append(h.shape[-2:])
        for same in self.sames:
            h = same(h)
        # mirror encoder sizes exactly (odd sizes do not double cleanly)
        for i, (up, norm) in enumerate(zip(self.ups, self.up_norms)):
            target = sizes[len(sizes) - 2 - i]
            h = up(h, output_size=target)
            h = F.relu(norm(h), inplace=True)
            if self.spec.use_skips and i < 4:
                h = torch.cat([h, skips[3 - i]], dim=1)
        return torch.sigmoid(self.head(h)).squeeze(1)


class Critic(nn.Module):
    """5 conv blocks (instance norm, leaky-ReLU, dropout) feeding an embedding
    head and then a scalar realness head.

    Dropout is gated per call, not by module mode, so the same instance serves
    deterministic scoring and Monte-Carlo sampling.
    """

    def __init__(self, spec: CriticSpec):
        super().__init__()
        self.spec = spec
        chans = _down_channels(spec.base_channels)
        self.convs = nn.ModuleList()
        self.norms = nn.ModuleList()
        in_ch = 1
        for out_ch in chans:
            self.convs.append(nn.Conv2d(in_ch, out_ch, 4, stride=2, padding=1))
            self.norms.append(nn.InstanceNorm2d(out_ch))
            in_ch = out_ch
        with torch.no_grad():
            probe = torch.zeros(1, 1, *spec.input_size)
            flat = self._trunk(probe, dropout_active=False).shape[1]
        self.embed = nn.Linear(flat, spec.embedding_dim)
        self.score_head = nn.Linear(spec.embedding_dim, 1)

    def _trunk(self, x: torch.Tensor, dropout_active: bool) -> torch.Tensor:
        h = x
        for conv, norm in zip(self.convs, self.norms):
            h = conv(h)
            if h.shape[-2] * h.shape[-1] > 1:  # instance norm needs >1 element
                h = norm(h)
            h = F.leaky_relu(h, 0.2)
            h = F.dropout(h, self.spec.dropout_p, training=dropout_active)
        return h.flatten(1)

    def forward(self, x: torch.Tensor, dropout_active: bool = False
                ) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (scalar scores (N,), unit-norm embeddings (N, D))."""
        if x.dim() == 3:
            x = x.unsqueeze(1)
        if tuple(x.shape[-2:]) != tuple(self.spec.input_size):
            raise ShapeError(
                f"critic expects {self.spec.input_size}, got "
                f"{tuple(x.shape[-2:])}")
        features = self._trunk(x, dropout_active)
        raw = self.embed(features)
        scores = self.score_head(raw).squeeze(-1)
        return scores, l2_normalize(raw)


def interpolate_samples(real: torch.Tensor, fake: torch.Tensor,
                        generator: torch.Generator | None = None
                        ) -> torch.Tensor:
    """Per-sample convex combinations on the line between real and fake."""
    if real.shape != fake.shape:
        raise ShapeError(f"shape mismatch: {real.shape} vs {fake.shape}")
    eps_shape = (real.shape[0],) + (1,) * (real.dim() - 1)
    eps = torch.rand(eps_shape, generator=generator, dtype=real.dtype)
    return eps * real + (1.0 - eps) * fake
