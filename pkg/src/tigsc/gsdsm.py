"""GAN-based signal distortion suppression.

The generator is a U-Net over the symbol block viewed as a 2-channel map
(height = tokens, width = complex dims): 5 encoder blocks, 4 decoder blocks
with skip connections, and input/output convolutional adapters. It predicts
the clean signal directly, not a residual. The critic stacks 4 blocks of
convolution + batch norm + leaky ReLU and a final convolution that emits a
real score map. Spatial sizes are padded to multiples of 16 internally (four
halvings) and cropped back on output.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .channel import SymbolBlock
from .seeding import derive_seed

WGAN_STANDARD = "wgan_standard"
PAPER_LITERAL = "paper_literal"
ADV_MODES = (WGAN_STANDARD, PAPER_LITERAL)


@dataclass
class GanLossConfig:
    gp_coeff: float = 10.0
    sytc_weight: float = 1.0
    smtc_weight: float = 1.0
    adv_mode: str = WGAN_STANDARD

    def __post_init__(self):
        if self.gp_coeff < 0 or self.sytc_weight < 0 or self.smtc_weight < 0:
            raise ValueError("loss weights must be >= 0")
        if self.adv_mode not in ADV_MODES:
            raise ValueError(f"adv_mode must be one of {ADV_MODES}, got {self.adv_mode!r}")


def _to_map(values: torch.Tensor) -> torch.Tensor:
    # B x L x d x 2 -> B x 2 x L x d
    return values.permute(0, 3, 1, 2)


def _from_map(m: torch.Tensor) -> torch.Tensor:
    return m.permute(0, 2, 3, 1)


def _pad16(m: torch.Tensor) -> tuple[torch.Tensor, int, int]:
    h, w = m.shape[2], m.shape[3]
    ph = (-h) % 16
    pw = (-w) % 16
    if ph or pw:
        m = F.pad(m, (0, pw, 0, ph))
    return m, h, w


class _ConvBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)

    def forward(self, x):
        return F.relu(self.conv2(F.relu(self.conv1(x))))


class _UpBlock(nn.Module):
    def __init__(self, c_in: int, c_skip: int, c_out: int):
        super().__init__()
        self.body = _ConvBlock(c_in + c_skip, c_out)

    def forward(self, x, skip):
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        return self.body(torch.cat((x, skip), dim=1))


class DistortionSuppressor(nn.Module):
    """U-Net mapping received blocks to distortion-suppressed blocks."""

    def __init__(self, base_channels: int = 32):
        super().__init__()
        c = base_channels
        self.in_conv = nn.Conv2d(2, c, 3, padding=1)
        self.enc1 = _ConvBlock(c, c)
        self.enc2 = _ConvBlock(c, 2 * c, stride=2)
        self.enc3 = _ConvBlock(2 * c, 4 * c, stride=2)
        self.enc4 = _ConvBlock(4 * c, 8 * c, stride=2)
        self.enc5 = _ConvBlock(8 * c, 8 * c, stride=2)
        self.dec1 = _UpBlock(8 * c, 8 * c, 4 * c)
        self.dec2 = _UpBlock(4 * c, 4 * c, 2 * c)
        self.dec3 = _UpBlock(2 * c, 2 * c, c)
        self.dec4 = _UpBlock(c, c, c)
        self.out_conv = nn.Conv2d(c, 2, 3, padding=1)

    def forward(self, values: torch.Tensor) -> torch.Tensor:
        m, h, w = _pad16(_to_map(values))
        e1 = self.enc1(F.relu(self.in_conv(m)))
        e2 = self.enc2(e1)
        e3 = self.enc3(e2)
        e4 = self.enc4(e3)
        e5 = self.enc5(e4)
        d = self.dec1(e5, e4)
        d = self.dec2(d, e3)
        d = self.dec3(d, e2)
        d = self.dec4(d, e1)
        out = self.out_conv(d)
        return _from_map(out[:, :, :h, :w])


class SignalCritic(nn.Module):
    """Convolutional critic producing a real score map."""

    def __init__(self, base_channels: int = 32):
        super().__init__()
        layers = []
        c_in = 2
        c = base_channels
        for _ in range(4):
            layers += [
                nn.Conv2d(c_in, c, 4, stride=2, padding=1),
                nn.BatchNorm2d(c),
                nn.LeakyReLU(0.2),
            ]
            c_in, c = c, min(2 * c, 8 * base_channels)
        self.blocks = nn.Sequential(*layers)
        self.out_conv = nn.Conv2d(c_in, 1, 3, padding=1)

    def forward(self, values: torch.Tensor) -> torch.Tensor:
        m, _, _ = _pad16(_to_map(values))
        return self.out_conv(self.blocks(m))


def suppress(y: SymbolBlock, gen: DistortionSuppressor) -> SymbolBlock:
    return SymbolBlock(values=gen(y.values))


def critic_score(signal: SymbolBlock, critic: SignalCritic) -> torch.Tensor:
    return critic(signal.values)


def generator_adv_loss(fake_scores: torch.Tensor, mode: str = WGAN_STANDARD) -> torch.Tensor:
    if mode == WGAN_STANDARD:
        return -fake_scores.mean()
    if mode == PAPER_LITERAL:
        return -fake_scores.pow(2).mean()
    raise ValueError(f"adv_mode must be one of {ADV_MODES}, got {mode!r}")


def gradient_penalty(
    x_real: SymbolBlock, y_fake: SymbolBlock, critic: SignalCritic, seed: int
) -> torch.Tensor:
    """(|grad D| - 1)^2 at per-sentence random interpolates of real and fake."""
    xr, yf = x_real.values.detach(), y_fake.values.detach()
    if xr.shape != yf.shape:
        raise ValueError(f"shape mismatch: {tuple(xr.shape)} vs {tuple(yf.shape)}")
    gen = torch.Generator().manual_seed(derive_seed(seed, "gp-alpha"))
    alpha = torch.rand(xr.shape[0], 1, 1, 1, generator=gen, dtype=xr.dtype)
    inter = (alpha * xr + (1.0 - alpha) * yf).requires_grad_(True)
    scores = critic(inter)
    if scores.requires_grad:
        grads = torch.autograd.grad(
            scores, inter, grad_outputs=torch.ones_like(scores),
            create_graph=True, allow_unused=True,
        )[0]
    else:  # critic ignores its input; gradient is identically zero
        grads = None
    if grads is None:
        grads = torch.zeros_like(inter)
    norms = grads.reshape(grads.shape[0], -1).norm(2, dim=1)
    return (norms - 1.0).pow(2).mean()


def critic_loss(
    real_scores: torch.Tensor,
    fake_scores: torch.Tensor,
    gp: torch.Tensor | float,
    gp_coeff: float,
    mode: str = WGAN_STANDARD,
) -> torch.Tensor:
    if mode == WGAN_STANDARD:
        base = fake_scores.mean() - real_scores.mean()
    elif mode == PAPER_LITERAL:
        base = fake_scores.pow(2).mean() - real_scores.pow(2).mean()
    else:
        raise ValueError(f"adv_mode must be one of {ADV_MODES}, got {mode!r}")
    return base + gp_coeff * gp


def syntactic_loss(x: SymbolBlock, y_bar: SymbolBlock) -> torch.Tensor:
    """Mean squared signal-value difference over all real entries."""
    if x.values.shape != y_bar.values.shape:
        raise ValueError(f"shape mismatch: {tuple(x.values.shape)} vs {tuple(y_bar.values.shape)}")
    return (x.values - y_bar.values).pow(2).mean()


def semantic_loss(x: SymbolBlock, y_bar: SymbolBlock, aedm) -> torch.Tensor:
    """Mean squared difference of the decoder feature maps of x and y_bar."""
    return (aedm.feature_map(x) - aedm.feature_map(y_bar)).pow(2).mean()


def distortion_loss(
    x: SymbolBlock, y_bar: SymbolBlock, cfg: GanLossConfig, aedm
) -> torch.Tensor:
    total = x.values.new_zeros(())
    if cfg.sytc_weight:
        total = total + cfg.sytc_weight * syntactic_loss(x, y_bar)
    if cfg.smtc_weight:
        total = total + cfg.smtc_weight * semantic_loss(x, y_bar, aedm)
    return total
