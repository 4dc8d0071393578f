"""Physical-layer simulation: block fading, AWGN, CSI error, equalization.

Complex baseband signals are real tensors with a trailing (re, im) axis so
every downstream network stays real-valued. One fading coefficient is drawn
per sentence and held constant across its symbols (block fading). All
operations are differentiable in the signal argument, so encoder gradients
pass through the channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

from .seeding import derive_seed

AWGN = "awgn"
RICIAN = "rician"
RAYLEIGH = "rayleigh"
CHANNEL_KINDS = (AWGN, RICIAN, RAYLEIGH)

CSI_NONE = "none"
CSI_PERFECT = "perfect"
CSI_IMPERFECT = "imperfect"
CSI_MODES = (CSI_NONE, CSI_PERFECT, CSI_IMPERFECT)

# Below this magnitude a fading draw is treated as a degenerate channel.
H_EPS = 1e-6


class ChannelConfigError(ValueError):
    pass


class DegenerateChannelError(RuntimeError):
    """|h_est| fell below H_EPS; caller may resample or skip the sentence."""


@dataclass
class ChannelConfig:
    kind: str = AWGN
    snr_db: float = 12.0
    rician_k: float = 1.0
    csi: str = CSI_NONE
    csi_error_var: float = 0.0

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ChannelConfigError(f"unknown channel kind {self.kind!r}, expected one of {CHANNEL_KINDS}")
        if self.csi not in CSI_MODES:
            raise ChannelConfigError(f"unknown csi mode {self.csi!r}, expected one of {CSI_MODES}")
        if self.rician_k < 0:
            raise ChannelConfigError(f"rician_k must be >= 0, got {self.rician_k}")
        if self.csi_error_var < 0:
            raise ChannelConfigError(f"csi_error_var must be >= 0, got {self.csi_error_var}")


@dataclass
class SymbolBlock:
    """Complex baseband signal: values is B x L x d_sym x 2 (re, im)."""

    values: torch.Tensor

    @property
    def power(self) -> float:
        """Mean |x|^2 over all complex entries."""
        return float(self.values.pow(2).sum(dim=-1).mean())

    @property
    def shape(self) -> torch.Size:
        return self.values.shape


def nonpad_power(values: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
    """Mean |x|^2 over complex entries at non-pad positions, per sentence."""
    sq = values.pow(2).sum(dim=-1)          # B x L x d
    mask = pad_mask.to(sq.dtype)            # B x L
    total = (sq * mask.unsqueeze(-1)).sum(dim=(1, 2))
    return total / (mask.sum(dim=1) * sq.shape[2])


@dataclass
class ChannelRealization:
    kind: str
    h: torch.Tensor        # B x 2, complex coefficient per sentence as (re, im)
    sigma2: float          # noise variance per complex entry, linear
    seed: int = 0

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ChannelConfigError(f"sigma2 must be > 0, got {self.sigma2}")


@dataclass
class CsiEstimate:
    h_true: torch.Tensor   # B x 2
    error_var: float
    h_est: torch.Tensor = field(init=False)
    seed: int = 0

    def __post_init__(self):
        if self.error_var < 0:
            raise ChannelConfigError(f"error_var must be >= 0, got {self.error_var}")
        if self.error_var == 0:
            self.h_est = self.h_true.clone()
        else:
            gen = torch.Generator().manual_seed(derive_seed(self.seed, "csi"))
            e = torch.randn(self.h_true.shape, generator=gen, dtype=self.h_true.dtype)
            self.h_est = self.h_true + e * math.sqrt(self.error_var / 2.0)


def snr_to_sigma2(snr_db: float, signal_power: float) -> float:
    """Linear noise variance for a target SNR in dB at the given signal power."""
    if not (math.isfinite(snr_db) and math.isfinite(signal_power)):
        raise ValueError(f"non-finite SNR or power: {snr_db}, {signal_power}")
    if signal_power <= 0:
        raise ValueError(f"signal_power must be > 0, got {signal_power}")
    return signal_power / (10.0 ** (snr_db / 10.0))


def sample_fading(kind: str, batch: int, seed: int, rician_k: float = 1.0) -> torch.Tensor:
    """One complex coefficient per sentence, as a (batch, 2) real tensor.

    AWGN is exactly 1+0j. Rayleigh draws CN(0,1). Rician with factor k has a
    deterministic line-of-sight part sqrt(k/(k+1)) plus a CN(0, 1/(k+1))
    scattered part, so E[|h|^2] = 1 for every kind.
    """
    if batch < 1:
        raise ChannelConfigError(f"batch must be >= 1, got {batch}")
    if kind == AWGN:
        h = torch.zeros(batch, 2)
        h[:, 0] = 1.0
        return h
    gen = torch.Generator().manual_seed(derive_seed(seed, "fading", kind))
    scatter = torch.randn(batch, 2, generator=gen) / math.sqrt(2.0)
    if kind == RAYLEIGH:
        return scatter
    if kind == RICIAN:
        h = scatter * math.sqrt(1.0 / (rician_k + 1.0))
        h[:, 0] += math.sqrt(rician_k / (rician_k + 1.0))
        return h
    raise ChannelConfigError(f"unknown channel kind {kind!r}, expected one of {CHANNEL_KINDS}")


def sample_realization(
    cfg: ChannelConfig, batch: int, seed: int, signal_power: float = 1.0
) -> ChannelRealization:
    h = sample_fading(cfg.kind, batch, seed, cfg.rician_k)
    return ChannelRealization(
        kind=cfg.kind, h=h, sigma2=snr_to_sigma2(cfg.snr_db, signal_power), seed=seed
    )


def _complex_mul(h: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    # h: B x 2 broadcast over x: B x L x d x 2
    hr = h[:, 0].view(-1, 1, 1)
    hi = h[:, 1].view(-1, 1, 1)
    re = hr * x[..., 0] - hi * x[..., 1]
    im = hr * x[..., 1] + hi * x[..., 0]
    return torch.stack((re, im), dim=-1)


def transmit(x: SymbolBlock, realization: ChannelRealization) -> SymbolBlock:
    """y = h*x + n with n ~ CN(0, sigma2) i.i.d. per complex entry.

    Noise is regenerated from the realization's seed, so repeat calls with the
    same realization return bit-identical output. Differentiable in x.
    """
    v = x.values
    if realization.h.shape[0] != v.shape[0]:
        raise ValueError(f"batch mismatch: {realization.h.shape[0]} coefficients for {v.shape[0]} sentences")
    h = realization.h.to(v.dtype)
    gen = torch.Generator().manual_seed(derive_seed(realization.seed, "noise"))
    noise = torch.randn(v.shape, generator=gen, dtype=v.dtype) * math.sqrt(realization.sigma2 / 2.0)
    return SymbolBlock(values=_complex_mul(h, v) + noise)


def equalize(y: SymbolBlock, h_est: CsiEstimate | torch.Tensor) -> SymbolBlock:
    """Zero-forcing equalization: y / h_est, complex division per sentence."""
    h = h_est.h_est if isinstance(h_est, CsiEstimate) else h_est
    mag2 = h.pow(2).sum(dim=-1)
    if bool((mag2 <= H_EPS**2).any()):
        raise DegenerateChannelError(f"|h_est| <= {H_EPS} for some sentence")
    h = h.to(y.values.dtype)
    conj = torch.stack((h[:, 0], -h[:, 1]), dim=-1)
    out = _complex_mul(conj, y.values) / mag2.to(y.values.dtype).view(-1, 1, 1, 1)
    return SymbolBlock(values=out)
