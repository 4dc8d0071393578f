import math

import pytest
import torch
from scipy import stats

from tigsc.channel import (
    AWGN,
    RAYLEIGH,
    RICIAN,
    ChannelConfig,
    ChannelConfigError,
    ChannelRealization,
    CsiEstimate,
    DegenerateChannelError,
    SymbolBlock,
    equalize,
    sample_fading,
    sample_realization,
    snr_to_sigma2,
    transmit,
)


def block(values):
    return SymbolBlock(values=values)


class TestSnrToSigma2:
    def test_zero_db(self):
        assert snr_to_sigma2(0.0, 1.0) == pytest.approx(1.0)

    def test_ten_db(self):
        assert snr_to_sigma2(10.0, 1.0) == pytest.approx(0.1)

    def test_three_db(self):
        assert snr_to_sigma2(3.0, 1.0) == pytest.approx(10 ** (-0.3), abs=1e-6)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            snr_to_sigma2(float("nan"), 1.0)
        with pytest.raises(ValueError):
            snr_to_sigma2(3.0, 0.0)


class TestSampleFading:
    def test_awgn_is_unit(self):
        h = sample_fading(AWGN, 16, seed=0)
        assert torch.equal(h[:, 0], torch.ones(16))
        assert torch.equal(h[:, 1], torch.zeros(16))

    def test_rayleigh_unit_mean_power(self):
        # Monte-Carlo oracle on CN(0,1).
        h = sample_fading(RAYLEIGH, 1_000_000, seed=1)
        assert float(h.pow(2).sum(-1).mean()) == pytest.approx(1.0, abs=0.01)

    def test_rician_unit_mean_power(self):
        h = sample_fading(RICIAN, 1_000_000, seed=2, rician_k=1.0)
        assert float(h.pow(2).sum(-1).mean()) == pytest.approx(1.0, abs=0.01)

    def test_rician_large_k_is_line_of_sight(self):
        h = sample_fading(RICIAN, 100_000, seed=3, rician_k=1e6)
        mags = h.pow(2).sum(-1).sqrt()
        assert float((mags - 1.0).abs().max()) < 1e-2

    def test_deterministic(self):
        assert torch.equal(sample_fading(RAYLEIGH, 64, seed=9), sample_fading(RAYLEIGH, 64, seed=9))

    def test_unknown_kind(self):
        with pytest.raises(ChannelConfigError):
            sample_fading("nakagami", 4, seed=0)

    def test_rayleigh_magnitude_ks(self):
        # |h| for h ~ CN(0,1) is Rayleigh with scale 1/sqrt(2).
        mags = sample_fading(RAYLEIGH, 10_000, seed=4).pow(2).sum(-1).sqrt().numpy()
        _, pvalue = stats.kstest(mags, "rayleigh", args=(0.0, 1.0 / math.sqrt(2.0)))
        assert pvalue > 0.01


class TestTransmit:
    def test_noiseless_identity(self):
        x = block(torch.randn(4, 8, 4, 2))
        r = ChannelRealization(kind=AWGN, h=sample_fading(AWGN, 4, 0), sigma2=1e-30, seed=0)
        y = transmit(x, r)
        assert torch.allclose(y.values, x.values, atol=1e-12)

    def test_noise_power(self):
        x = block(torch.zeros(100, 100, 100, 2))
        r = ChannelRealization(kind=AWGN, h=sample_fading(AWGN, 100, 0), sigma2=1.0, seed=5)
        y = transmit(x, r)
        assert y.power == pytest.approx(1.0, abs=0.01)

    def test_repeat_call_bit_identical(self):
        x = block(torch.randn(3, 5, 4, 2))
        r = sample_realization(ChannelConfig(kind=RAYLEIGH, snr_db=6.0), 3, seed=11)
        assert torch.equal(transmit(x, r).values, transmit(x, r).values)

    def test_batch_mismatch(self):
        x = block(torch.randn(3, 5, 4, 2))
        r = sample_realization(ChannelConfig(), 2, seed=0)
        with pytest.raises(ValueError):
            transmit(x, r)

    @pytest.mark.parametrize("kind", [AWGN, RICIAN, RAYLEIGH])
    def test_empirical_snr_within_tolerance(self, kind):
        # power(h*x) / power(n) must match the configured SNR within 0.2 dB.
        snr_db = 9.0
        b, length, d = 2000, 16, 8  # 256k complex entries
        gen = torch.Generator().manual_seed(100)
        x = torch.randn(b, length, d, 2, generator=gen)
        x = x / x.pow(2).sum(-1).mean().sqrt()
        cfg = ChannelConfig(kind=kind, snr_db=snr_db)
        r = sample_realization(cfg, b, seed=101)
        y = transmit(block(x), r)
        hr, hi = r.h[:, 0].view(-1, 1, 1), r.h[:, 1].view(-1, 1, 1)
        hx = torch.stack((hr * x[..., 0] - hi * x[..., 1], hr * x[..., 1] + hi * x[..., 0]), -1)
        noise = y.values - hx
        measured = 10 * math.log10(float(hx.pow(2).sum()) / float(noise.pow(2).sum()))
        assert measured == pytest.approx(snr_db, abs=0.2)

    def test_gradient_is_h(self):
        # d transmit / dx equals multiplication by h; central differences agree.
        torch.manual_seed(7)
        x = torch.randn(2, 3, 2, 2, dtype=torch.float64, requires_grad=True)
        r = ChannelRealization(
            kind=RAYLEIGH,
            h=sample_fading(RAYLEIGH, 2, seed=3).to(torch.float64),
            sigma2=0.25,
            seed=13,
        )
        w = torch.randn(2, 3, 2, 2, dtype=torch.float64)
        out = (transmit(block(x), r).values * w).sum()
        (grad,) = torch.autograd.grad(out, x)
        eps = 1e-6
        for idx in [(0, 0, 0, 0), (1, 2, 1, 1), (0, 1, 0, 1)]:
            xp = x.detach().clone()
            xm = x.detach().clone()
            xp[idx] += eps
            xm[idx] -= eps
            fp = float((transmit(block(xp), r).values * w).sum())
            fm = float((transmit(block(xm), r).values * w).sum())
            fd = (fp - fm) / (2 * eps)
            assert fd == pytest.approx(float(grad[idx]), rel=1e-4, abs=1e-9)


class TestEqualize:
    def test_perfect_csi_inverts_noiseless(self):
        x = torch.randn(8, 4, 4, 2)
        r = sample_realization(ChannelConfig(kind=RAYLEIGH, snr_db=300.0), 8, seed=21)
        y = transmit(block(x), r)
        rec = equalize(y, r.h)
        assert float((rec.values - x).abs().max() / x.abs().max()) < 1e-5

    def test_identity_for_unit_h(self):
        y = block(torch.randn(4, 3, 2, 2))
        h = torch.zeros(4, 2)
        h[:, 0] = 1.0
        assert torch.allclose(equalize(y, h).values, y.values, atol=1e-7)

    def test_imperfect_csi_differs(self):
        h = sample_fading(RAYLEIGH, 256, seed=31)
        est = CsiEstimate(h_true=h, error_var=0.2, seed=5)
        assert not torch.allclose(est.h_est, est.h_true)
        # Error variance matches the configured level within Monte-Carlo slack.
        err = est.h_est - est.h_true
        assert float(err.pow(2).sum(-1).mean()) == pytest.approx(0.2, rel=0.3)

    def test_zero_error_var_is_exact(self):
        h = sample_fading(RAYLEIGH, 4, seed=1)
        est = CsiEstimate(h_true=h, error_var=0.0)
        assert torch.equal(est.h_est, est.h_true)

    def test_degenerate_rejected(self):
        y = block(torch.randn(1, 2, 2, 2))
        with pytest.raises(DegenerateChannelError):
            equalize(y, torch.zeros(1, 2))


class TestChannelConfig:
    def test_unknown_kind(self):
        with pytest.raises(ChannelConfigError):
            ChannelConfig(kind="isi")

    def test_unknown_csi(self):
        with pytest.raises(ChannelConfigError):
            ChannelConfig(csi="oracle")

    def test_sigma2_positive(self):
        with pytest.raises(ChannelConfigError):
            ChannelRealization(kind=AWGN, h=torch.zeros(1, 2), sigma2=0.0)
