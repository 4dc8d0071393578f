import math

import pytest
import torch

from conftest import small_aedm_config
from tigsc.aedm import SemanticTransceiver
from tigsc.channel import SymbolBlock
from tigsc.gsdsm import (
    PAPER_LITERAL,
    WGAN_STANDARD,
    DistortionSuppressor,
    GanLossConfig,
    SignalCritic,
    critic_loss,
    critic_score,
    distortion_loss,
    generator_adv_loss,
    gradient_penalty,
    semantic_loss,
    suppress,
    syntactic_loss,
)


def block(t):
    return SymbolBlock(values=t)


class SumCritic(torch.nn.Module):
    def forward(self, v):
        return v.sum(dim=(1, 2, 3), keepdim=True)


class ConstantCritic(torch.nn.Module):
    def forward(self, v):
        return torch.full((v.shape[0], 1), 3.0)


class IdentityFeatureStub:
    """aedm stand-in whose feature map is the raw signal."""

    def feature_map(self, y):
        return y.values


class TestSuppressor:
    @pytest.mark.parametrize("length,dsym", [(32, 16), (6, 16), (12, 8), (16, 4)])
    def test_shape_preserved(self, length, dsym):
        torch.manual_seed(0)
        gen = DistortionSuppressor(base_channels=8)
        y = block(torch.randn(2, length, dsym, 2))
        assert suppress(y, gen).values.shape == y.values.shape

    def test_deterministic(self):
        torch.manual_seed(0)
        gen = DistortionSuppressor(base_channels=8)
        gen.eval()
        y = block(torch.randn(2, 8, 16, 2))
        assert torch.equal(suppress(y, gen).values, suppress(y, gen).values)

    def test_architecture_block_counts(self):
        gen = DistortionSuppressor()
        encs = [m for n, m in gen.named_children() if n.startswith("enc")]
        decs = [m for n, m in gen.named_children() if n.startswith("dec")]
        convs = [m for n, m in gen.named_children() if n in ("in_conv", "out_conv")]
        assert len(encs) == 5 and len(decs) == 4 and len(convs) == 2


class TestCritic:
    def test_finite_scores(self):
        torch.manual_seed(0)
        critic = SignalCritic(base_channels=8)
        s = critic_score(block(torch.randn(3, 16, 16, 2)), critic)
        assert torch.isfinite(s).all()

    def test_gradient_matches_finite_differences(self):
        torch.manual_seed(0)
        critic = SignalCritic(base_channels=4).double()
        critic.eval()
        v = torch.randn(1, 16, 16, 2, dtype=torch.float64, requires_grad=True)
        score = critic_score(block(v), critic).mean()
        (grad,) = torch.autograd.grad(score, v)
        eps = 1e-6
        for idx in [(0, 0, 0, 0), (0, 7, 9, 1), (0, 15, 15, 0)]:
            vp = v.detach().clone()
            vm = v.detach().clone()
            vp[idx] += eps
            vm[idx] -= eps
            fp = float(critic_score(block(vp), critic).mean())
            fm = float(critic_score(block(vm), critic).mean())
            fd = (fp - fm) / (2 * eps)
            assert fd == pytest.approx(float(grad[idx]), rel=1e-3, abs=1e-10)

    def test_batch_equivariance_in_eval(self):
        torch.manual_seed(0)
        critic = SignalCritic(base_channels=8)
        critic.eval()
        a = torch.randn(2, 16, 16, 2)
        b = torch.randn(3, 16, 16, 2)
        sa = critic_score(block(a), critic)
        sb = critic_score(block(b), critic)
        sab = critic_score(block(torch.cat((a, b))), critic)
        assert torch.allclose(sab, torch.cat((sa, sb)), atol=1e-5)

    def test_block_structure(self):
        critic = SignalCritic()
        convs = [m for m in critic.blocks if isinstance(m, torch.nn.Conv2d)]
        bns = [m for m in critic.blocks if isinstance(m, torch.nn.BatchNorm2d)]
        lrelus = [m for m in critic.blocks if isinstance(m, torch.nn.LeakyReLU)]
        assert len(convs) == len(bns) == len(lrelus) == 4
        assert isinstance(critic.out_conv, torch.nn.Conv2d)


class TestGeneratorAdvLoss:
    def test_zero_scores(self):
        z = torch.zeros(4)
        assert float(generator_adv_loss(z, WGAN_STANDARD)) == 0.0
        assert float(generator_adv_loss(z, PAPER_LITERAL)) == 0.0

    def test_wgan_hand_value(self):
        assert float(generator_adv_loss(torch.tensor([1.0, 3.0]), WGAN_STANDARD)) == pytest.approx(-2.0)

    def test_paper_literal_hand_value(self):
        assert float(generator_adv_loss(torch.tensor([1.0, 3.0]), PAPER_LITERAL)) == pytest.approx(-5.0)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            generator_adv_loss(torch.zeros(1), "hinge")


class TestGradientPenalty:
    def test_linear_critic_closed_form(self):
        torch.manual_seed(0)
        x = block(torch.randn(3, 4, 4, 2))
        y = block(torch.randn(3, 4, 4, 2))
        m = 4 * 4 * 2
        gp = gradient_penalty(x, y, SumCritic(), seed=0)
        assert float(gp) == pytest.approx((math.sqrt(m) - 1.0) ** 2, abs=1e-4)

    def test_constant_critic_penalty_is_one(self):
        x = block(torch.randn(2, 4, 4, 2))
        y = block(torch.randn(2, 4, 4, 2))
        assert float(gradient_penalty(x, y, ConstantCritic(), seed=1)) == pytest.approx(1.0)

    def test_nonnegative(self):
        torch.manual_seed(3)
        critic = SignalCritic(base_channels=4)
        x = block(torch.randn(2, 16, 16, 2))
        y = block(torch.randn(2, 16, 16, 2))
        assert float(gradient_penalty(x, y, critic, seed=2)) >= 0.0

    def test_deterministic_under_seed(self):
        torch.manual_seed(3)
        critic = SignalCritic(base_channels=4)
        critic.eval()
        x = block(torch.randn(2, 16, 16, 2))
        y = block(torch.randn(2, 16, 16, 2))
        a = float(gradient_penalty(x, y, critic, seed=5))
        b = float(gradient_penalty(x, y, critic, seed=5))
        assert a == b

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            gradient_penalty(block(torch.zeros(1, 4, 4, 2)), block(torch.zeros(1, 8, 4, 2)),
                             SumCritic(), seed=0)


class TestCriticLoss:
    def test_equal_scores_zero(self):
        s = torch.tensor([0.3, -1.2])
        for mode in (WGAN_STANDARD, PAPER_LITERAL):
            assert float(critic_loss(s, s, 0.0, 10.0, mode)) == pytest.approx(0.0)

    def test_wgan_hand_value(self):
        loss = critic_loss(torch.tensor([2.0]), torch.tensor([1.0]), 0.5, 10.0, WGAN_STANDARD)
        assert float(loss) == pytest.approx(4.0)

    def test_paper_literal_hand_value(self):
        loss = critic_loss(torch.tensor([2.0]), torch.tensor([1.0]), 0.0, 10.0, PAPER_LITERAL)
        assert float(loss) == pytest.approx(-3.0)

    def test_wgan_antisymmetry(self):
        a = torch.randn(8)
        b = torch.randn(8)
        lab = float(critic_loss(a, b, 0.0, 10.0, WGAN_STANDARD))
        lba = float(critic_loss(b, a, 0.0, 10.0, WGAN_STANDARD))
        assert lab == pytest.approx(-lba, abs=1e-6)


class TestSyntacticLoss:
    def test_identical_signals(self):
        x = block(torch.randn(2, 3, 4, 2))
        assert float(syntactic_loss(x, x)) == 0.0

    def test_hand_value(self):
        x = block(torch.tensor([1.0, 1.0]).view(1, 1, 1, 2))
        y = block(torch.tensor([0.0, 1.0]).view(1, 1, 1, 2))
        assert float(syntactic_loss(x, y)) == pytest.approx(0.5)

    def test_quadratic_homogeneity(self):
        x = block(torch.randn(2, 3, 4, 2, dtype=torch.float64))
        y = block(torch.randn(2, 3, 4, 2, dtype=torch.float64))
        base = float(syntactic_loss(x, y))
        for c in (2.0, 0.5):
            scaled = float(syntactic_loss(block(c * x.values), block(c * y.values)))
            assert scaled == pytest.approx(c * c * base, rel=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            syntactic_loss(block(torch.zeros(1, 2, 2, 2)), block(torch.zeros(1, 3, 2, 2)))


class TestSemanticLoss:
    def test_identical_signals(self):
        torch.manual_seed(0)
        aedm = SemanticTransceiver(small_aedm_config())
        x = block(torch.randn(2, 6, 16, 2))
        assert float(semantic_loss(x, x, aedm)) == 0.0

    def test_nonnegative(self):
        torch.manual_seed(0)
        aedm = SemanticTransceiver(small_aedm_config())
        x = block(torch.randn(2, 6, 16, 2))
        y = block(torch.randn(2, 6, 16, 2))
        assert float(semantic_loss(x, y, aedm)) >= 0.0

    def test_identity_stub_reduces_to_syntactic(self):
        x = block(torch.randn(2, 3, 4, 2))
        y = block(torch.randn(2, 3, 4, 2))
        assert float(semantic_loss(x, y, IdentityFeatureStub())) == pytest.approx(
            float(syntactic_loss(x, y)), abs=1e-7
        )


class TestDistortionLoss:
    def test_zero_weights(self):
        cfg = GanLossConfig(sytc_weight=0.0, smtc_weight=0.0)
        x = block(torch.randn(1, 2, 4, 2))
        y = block(torch.randn(1, 2, 4, 2))
        assert float(distortion_loss(x, y, cfg, IdentityFeatureStub())) == 0.0

    def test_syntactic_only(self):
        cfg = GanLossConfig(sytc_weight=1.0, smtc_weight=0.0)
        x = block(torch.randn(1, 2, 4, 2))
        y = block(torch.randn(1, 2, 4, 2))
        assert float(distortion_loss(x, y, cfg, IdentityFeatureStub())) == pytest.approx(
            float(syntactic_loss(x, y)), abs=1e-7
        )

    def test_weighted_hand_value(self):
        # Component losses 0.5 (syntactic) and 0.25 (semantic) with weights 2, 3.
        class HalfFeatureStub:
            def feature_map(self, y):
                return y.values / math.sqrt(2.0)

        x = block(torch.tensor([1.0, 1.0]).view(1, 1, 1, 2))
        y = block(torch.tensor([0.0, 1.0]).view(1, 1, 1, 2))
        cfg = GanLossConfig(sytc_weight=2.0, smtc_weight=3.0)
        # syntactic = 0.5; semantic with the stub = 0.5/2 = 0.25 -> 2*0.5 + 3*0.25
        assert float(distortion_loss(x, y, cfg, HalfFeatureStub())) == pytest.approx(1.75)


class TestGanLossConfig:
    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            GanLossConfig(gp_coeff=-1.0)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            GanLossConfig(adv_mode="lsgan")
