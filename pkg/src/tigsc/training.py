"""Joint (JOT) and alternating (AOT) training of the transceiver and suppressor.

One JOT step updates the critic on detached signals, then takes a single
joint Adam step on the transceiver and generator under the weighted total
loss. AOT interleaves: on every n_altv-th batch the suppressor/critic pair
is trained alone and then the transceiver+suppressor by cross entropy only;
other batches fall back to the joint step. NaN or Inf in any loss aborts the
run naming the offending component.
"""

from __future__ import annotations

import json
import math
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import torch

from . import metrics
from .aedm import AedmConfig, SemanticTransceiver, cross_entropy_loss, save_checkpoint
from .channel import (
    CSI_IMPERFECT,
    CSI_PERFECT,
    ChannelConfig,
    CsiEstimate,
    SymbolBlock,
    equalize,
    sample_realization,
    transmit,
)
from .gsdsm import (
    DistortionSuppressor,
    GanLossConfig,
    SignalCritic,
    critic_loss,
    critic_score,
    generator_adv_loss,
    gradient_penalty,
    semantic_loss,
    suppress,
    syntactic_loss,
)
from .seeding import derive_seed
from .textcorpus import SentenceBatch, Vocabulary, batch_token_lists, detokenize

JOT = "jot"
AOT = "aot"
SCHEMES = (JOT, AOT)

TI_GSC = "ti-gsc"
SC_VANILLA = "sc-vanilla"
SC_PERFECT_CSI = "sc-perfect-csi"
SC_IMPERFECT_CSI = "sc-imperfect-csi"
ANN_FRAMEWORKS = (TI_GSC, SC_VANILLA, SC_PERFECT_CSI, SC_IMPERFECT_CSI)

LOG_NAME = "train_log.jsonl"


class TrainConfigError(ValueError):
    pass


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 60
    batch_size: int = 64
    lr_aedm: float = 1e-4
    weight_decay_aedm: float = 5e-4
    lr_gen: float = 2e-4
    lr_critic: float = 2e-4
    w1: float = 1.0
    w2: float = 0.01
    w3: float = 0.01
    n_altv: int = 2
    scheme: str = JOT
    framework: str = TI_GSC
    seed: int = 0
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    gan: GanLossConfig = field(default_factory=GanLossConfig)
    # Plumbing knobs, not part of the optimization itself.
    max_len: int = 32
    val_max_sentences: int = 100
    checkpoint_every: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise TrainConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.n_altv < 1:
            raise TrainConfigError(f"n_altv must be >= 1, got {self.n_altv}")
        if min(self.lr_aedm, self.lr_gen, self.lr_critic) <= 0:
            raise TrainConfigError("all learning rates must be > 0")
        if min(self.w1, self.w2, self.w3) < 0:
            raise TrainConfigError("loss weights must be >= 0")
        if self.scheme not in SCHEMES:
            raise TrainConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.framework not in ANN_FRAMEWORKS:
            raise TrainConfigError(
                f"framework must be one of {ANN_FRAMEWORKS}, got {self.framework!r}"
            )


@dataclass
class LossBundle:
    l_ce: float = 0.0
    l_adv_g: float = 0.0
    l_adv_d: float = 0.0
    l_sytc: float = 0.0
    l_smtc: float = 0.0
    l_dstr: float = 0.0
    l_total: float = 0.0
    nmse: float | None = None

    def assert_finite(self) -> "LossBundle":
        bad = [
            name
            for name in ("l_ce", "l_adv_g", "l_adv_d", "l_sytc", "l_smtc", "l_dstr", "l_total")
            if not math.isfinite(getattr(self, name))
        ]
        if bad:
            raise TrainingDivergedError(f"non-finite loss component(s): {', '.join(bad)}")
        return self


@dataclass
class TrainState:
    aedm: SemanticTransceiver
    gen: DistortionSuppressor
    critic: SignalCritic
    opt_aedm: torch.optim.Adam
    opt_gen: torch.optim.Adam
    opt_critic: torch.optim.Adam


def build_state(aedm_cfg: AedmConfig, cfg: TrainConfig) -> TrainState:
    aedm = SemanticTransceiver(aedm_cfg)
    gen = DistortionSuppressor()
    critic = SignalCritic()
    return TrainState(
        aedm=aedm,
        gen=gen,
        critic=critic,
        opt_aedm=torch.optim.Adam(
            aedm.parameters(), lr=cfg.lr_aedm, weight_decay=cfg.weight_decay_aedm
        ),
        opt_gen=torch.optim.Adam(gen.parameters(), lr=cfg.lr_gen),
        opt_critic=torch.optim.Adam(critic.parameters(), lr=cfg.lr_critic),
    )


@contextmanager
def _frozen(*modules: torch.nn.Module):
    saved = [(p, p.requires_grad) for m in modules for p in m.parameters()]
    for p, _ in saved:
        p.requires_grad_(False)
    try:
        yield
    finally:
        for p, flag in saved:
            p.requires_grad_(flag)


def total_loss(l_ce, l_adv_g, l_sytc, l_smtc, cfg: TrainConfig):
    """Weighted sum w1*CE + w2*adv_g + lambda*sytc + gamma*smtc."""
    return (
        cfg.w1 * l_ce
        + cfg.w2 * l_adv_g
        + cfg.gan.sytc_weight * l_sytc
        + cfg.gan.smtc_weight * l_smtc
    )


def _update_critic(
    x: SymbolBlock, y_bar: SymbolBlock, state: TrainState, cfg: TrainConfig, seed: int
) -> torch.Tensor:
    """One critic step on detached real (X) and fake (Y_bar) blocks."""
    xd = SymbolBlock(x.values.detach())
    fd = SymbolBlock(y_bar.values.detach())
    gp = gradient_penalty(xd, fd, state.critic, seed)
    d_real = critic_score(xd, state.critic)
    d_fake = critic_score(fd, state.critic)
    l_adv_d = critic_loss(d_real, d_fake, gp, cfg.gan.gp_coeff, cfg.gan.adv_mode)
    state.opt_critic.zero_grad()
    l_adv_d.backward()
    state.opt_critic.step()
    return l_adv_d.detach()


def jot_step(
    batch: SentenceBatch, state: TrainState, cfg: TrainConfig, seed: int
) -> LossBundle:
    """One joint step: critic update, then AEDM+generator update by L_total."""
    torch.manual_seed(derive_seed(seed, "jot-dropout"))
    x = state.aedm.encode(batch)
    realization = sample_realization(cfg.channel, batch.size, derive_seed(seed, "chan"))
    y = transmit(x, realization)
    y_bar = suppress(y, state.gen)

    l_adv_d = _update_critic(x, y_bar, state, cfg, derive_seed(seed, "gp"))

    with _frozen(state.critic):
        l_adv_g = generator_adv_loss(critic_score(y_bar, state.critic), cfg.gan.adv_mode)
        logits = state.aedm.decode(y_bar, batch)
        l_ce = cross_entropy_loss(logits, batch)
        l_sytc = syntactic_loss(x, y_bar)
        l_smtc = semantic_loss(x, y_bar, state.aedm)
        l_tot = total_loss(l_ce, l_adv_g, l_sytc, l_smtc, cfg)
        state.opt_aedm.zero_grad()
        state.opt_gen.zero_grad()
        l_tot.backward()
        state.opt_aedm.step()
        state.opt_gen.step()

    return LossBundle(
        l_ce=l_ce.item(),
        l_adv_g=l_adv_g.item(),
        l_adv_d=l_adv_d.item(),
        l_sytc=l_sytc.item(),
        l_smtc=l_smtc.item(),
        l_dstr=(cfg.gan.sytc_weight * l_sytc + cfg.gan.smtc_weight * l_smtc).item(),
        l_total=l_tot.item(),
        nmse=metrics.nmse(x.values.detach(), y_bar.values.detach()),
    ).assert_finite()


def gsdsm_step(
    x: SymbolBlock, y: SymbolBlock, state: TrainState, cfg: TrainConfig, seed: int
) -> LossBundle:
    """Critic step then generator step by w3*adv_g + distortion; AEDM untouched."""
    torch.manual_seed(derive_seed(seed, "gsdsm-dropout"))
    x = SymbolBlock(x.values.detach())
    y = SymbolBlock(y.values.detach())
    y_bar = suppress(y, state.gen)

    l_adv_d = _update_critic(x, y_bar, state, cfg, derive_seed(seed, "gp"))

    with _frozen(state.critic, state.aedm):
        l_adv_g = generator_adv_loss(critic_score(y_bar, state.critic), cfg.gan.adv_mode)
        l_sytc = syntactic_loss(x, y_bar)
        l_smtc = semantic_loss(x, y_bar, state.aedm)
        l_dstr = cfg.gan.sytc_weight * l_sytc + cfg.gan.smtc_weight * l_smtc
        l_g = cfg.w3 * l_adv_g + l_dstr
        state.opt_gen.zero_grad()
        l_g.backward()
        state.opt_gen.step()

    return LossBundle(
        l_ce=0.0,
        l_adv_g=l_adv_g.item(),
        l_adv_d=l_adv_d.item(),
        l_sytc=l_sytc.item(),
        l_smtc=l_smtc.item(),
        l_dstr=l_dstr.item(),
        l_total=l_g.item(),
        nmse=metrics.nmse(x.values, y_bar.values.detach()),
    ).assert_finite()


def aedm_with_gsdsm_step(
    y: SymbolBlock, batch: SentenceBatch, state: TrainState, cfg: TrainConfig, seed: int
) -> LossBundle:
    """Update encoder, decoder and generator together by cross entropy only.

    y must be graph-attached to the encoder so gradients reach W_e; the
    critic is not involved. Adversarial and distortion components are
    recorded as zero, not computed.
    """
    torch.manual_seed(derive_seed(seed, "alg3-dropout"))
    y_bar = suppress(y, state.gen)
    logits = state.aedm.decode(y_bar, batch)
    l_ce = cross_entropy_loss(logits, batch)
    state.opt_aedm.zero_grad()
    state.opt_gen.zero_grad()
    l_ce.backward()
    state.opt_aedm.step()
    state.opt_gen.step()
    return LossBundle(l_ce=l_ce.item(), l_total=l_ce.item()).assert_finite()


def baseline_ce_step(
    batch: SentenceBatch, state: TrainState, cfg: TrainConfig, seed: int
) -> LossBundle:
    """CE-only step for the GSDSM-less SC baselines, with optional equalization."""
    torch.manual_seed(derive_seed(seed, "ce-dropout"))
    x = state.aedm.encode(batch)
    realization = sample_realization(cfg.channel, batch.size, derive_seed(seed, "chan"))
    y = transmit(x, realization)
    y = _maybe_equalize(y, realization, cfg.channel, seed)
    logits = state.aedm.decode(y, batch)
    l_ce = cross_entropy_loss(logits, batch)
    state.opt_aedm.zero_grad()
    l_ce.backward()
    state.opt_aedm.step()
    return LossBundle(l_ce=l_ce.item(), l_total=(cfg.w1 * l_ce).item()).assert_finite()


def _maybe_equalize(y: SymbolBlock, realization, chan: ChannelConfig, seed: int) -> SymbolBlock:
    if chan.csi == CSI_PERFECT:
        return equalize(y, realization.h)
    if chan.csi == CSI_IMPERFECT:
        est = CsiEstimate(realization.h, chan.csi_error_var, seed=derive_seed(seed, "csi"))
        return equalize(y, est)
    return y


@dataclass
class TrainResult:
    log: list[dict]
    best_checkpoint: Path | None
    last_checkpoint: Path | None
    best_val_bleu1: float | None


def train(
    sentences: Sequence[list[str]],
    vocab: Vocabulary,
    cfg: TrainConfig,
    out_dir: str | Path,
    val_sentences: Sequence[list[str]] | None = None,
    aedm_cfg: AedmConfig | None = None,
) -> TrainResult:
    """Run the configured scheme over the tokenized corpus.

    Emits one JSON log line per epoch with the mean loss components, the mean
    nMSE(X, Y_bar) where a suppressor ran, and a checkpoint; the checkpoint
    with the best validation BLEU-1 is copied to best.pt.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    aedm_cfg = aedm_cfg or AedmConfig(vocab_size=len(vocab))
    torch.manual_seed(derive_seed(cfg.seed, "init"))
    state = build_state(aedm_cfg, cfg)

    log: list[dict] = []
    best_bleu: float | None = None
    best_path: Path | None = None
    last_path: Path | None = None
    log_path = out / LOG_NAME

    with log_path.open("w", encoding="utf-8") as log_fh:
        for epoch in range(1, cfg.epochs + 1):
            t0 = time.monotonic()
            sums: dict[str, float] = {}
            nmse_sum, nmse_n, n_steps = 0.0, 0, 0
            batches = batch_token_lists(
                sentences, vocab, cfg.batch_size, derive_seed(cfg.seed, "order", epoch)
            )
            for j, batch in enumerate(batches, start=1):
                seed = derive_seed(cfg.seed, "step", epoch, j)
                if cfg.framework != TI_GSC:
                    bundle = baseline_ce_step(batch, state, cfg, seed)
                elif cfg.scheme == JOT or j % cfg.n_altv != 0:
                    bundle = jot_step(batch, state, cfg, seed)
                else:
                    torch.manual_seed(derive_seed(seed, "alt-encode"))
                    x = state.aedm.encode(batch)
                    realization = sample_realization(
                        cfg.channel, batch.size, derive_seed(seed, "chan")
                    )
                    y = transmit(x, realization)
                    bundle = gsdsm_step(x, y, state, cfg, seed)
                    alg3 = aedm_with_gsdsm_step(y, batch, state, cfg, seed)
                    bundle.l_ce = alg3.l_ce
                for name in ("l_ce", "l_adv_g", "l_adv_d", "l_sytc", "l_smtc", "l_total"):
                    sums[name] = sums.get(name, 0.0) + getattr(bundle, name)
                if bundle.nmse is not None:
                    nmse_sum += bundle.nmse
                    nmse_n += 1
                n_steps += 1

            entry = {"epoch": epoch}
            entry.update({k: sums[k] / n_steps for k in sorted(sums)})
            entry["nmse"] = nmse_sum / nmse_n if nmse_n else None
            if val_sentences:
                entry["val_bleu1"] = validation_bleu1(
                    state, vocab, val_sentences, cfg, derive_seed(cfg.seed, "val")
                )
            entry["wall_seconds"] = time.monotonic() - t0
            log.append(entry)
            log_fh.write(json.dumps(entry) + "\n")
            log_fh.flush()

            if epoch % cfg.checkpoint_every == 0 or epoch == cfg.epochs:
                last_path = out / f"epoch_{epoch:03d}.pt"
                _save_full(last_path, state, cfg, aedm_cfg, step=epoch)
                score = entry.get("val_bleu1")
                if score is not None and (best_bleu is None or score > best_bleu):
                    best_bleu = score
                    best_path = out / "best.pt"
                    _save_full(best_path, state, cfg, aedm_cfg, step=epoch)

    return TrainResult(log=log, best_checkpoint=best_path, last_checkpoint=last_path,
                       best_val_bleu1=best_bleu)


def _save_full(path: Path, state: TrainState, cfg: TrainConfig, aedm_cfg: AedmConfig, step: int):
    save_checkpoint(
        path,
        state.aedm,
        step=step,
        extra_state={"generator": state.gen.state_dict(), "critic": state.critic.state_dict()},
        extra_config={"train": asdict(cfg)},
    )


def validation_bleu1(
    state: TrainState,
    vocab: Vocabulary,
    val_sentences: Sequence[list[str]],
    cfg: TrainConfig,
    seed: int,
) -> float:
    """Greedy-decode BLEU-1 on a capped validation slice through the channel."""
    subset = list(val_sentences)[: cfg.val_max_sentences]
    refs, hyps = [], []
    was_training = state.aedm.training
    state.aedm.eval()
    state.gen.eval()
    try:
        with torch.no_grad():
            for k, batch in enumerate(
                batch_token_lists(subset, vocab, min(64, len(subset)), seed, shuffle=False)
            ):
                x = state.aedm.encode(batch)
                realization = sample_realization(cfg.channel, batch.size, derive_seed(seed, k))
                y = transmit(x, realization)
                if cfg.framework == TI_GSC:
                    y = suppress(y, state.gen)
                else:
                    y = _maybe_equalize(y, realization, cfg.channel, derive_seed(seed, k))
                decoded = state.aedm.greedy_decode(y, max_len=cfg.max_len)
                for row_in, row_out in zip(batch.ids, decoded.ids):
                    refs.append(detokenize(row_in, vocab).split())
                    hyps.append(detokenize(row_out, vocab).split())
    finally:
        state.aedm.train(was_training)
        state.gen.train(was_training)
    return metrics.bleu(refs, hyps, max_order=1).score
