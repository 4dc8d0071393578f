"""Flat key-value run configuration.

Files hold `key = value` lines with # comments; keys are dotted and drawn
from a fixed schema. Unknown keys are errors, so typos fail fast instead of
silently running with a default.
"""

from __future__ import annotations

from pathlib import Path

from .aedm import AedmConfig
from .channel import ChannelConfig
from .gsdsm import GanLossConfig
from .textcorpus import CorpusConfig
from .training import TrainConfig


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _int_list(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def _str_list(s: str) -> list[str]:
    return [x.strip() for x in s.split(",") if x.strip()]


# key -> (parser, default); None default means "required when used".
SCHEMA: dict[str, tuple] = {
    "data.dir": (str, None),
    "corpus.path": (str, None),
    "corpus.min_len": (int, 4),
    "corpus.max_len": (int, 30),
    "corpus.train_fraction": (float, 0.9),
    "corpus.vocab_cap": (int, 20_000),
    "corpus.max_sentences": (int, 50_000),
    "channel.kind": (str, "awgn"),
    "channel.snr_db": (float, 12.0),
    "channel.rician_k": (float, 1.0),
    "channel.csi": (str, "none"),
    "channel.csi_error_var": (float, 0.0),
    "aedm.num_layers": (int, 4),
    "aedm.num_heads": (int, 8),
    "aedm.d_model": (int, 128),
    "aedm.d_ff": (int, 512),
    "aedm.d_sym": (int, 16),
    "aedm.dropout": (float, 0.1),
    "gan.gp_coeff": (float, 10.0),
    "gan.adv_mode": (str, "wgan_standard"),
    "loss.sytc_weight": (float, 1.0),
    "loss.smtc_weight": (float, 1.0),
    "train.scheme": (str, "jot"),
    "train.framework": (str, "ti-gsc"),
    "train.epochs": (int, 60),
    "train.batch_size": (int, 64),
    "train.lr_aedm": (float, 1e-4),
    "train.weight_decay_aedm": (float, 5e-4),
    "train.lr_gen": (float, 2e-4),
    "train.lr_critic": (float, 2e-4),
    "train.w1": (float, 1.0),
    "train.w2": (float, 0.01),
    "train.w3": (float, 0.01),
    "train.n_altv": (int, 2),
    "train.max_len": (int, 32),
    "train.val_max_sentences": (int, 100),
    "train.checkpoint_every": (int, 1),
    "eval.frameworks": (_str_list, ["ti-gsc", "sc-vanilla"]),
    "eval.channels": (_str_list, ["rician"]),
    "eval.snr_grid": (_int_list, list(range(0, 25, 3))),
    "eval.seeds": (_int_list, [0]),
    "eval.n_sentences": (int, 500),
    "eval.workers": (int, 1),
    "eval.batch_size": (int, 64),
    "eval.max_len": (int, 32),
    "eval.rho": (float, 0.1),
    "viz.top_n_words": (int, 11),
    "viz.max_per_word": (int, 150),
    "viz.snr_db": (int, 12),
    "viz.tsne_iters": (int, 1000),
}
# Checkpoint paths are framework-keyed: checkpoint.<framework-id> = path
CHECKPOINT_PREFIX = "checkpoint."


def parse_config(path: str | Path) -> dict:
    """Read a flat config file; fill schema defaults; reject unknown keys."""
    values: dict = {k: d for k, (_, d) in SCHEMA.items() if d is not None}
    values["checkpoints"] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key.startswith(CHECKPOINT_PREFIX):
            values["checkpoints"][key[len(CHECKPOINT_PREFIX):]] = value
            continue
        if key not in SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        parser = SCHEMA[key][0]
        try:
            values[key] = parser(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def defaults() -> dict:
    values = {k: d for k, (_, d) in SCHEMA.items() if d is not None}
    values["checkpoints"] = {}
    return values


def corpus_config(values: dict, seed: int) -> CorpusConfig:
    return CorpusConfig(
        min_len=values["corpus.min_len"],
        max_len=values["corpus.max_len"],
        train_fraction=values["corpus.train_fraction"],
        vocab_cap=values["corpus.vocab_cap"],
        max_sentences=values["corpus.max_sentences"],
        seed=seed,
    )


def channel_config(values: dict) -> ChannelConfig:
    return ChannelConfig(
        kind=values["channel.kind"],
        snr_db=values["channel.snr_db"],
        rician_k=values["channel.rician_k"],
        csi=values["channel.csi"],
        csi_error_var=values["channel.csi_error_var"],
    )


def aedm_config(values: dict, vocab_size: int) -> AedmConfig:
    return AedmConfig(
        vocab_size=vocab_size,
        num_layers=values["aedm.num_layers"],
        num_heads=values["aedm.num_heads"],
        d_model=values["aedm.d_model"],
        d_ff=values["aedm.d_ff"],
        d_sym=values["aedm.d_sym"],
        dropout=values["aedm.dropout"],
    )


def gan_config(values: dict) -> GanLossConfig:
    return GanLossConfig(
        gp_coeff=values["gan.gp_coeff"],
        sytc_weight=values["loss.sytc_weight"],
        smtc_weight=values["loss.smtc_weight"],
        adv_mode=values["gan.adv_mode"],
    )


def train_config(values: dict, seed: int) -> TrainConfig:
    return TrainConfig(
        epochs=values["train.epochs"],
        batch_size=values["train.batch_size"],
        lr_aedm=values["train.lr_aedm"],
        weight_decay_aedm=values["train.weight_decay_aedm"],
        lr_gen=values["train.lr_gen"],
        lr_critic=values["train.lr_critic"],
        w1=values["train.w1"],
        w2=values["train.w2"],
        w3=values["train.w3"],
        n_altv=values["train.n_altv"],
        scheme=values["train.scheme"],
        framework=values["train.framework"],
        seed=seed,
        channel=channel_config(values),
        gan=gan_config(values),
        max_len=values["train.max_len"],
        val_max_sentences=values["train.val_max_sentences"],
        checkpoint_every=values["train.checkpoint_every"],
    )
