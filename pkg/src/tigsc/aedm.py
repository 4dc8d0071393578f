"""Transformer semantic transceiver.

The encoder maps token ids to complex channel symbols (d_sym per token),
power-normalized per sentence over non-pad positions. The decoder treats the
received (or distortion-suppressed) symbol block as cross-attention memory
and emits token logits under a causal mask. The first decoder block, queried
with a lone start token, doubles as the differentiable feature map used by
the semantic distortion loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

from .channel import SymbolBlock
from .textcorpus import END_ID, PAD_ID, START_ID, SentenceBatch

CHECKPOINT_FORMAT = 1


@dataclass
class AedmConfig:
    vocab_size: int
    num_layers: int = 4
    num_heads: int = 8
    d_model: int = 128
    d_ff: int = 512
    d_sym: int = 16
    dropout: float = 0.1

    def __post_init__(self):
        if self.d_model % self.num_heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by num_heads {self.num_heads}")
        if self.d_sym < 1:
            raise ValueError(f"d_sym must be >= 1, got {self.d_sym}")


class PositionalEncoding(nn.Module):
    def __init__(self, d_model: int, max_len: int = 512):
        super().__init__()
        pos = torch.arange(max_len).unsqueeze(1)
        div = torch.exp(torch.arange(0, d_model, 2) * (-math.log(10000.0) / d_model))
        pe = torch.zeros(max_len, d_model)
        pe[:, 0::2] = torch.sin(pos * div)
        pe[:, 1::2] = torch.cos(pos * div)
        self.register_buffer("pe", pe)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.pe[: x.shape[1]]


class SemanticTransceiver(nn.Module):
    """Encoder/decoder pair; holds W_e and W_d as one module."""

    def __init__(self, config: AedmConfig):
        super().__init__()
        self.config = config
        c = config
        self.embedding = nn.Embedding(c.vocab_size, c.d_model, padding_idx=PAD_ID)
        self.positional = PositionalEncoding(c.d_model)
        self.dropout = nn.Dropout(c.dropout)
        enc_layer = nn.TransformerEncoderLayer(
            c.d_model, c.num_heads, c.d_ff, c.dropout, activation="relu", batch_first=True
        )
        self.encoder = nn.TransformerEncoder(enc_layer, c.num_layers, enable_nested_tensor=False)
        # Channel adapters around the transformer stacks.
        self.to_symbols = nn.Sequential(
            nn.Linear(c.d_model, c.d_ff), nn.ReLU(), nn.Linear(c.d_ff, c.d_sym * 2)
        )
        self.from_symbols = nn.Sequential(
            nn.Linear(c.d_sym * 2, c.d_ff), nn.ReLU(), nn.Linear(c.d_ff, c.d_model)
        )
        self.decoder_layers = nn.ModuleList(
            nn.TransformerDecoderLayer(
                c.d_model, c.num_heads, c.d_ff, c.dropout, activation="relu", batch_first=True
            )
            for _ in range(c.num_layers)
        )
        self.out_proj = nn.Linear(c.d_model, c.vocab_size)

    # -- encoder side -----------------------------------------------------

    def encode(self, batch: SentenceBatch) -> SymbolBlock:
        """Token ids to channel symbols, unit mean power per sentence.

        Pad positions are zeroed so they carry no transmit energy; the power
        normalization runs over non-pad complex entries only.
        """
        ids = batch.ids
        if int(ids.max()) >= self.config.vocab_size:
            raise ValueError(f"token id {int(ids.max())} >= vocab_size {self.config.vocab_size}")
        mask = batch.pad_mask
        x = self.dropout(self.positional(self.embedding(ids) * math.sqrt(self.config.d_model)))
        x = self.encoder(x, src_key_padding_mask=~mask)
        sym = self.to_symbols(x).view(ids.shape[0], ids.shape[1], self.config.d_sym, 2)
        sym = sym * mask.to(sym.dtype)[:, :, None, None]
        # Per-sentence RMS over non-pad complex entries.
        sq = sym.pow(2).sum(dim=-1)
        count = mask.to(sym.dtype).sum(dim=1) * self.config.d_sym
        power = sq.sum(dim=(1, 2)) / count
        sym = sym / torch.sqrt(power.clamp_min(1e-12)).view(-1, 1, 1, 1)
        return SymbolBlock(values=sym)

    # -- decoder side -----------------------------------------------------

    def _memory(self, y: SymbolBlock) -> torch.Tensor:
        v = y.values
        return self.from_symbols(v.reshape(v.shape[0], v.shape[1], -1))

    def _decode_states(self, memory: torch.Tensor, prefix_ids: torch.Tensor) -> torch.Tensor:
        t = self.dropout(
            self.positional(self.embedding(prefix_ids) * math.sqrt(self.config.d_model))
        )
        causal = nn.Transformer.generate_square_subsequent_mask(
            prefix_ids.shape[1], dtype=t.dtype
        )
        for layer in self.decoder_layers:
            t = layer(t, memory, tgt_mask=causal)
        return t

    def decode(self, y: SymbolBlock, targets: SentenceBatch) -> torch.Tensor:
        """Teacher-forced logits: position t predicts targets.ids[:, t] from
        the prefix strictly before t. Returns B x (L-1) x vocab."""
        if y.values.shape[0] != targets.ids.shape[0]:
            raise ValueError("batch size mismatch between symbols and targets")
        states = self._decode_states(self._memory(y), targets.ids[:, :-1])
        return self.out_proj(states)

    def greedy_decode(self, y: SymbolBlock, max_len: int = 32) -> SentenceBatch:
        """Autoregressive argmax from START until END or max_len content tokens."""
        if max_len < 1:
            raise ValueError(f"max_len must be >= 1, got {max_len}")
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                b = y.values.shape[0]
                memory = self._memory(y)
                prefix = torch.full((b, 1), START_ID, dtype=torch.int64)
                done = torch.zeros(b, dtype=torch.bool)
                for _ in range(max_len + 1):
                    logits = self.out_proj(self._decode_states(memory, prefix)[:, -1])
                    nxt = logits.argmax(dim=-1)
                    nxt[done] = PAD_ID
                    done |= nxt == END_ID
                    prefix = torch.cat((prefix, nxt.unsqueeze(1)), dim=1)
                    if bool(done.all()):
                        break
                sentences = []
                for row in prefix[:, 1:].tolist():
                    content = []
                    for tok in row:
                        if tok in (END_ID, PAD_ID):
                            break
                        content.append(tok)
                    sentences.append(content[:max_len])
                return SentenceBatch.from_token_ids(sentences)
        finally:
            self.train(was_training)

    def feature_map(self, y: SymbolBlock) -> torch.Tensor:
        """Output of the first decoder block queried with a lone start token.

        Differentiable w.r.t. y through the cross-attention path; dropout is
        forced off so the map is a deterministic measurement. Shape B x 1 x d_model.
        """
        was_training = self.training
        self.eval()
        try:
            memory = self._memory(y)
            start = torch.full((y.values.shape[0], 1), START_ID, dtype=torch.int64)
            t = self.positional(self.embedding(start) * math.sqrt(self.config.d_model))
            return self.decoder_layers[0](t, memory)
        finally:
            self.train(was_training)


def cross_entropy_loss(logits: torch.Tensor, targets: SentenceBatch) -> torch.Tensor:
    """Mean -log q(w_i) over non-pad target positions (START excluded, END kept)."""
    gold = targets.ids[:, 1:]
    return F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), gold.reshape(-1), ignore_index=PAD_ID
    )


def save_checkpoint(
    path: str | Path,
    model: SemanticTransceiver,
    step: int = 0,
    extra_state: dict | None = None,
    extra_config: dict | None = None,
) -> None:
    """Named-tensor container; load(save(x)) is bit-exact on every tensor."""
    blob = {
        "format": CHECKPOINT_FORMAT,
        "config": asdict(model.config),
        "step": step,
        "aedm": model.state_dict(),
    }
    if extra_state:
        blob.update(extra_state)
    if extra_config:
        blob["extra_config"] = extra_config
    torch.save(blob, Path(path))


def load_checkpoint(path: str | Path) -> tuple[SemanticTransceiver, dict]:
    blob = torch.load(Path(path), map_location="cpu", weights_only=False)
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format: {blob.get('format')!r}")
    model = SemanticTransceiver(AedmConfig(**blob["config"]))
    model.load_state_dict(blob["aedm"])
    model.eval()
    return model, blob
