"""Corpus ingestion: vocabulary construction, length filtering, padded batches.

Sentences are lowercased, punctuation is split into separate tokens, and only
sentences of 4 to 30 tokens survive filtering. Batches are padded to the
longest member plus start/end markers; id 0 is padding so the all-zeros row
is inert under masking.
"""

from __future__ import annotations

import json
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import torch

PAD_ID = 0
START_ID = 1
END_ID = 2
UNK_ID = 3

PAD_TOKEN = "<pad>"
START_TOKEN = "<start>"
END_TOKEN = "<end>"
UNK_TOKEN = "<unk>"

SPECIAL_TOKENS = (PAD_TOKEN, START_TOKEN, END_TOKEN, UNK_TOKEN)

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class CorpusError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace, with punctuation as separate tokens."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class CorpusConfig:
    min_len: int = 4
    max_len: int = 30
    train_fraction: float = 0.9
    vocab_cap: int = 20_000
    seed: int = 0
    # Desk-scale cap; None ingests the whole file.
    max_sentences: int | None = 50_000

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise CorpusError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.min_len > self.max_len:
            raise CorpusError(f"min_len {self.min_len} > max_len {self.max_len}")


@dataclass
class Vocabulary:
    token_to_id: dict[str, int]
    id_to_token: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.id_to_token:
            self.id_to_token = {i: t for t, i in self.token_to_id.items()}
        if len(self.id_to_token) != len(self.token_to_id):
            raise CorpusError("token_to_id is not invertible")
        for tok, want in zip(SPECIAL_TOKENS, range(4)):
            if self.token_to_id.get(tok) != want:
                raise CorpusError(f"special token {tok!r} must map to id {want}")

    def __len__(self) -> int:
        return len(self.token_to_id)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.token_to_id.get(t, UNK_ID) for t in tokens]

    def save(self, path: str | Path) -> None:
        specials = {t: self.token_to_id[t] for t in SPECIAL_TOKENS}
        tokens = {t: i for t, i in self.token_to_id.items() if t not in specials}
        blob = {"format": 1, "specials": specials, "tokens": tokens}
        Path(path).write_text(json.dumps(blob, ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        blob = json.loads(Path(path).read_text(encoding="utf-8"))
        if blob.get("format") != 1:
            raise CorpusError(f"unsupported vocabulary format: {blob.get('format')!r}")
        token_to_id = dict(blob["specials"])
        token_to_id.update(blob["tokens"])
        return cls(token_to_id={t: int(i) for t, i in token_to_id.items()})


@dataclass
class SentenceBatch:
    """Padded token-id matrix with per-sentence content lengths and pad mask.

    Every non-pad row is [START, w_1..w_n, END, PAD...]; `lengths` counts the
    content tokens w_i only.
    """

    ids: torch.Tensor       # int64, B x L
    lengths: torch.Tensor   # int64, B
    pad_mask: torch.Tensor  # bool, B x L; True where ids != PAD

    @classmethod
    def from_token_ids(cls, sentences: Sequence[Sequence[int]]) -> "SentenceBatch":
        lengths = torch.tensor([len(s) for s in sentences], dtype=torch.int64)
        width = int(lengths.max().item()) + 2
        ids = torch.full((len(sentences), width), PAD_ID, dtype=torch.int64)
        for j, sent in enumerate(sentences):
            ids[j, 0] = START_ID
            ids[j, 1 : 1 + len(sent)] = torch.tensor(sent, dtype=torch.int64)
            ids[j, 1 + len(sent)] = END_ID
        return cls(ids=ids, lengths=lengths, pad_mask=ids != PAD_ID)

    @property
    def size(self) -> int:
        return self.ids.shape[0]

    @property
    def width(self) -> int:
        return self.ids.shape[1]


def _filtered_sentences(corpus_path: str | Path, config: CorpusConfig) -> Iterator[list[str]]:
    path = Path(corpus_path)
    if not path.is_file():
        raise FileNotFoundError(f"corpus file not found: {path}")
    kept = 0
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            tokens = tokenize(line)
            if config.min_len <= len(tokens) <= config.max_len:
                yield tokens
                kept += 1
                if config.max_sentences is not None and kept >= config.max_sentences:
                    return


def build_vocabulary(corpus_path: str | Path, config: CorpusConfig) -> Vocabulary:
    """Keep the vocab_cap most frequent tokens; ties broken lexicographically."""
    counts: Counter[str] = Counter()
    n_sentences = 0
    for tokens in _filtered_sentences(corpus_path, config):
        counts.update(tokens)
        n_sentences += 1
    if n_sentences == 0:
        raise CorpusError(f"no sentences of {config.min_len}..{config.max_len} tokens in {corpus_path}")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[: config.vocab_cap]
    token_to_id = {t: i for i, t in enumerate(SPECIAL_TOKENS)}
    for offset, (token, _) in enumerate(ranked):
        token_to_id[token] = 4 + offset
    return Vocabulary(token_to_id=token_to_id)


def load_sentences(corpus_path: str | Path, config: CorpusConfig) -> list[list[str]]:
    return list(_filtered_sentences(corpus_path, config))


def split_sentences(
    sentences: list[list[str]], config: CorpusConfig
) -> tuple[list[list[str]], list[list[str]]]:
    """Deterministic shuffled train/test split by config.train_fraction."""
    order = list(range(len(sentences)))
    random.Random(config.seed).shuffle(order)
    n_train = max(1, int(len(sentences) * config.train_fraction))
    train = [sentences[i] for i in order[:n_train]]
    test = [sentences[i] for i in order[n_train:]]
    return train, test


def batch_sentences(
    corpus_path: str | Path,
    vocab: Vocabulary,
    batch_size: int,
    seed: int,
    config: CorpusConfig | None = None,
) -> Iterator[SentenceBatch]:
    """Stream shuffled, padded batches of the length-filtered corpus."""
    if batch_size < 1:
        raise CorpusError(f"batch_size must be >= 1, got {batch_size}")
    config = config or CorpusConfig(seed=seed)
    sentences = load_sentences(corpus_path, config)
    if not sentences:
        raise CorpusError(f"no sentences of {config.min_len}..{config.max_len} tokens in {corpus_path}")
    yield from batch_token_lists(sentences, vocab, batch_size, seed)


def batch_token_lists(
    sentences: Sequence[Sequence[str]],
    vocab: Vocabulary,
    batch_size: int,
    seed: int,
    shuffle: bool = True,
) -> Iterator[SentenceBatch]:
    if batch_size < 1:
        raise CorpusError(f"batch_size must be >= 1, got {batch_size}")
    order = list(range(len(sentences)))
    if shuffle:
        random.Random(seed).shuffle(order)
    for lo in range(0, len(order), batch_size):
        chunk = [vocab.encode(sentences[i]) for i in order[lo : lo + batch_size]]
        yield SentenceBatch.from_token_ids(chunk)


def detokenize(ids: Sequence[int] | torch.Tensor, vocab: Vocabulary) -> str:
    """Strip specials and join tokens with single spaces; UNK renders literally."""
    if isinstance(ids, torch.Tensor):
        ids = ids.tolist()
    words = []
    for i in ids:
        i = int(i)
        if i >= len(vocab) or i < 0:
            raise ValueError(f"token id {i} out of range for vocabulary of size {len(vocab)}")
        if i in (PAD_ID, START_ID, END_ID):
            continue
        words.append(vocab.id_to_token[i])
    return " ".join(words)
