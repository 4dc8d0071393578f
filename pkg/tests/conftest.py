import random

import pytest
import torch

from tigsc.aedm import AedmConfig
from tigsc.textcorpus import SPECIAL_TOKENS, SentenceBatch, Vocabulary

WORD_BANK = [f"w{i:02d}" for i in range(40)]


def toy_vocabulary(words=WORD_BANK) -> Vocabulary:
    token_to_id = {t: i for i, t in enumerate(SPECIAL_TOKENS)}
    for i, w in enumerate(words):
        token_to_id[w] = 4 + i
    return Vocabulary(token_to_id=token_to_id)


def toy_sentences(n, seed=0, min_len=4, max_len=8, words=WORD_BANK):
    rng = random.Random(seed)
    return [[rng.choice(words) for _ in range(rng.randint(min_len, max_len))] for _ in range(n)]


def toy_batch(n=4, seed=0, vocab=None) -> SentenceBatch:
    vocab = vocab or toy_vocabulary()
    sents = toy_sentences(n, seed=seed)
    return SentenceBatch.from_token_ids([vocab.encode(s) for s in sents])


def small_aedm_config(vocab_size=44, **overrides) -> AedmConfig:
    cfg = dict(vocab_size=vocab_size, num_layers=2, d_model=64, d_ff=128, d_sym=16,
               num_heads=8, dropout=0.1)
    cfg.update(overrides)
    return AedmConfig(**cfg)


@pytest.fixture
def vocab():
    return toy_vocabulary()


@pytest.fixture(autouse=True)
def _seed_torch():
    torch.manual_seed(1234)


@pytest.fixture
def corpus_file(tmp_path):
    def make(lines, name="corpus.txt"):
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return make
