"""Conventional digital chains: source coding, convolutional coding, 16-QAM.

Two source codes (fixed 5-bit and canonical Huffman over character
frequencies) feed a rate-1/2 constraint-length-7 convolutional code
(generators 133/171 octal, zero-tail terminated) decoded by hard-decision
Viterbi, modulated as Gray-labeled 16-QAM at unit average symbol energy.
Each sentence is one frame. The chain is lossless end to end in the absence
of channel errors.
"""

from __future__ import annotations

import heapq
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import torch

from .channel import (
    ChannelConfig,
    SymbolBlock,
    equalize,
    sample_realization,
    transmit,
)
from .seeding import derive_seed

SUBSTITUTE_CHAR = "?"


class DecodeError(ValueError):
    pass


# -- fixed 5-bit source code -------------------------------------------------

# 26 letters + space + substitution + pad + 3 spare codes = 32 symbols.
_FIXED5_ALPHABET = "abcdefghijklmnopqrstuvwxyz ?"
_FIXED5_TO_CODE = {ch: i for i, ch in enumerate(_FIXED5_ALPHABET)}
_FIXED5_SUB = _FIXED5_TO_CODE[SUBSTITUTE_CHAR]
_FIXED5_PAD = len(_FIXED5_ALPHABET)  # 28; 29..31 spare


def fixed5_encode(text: str) -> np.ndarray:
    """5 bits per character; out-of-alphabet characters take the substitution code."""
    codes = np.array([_FIXED5_TO_CODE.get(ch, _FIXED5_SUB) for ch in text], dtype=np.uint8)
    shifts = np.arange(4, -1, -1)
    return ((codes[:, None] >> shifts[None, :]) & 1).astype(np.uint8).reshape(-1)


def fixed5_decode(bits: np.ndarray) -> str:
    bits = np.asarray(bits, dtype=np.uint8)
    usable = bits[: bits.size - bits.size % 5].reshape(-1, 5)
    codes = usable @ (1 << np.arange(4, -1, -1))
    chars = []
    for code in codes:
        if code < len(_FIXED5_ALPHABET):
            chars.append(_FIXED5_ALPHABET[code])
        elif code != _FIXED5_PAD:
            chars.append(SUBSTITUTE_CHAR)
    return "".join(chars)


# -- canonical Huffman over characters ----------------------------------------

@dataclass
class HuffmanCodebook:
    """Canonical prefix-free code; ESC covers characters unseen at build time."""

    code_lengths: dict[str, int]
    codes: dict[str, str] = field(init=False)

    ESC = "\x1b"

    def __post_init__(self):
        # Canonical assignment: sort by (length, symbol), count upward.
        ordered = sorted(self.code_lengths.items(), key=lambda kv: (kv[1], kv[0]))
        self.codes = {}
        code = 0
        prev_len = 0
        for sym, length in ordered:
            code <<= length - prev_len
            self.codes[sym] = format(code, f"0{length}b")
            code += 1
            prev_len = length

    @classmethod
    def from_frequencies(cls, freqs: dict[str, float]) -> "HuffmanCodebook":
        if not freqs:
            raise ValueError("empty frequency table")
        if len(freqs) == 1:
            return cls(code_lengths={next(iter(freqs)): 1})
        heap = [(w, i, (sym,)) for i, (sym, w) in enumerate(sorted(freqs.items()))]
        heapq.heapify(heap)
        lengths = {s: 0 for s in freqs}
        tiebreak = len(heap)
        while len(heap) > 1:
            w1, _, s1 = heapq.heappop(heap)
            w2, _, s2 = heapq.heappop(heap)
            for s in s1 + s2:
                lengths[s] += 1
            heapq.heappush(heap, (w1 + w2, tiebreak, s1 + s2))
            tiebreak += 1
        return cls(code_lengths=lengths)

    @classmethod
    def from_text(cls, text: str) -> "HuffmanCodebook":
        freqs = Counter(text)
        freqs[cls.ESC] += 1
        return cls.from_frequencies(dict(freqs))

    def mean_code_length(self, freqs: dict[str, float]) -> float:
        total = sum(freqs.values())
        return sum(self.code_lengths[s] * w for s, w in freqs.items()) / total

    def encode(self, text: str) -> np.ndarray:
        esc = self.codes[self.ESC] if self.ESC in self.codes else None
        parts = []
        for ch in text:
            code = self.codes.get(ch, esc)
            if code is None:
                raise ValueError(f"character {ch!r} not in codebook and no escape symbol")
            parts.append(code)
        bitstring = "".join(parts)
        return (np.frombuffer(bitstring.encode(), dtype=np.uint8) - ord("0")).astype(np.uint8)

    def decode(self, bits: np.ndarray, partial: bool = False) -> str:
        """Walk the prefix code; a trailing partial symbol raises unless partial."""
        table = {v: k for k, v in self.codes.items()}
        max_len = max(self.code_lengths.values())
        chars = []
        current = ""
        for b in np.asarray(bits):
            current += "1" if b else "0"
            if current in table:
                sym = table[current]
                chars.append(SUBSTITUTE_CHAR if sym == self.ESC else sym)
                current = ""
            elif len(current) > max_len:
                if partial:
                    return "".join(chars)
                raise DecodeError(f"invalid code prefix {current!r}")
        if current and not partial:
            raise DecodeError(f"truncated bitstream: dangling prefix {current!r}")
        return "".join(chars)


# -- rate-1/2 convolutional code with hard-decision Viterbi --------------------

@dataclass
class ConvCodeConfig:
    rate_inverse: int = 2
    constraint_length: int = 7
    polynomials: tuple[int, int] = (0o133, 0o171)

    def __post_init__(self):
        if not all(self.polynomials):
            raise ValueError("generator polynomials must be nonzero")

    @property
    def n_states(self) -> int:
        return 1 << (self.constraint_length - 1)


def _branch_tables(cfg: ConvCodeConfig) -> tuple[np.ndarray, np.ndarray]:
    """next_state[s, bit] and 2-bit output symbol per transition.

    Register convention: the newest bit sits at the MSB; the state keeps the
    newest K-1 bits, so a destination state encodes its input bit in its MSB.
    """
    k = cfg.constraint_length
    states = np.arange(cfg.n_states)
    nxt = np.zeros((cfg.n_states, 2), dtype=np.int64)
    out = np.zeros((cfg.n_states, 2), dtype=np.int64)
    for bit in (0, 1):
        reg = (bit << (k - 1)) | states
        o0 = np.array([bin(r & cfg.polynomials[0]).count("1") & 1 for r in reg])
        o1 = np.array([bin(r & cfg.polynomials[1]).count("1") & 1 for r in reg])
        out[:, bit] = (o0 << 1) | o1
        nxt[:, bit] = reg >> 1
    return nxt, out


def conv_encode(bits: np.ndarray, cfg: ConvCodeConfig | None = None) -> np.ndarray:
    """Zero-tail terminated encoding: output length 2*(len + K - 1)."""
    cfg = cfg or ConvCodeConfig()
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        raise ValueError("empty input bitstream")
    nxt, out = _branch_tables(cfg)
    padded = np.concatenate([bits, np.zeros(cfg.constraint_length - 1, dtype=np.uint8)])
    coded = np.empty(2 * padded.size, dtype=np.uint8)
    st = 0
    for i, b in enumerate(padded):
        sym = out[st, b]
        coded[2 * i] = (sym >> 1) & 1
        coded[2 * i + 1] = sym & 1
        st = nxt[st, b]
    return coded


def viterbi_decode(coded: np.ndarray, cfg: ConvCodeConfig | None = None) -> np.ndarray:
    """Maximum-likelihood path under the hard-decision Hamming metric.

    Expects a zero-tail terminated stream and performs a full traceback from
    state 0; returns the information bits with the tail stripped.
    """
    cfg = cfg or ConvCodeConfig()
    coded = np.asarray(coded, dtype=np.uint8)
    if coded.size % 2:
        coded = coded[:-1]
    n_steps = coded.size // 2
    tail = cfg.constraint_length - 1
    if n_steps <= tail:
        raise DecodeError("coded stream shorter than the termination tail")
    _, out = _branch_tables(cfg)
    rx = (coded[0::2].astype(np.int64) << 1) | coded[1::2]
    popcount = np.array([0, 1, 1, 2], dtype=np.int64)

    n_states = cfg.n_states
    dest = np.arange(n_states)
    bit_of_dest = dest >> (cfg.constraint_length - 2)
    pred0 = (dest & (n_states // 2 - 1)) * 2       # even predecessor
    pred1 = pred0 + 1
    big = np.iinfo(np.int64).max // 4
    metric = np.full(n_states, big, dtype=np.int64)
    metric[0] = 0
    prev_state = np.empty((n_steps, n_states), dtype=np.int64)
    for t in range(n_steps):
        branch = popcount[out ^ rx[t]]             # states x 2
        c0 = metric[pred0] + branch[pred0, bit_of_dest]
        c1 = metric[pred1] + branch[pred1, bit_of_dest]
        take1 = c1 < c0
        metric = np.where(take1, c1, c0)
        prev_state[t] = np.where(take1, pred1, pred0)

    st = 0
    decoded = np.empty(n_steps, dtype=np.uint8)
    for t in range(n_steps - 1, -1, -1):
        decoded[t] = st >> (cfg.constraint_length - 2)
        st = prev_state[t, st]
    return decoded[: n_steps - tail]


# -- 16-QAM with Gray labeling -------------------------------------------------

_QAM_SCALE = 1.0 / math.sqrt(10.0)
# Per-axis Gray labels: 00, 01, 11, 10 over the levels -3, -1, +1, +3.
_LEVEL_BY_BITPAIR = np.array([-3.0, -1.0, 3.0, 1.0])  # index = 2*b0 + b1
_GRAY_BY_LEVEL_INDEX = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=np.uint8)


def qam16_points() -> np.ndarray:
    """All 16 constellation points at unit average energy."""
    levels = np.array([-3.0, -1.0, 1.0, 3.0])
    return (levels[:, None] + 1j * levels[None, :]).reshape(-1) * _QAM_SCALE


def qam16_modulate(bits: np.ndarray) -> np.ndarray:
    """Four bits per symbol (two per axis, Gray), zero-padded to a multiple of 4."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % 4:
        bits = np.concatenate([bits, np.zeros(4 - bits.size % 4, dtype=np.uint8)])
    quads = bits.reshape(-1, 4).astype(np.int64)
    re = _LEVEL_BY_BITPAIR[2 * quads[:, 0] + quads[:, 1]]
    im = _LEVEL_BY_BITPAIR[2 * quads[:, 2] + quads[:, 3]]
    return (re + 1j * im) * _QAM_SCALE


def qam16_demodulate(symbols: np.ndarray) -> np.ndarray:
    """Hard nearest-neighbor decision; thresholds at -2, 0, 2 per unscaled axis."""
    symbols = np.asarray(symbols) / _QAM_SCALE
    bits = np.empty((symbols.size, 4), dtype=np.uint8)
    thresholds = np.array([-2.0, 0.0, 2.0])
    bits[:, :2] = _GRAY_BY_LEVEL_INDEX[np.digitize(symbols.real, thresholds)]
    bits[:, 2:] = _GRAY_BY_LEVEL_INDEX[np.digitize(symbols.imag, thresholds)]
    return bits.reshape(-1)


# -- full conventional chain -----------------------------------------------------

SOURCE_FIXED5 = "fixed5"
SOURCE_HUFFMAN = "huffman"


@dataclass
class ConventionalResult:
    decoded: list[str]
    truncated: list[bool]
    bit_errors: int
    bits_total: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total if self.bits_total else 0.0


def run_conventional(
    sentences: list[str],
    source: str,
    use_csi: bool,
    channel_cfg: ChannelConfig,
    seed: int,
    codebook: HuffmanCodebook | None = None,
) -> ConventionalResult:
    """Source-code, channel-code, modulate, transmit, and invert the chain.

    One frame per sentence; zero-forcing equalization (perfect CSI) happens
    before demodulation when use_csi is set. An undecodable source tail
    truncates the sentence and flags it.
    """
    if source == SOURCE_HUFFMAN:
        if codebook is None:
            codebook = HuffmanCodebook.from_text("".join(sentences))
        src_encode = codebook.encode
        src_decode = lambda bits: codebook.decode(bits, partial=True)  # noqa: E731
    elif source == SOURCE_FIXED5:
        src_encode = fixed5_encode
        src_decode = fixed5_decode
    else:
        raise ValueError(f"unknown source code {source!r}")

    tail = ConvCodeConfig().constraint_length - 1
    decoded, truncated = [], []
    bit_errors = bits_total = 0
    for i, sentence in enumerate(sentences):
        info = src_encode(sentence)
        coded = conv_encode(info)
        tx = qam16_modulate(coded)
        rx = _through_channel(tx, channel_cfg, derive_seed(seed, "frame", i), use_csi)
        rx_bits = qam16_demodulate(rx)[: 2 * (info.size + tail)]
        est = viterbi_decode(rx_bits)
        bit_errors += int(np.sum(est != info))
        bits_total += info.size
        try:
            text = src_decode(est)
            flag = False
        except DecodeError:
            text = ""
            flag = True
        if source == SOURCE_HUFFMAN and len(text) < len(sentence):
            flag = True
        decoded.append(text)
        truncated.append(flag)
    return ConventionalResult(decoded, truncated, bit_errors, bits_total)


def _through_channel(
    symbols: np.ndarray, cfg: ChannelConfig, seed: int, use_csi: bool
) -> np.ndarray:
    """Send one complex frame through the shared fading/noise model."""
    vals = torch.from_numpy(
        np.ascontiguousarray(np.stack([symbols.real, symbols.imag], axis=-1)[None, :, None, :])
    ).to(torch.float32)
    realization = sample_realization(cfg, 1, seed)
    y = transmit(SymbolBlock(values=vals), realization)
    if use_csi:
        y = equalize(y, realization.h)
    out = y.values[0, :, 0, :].numpy()
    return out[:, 0] + 1j * out[:, 1]
