import math
import string

import numpy as np
import pytest

from tigsc.baselines import (
    ConvCodeConfig,
    DecodeError,
    HuffmanCodebook,
    conv_encode,
    fixed5_decode,
    fixed5_encode,
    qam16_demodulate,
    qam16_modulate,
    qam16_points,
    run_conventional,
    viterbi_decode,
)
from tigsc.channel import ChannelConfig
from tigsc.metrics import bleu


def random_text(rng, n, alphabet=string.ascii_lowercase + " "):
    return "".join(rng.choice(list(alphabet)) for _ in range(n))


class TestFixed5:
    def test_two_chars_ten_bits(self):
        assert fixed5_encode("ab").size == 10

    def test_roundtrip(self):
        import random

        rng = random.Random(0)
        for _ in range(50):
            text = random_text(rng, rng.randint(1, 60))
            assert fixed5_decode(fixed5_encode(text)) == text

    def test_out_of_alphabet_substituted(self):
        assert fixed5_decode(fixed5_encode("a,b")) == "a?b"

    def test_alphabet_capacity(self):
        # All 28 used symbols roundtrip; a 33rd symbol cannot exist in 5 bits,
        # out-of-alphabet input falls to the substitution code.
        text = "abcdefghijklmnopqrstuvwxyz ?"
        assert fixed5_decode(fixed5_encode(text)) == text
        assert fixed5_decode(fixed5_encode("é")) == "?"


class TestHuffman:
    def test_classic_construction(self):
        cb = HuffmanCodebook.from_frequencies({"a": 0.5, "b": 0.25, "c": 0.25})
        assert cb.code_lengths == {"a": 1, "b": 2, "c": 2}
        assert cb.mean_code_length({"a": 0.5, "b": 0.25, "c": 0.25}) == pytest.approx(1.5)

    def test_prefix_free(self):
        cb = HuffmanCodebook.from_text("the quick brown fox jumps over the lazy dog")
        codes = list(cb.codes.values())
        for i, a in enumerate(codes):
            for j, b in enumerate(codes):
                if i != j:
                    assert not b.startswith(a)

    def test_roundtrip(self):
        import random

        rng = random.Random(1)
        corpus = random_text(rng, 500)
        cb = HuffmanCodebook.from_text(corpus)
        for _ in range(50):
            text = random_text(rng, rng.randint(1, 80))
            assert cb.decode(cb.encode(text)) == text

    def test_single_symbol_degenerate(self):
        cb = HuffmanCodebook.from_frequencies({"a": 1.0})
        assert cb.code_lengths == {"a": 1}
        assert cb.decode(cb.encode("aaaa")) == "aaaa"

    def test_unknown_char_escapes(self):
        cb = HuffmanCodebook.from_text("abc")
        assert cb.decode(cb.encode("axb")) == "a?b"

    def test_truncated_bitstream_raises(self):
        cb = HuffmanCodebook.from_frequencies({"a": 0.5, "b": 0.25, "c": 0.25})
        bits = cb.encode("ab")  # 1 bit + 2 bits; dropping one leaves a dangling prefix
        with pytest.raises(DecodeError):
            cb.decode(bits[:-1])
        # Partial mode truncates at the last valid symbol instead.
        assert cb.decode(bits[:-1], partial=True) == "a"

    def test_skewed_profile_beats_five_bits(self):
        # English-like skew keeps the average code under 5 bits per char.
        from collections import Counter

        corpus = "the quick brown fox jumps over the lazy dog " * 20
        cb = HuffmanCodebook.from_text(corpus)
        assert cb.mean_code_length(dict(Counter(corpus))) <= 5.0


class TestConvCode:
    def test_all_zero_codeword(self):
        assert not conv_encode(np.zeros(64, dtype=np.uint8)).any()

    def test_output_length(self):
        assert conv_encode(np.ones(100, dtype=np.uint8)).size == 2 * (100 + 6)

    def test_noiseless_roundtrip(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            bits = rng.integers(0, 2, rng.integers(1, 300)).astype(np.uint8)
            assert np.array_equal(viterbi_decode(conv_encode(bits)), bits)

    def test_single_error_always_corrected(self):
        rng = np.random.default_rng(3)
        bits = rng.integers(0, 2, 100).astype(np.uint8)
        coded = conv_encode(bits)
        for i in range(coded.size):
            corrupted = coded.copy()
            corrupted[i] ^= 1
            assert np.array_equal(viterbi_decode(corrupted), bits), f"flip at {i}"

    def test_nonzero_polynomials_required(self):
        with pytest.raises(ValueError):
            ConvCodeConfig(polynomials=(0, 0o171))

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            conv_encode(np.zeros(0, dtype=np.uint8))


class TestQam16:
    def test_roundtrip(self):
        rng = np.random.default_rng(4)
        bits = rng.integers(0, 2, 4000).astype(np.uint8)
        assert np.array_equal(qam16_demodulate(qam16_modulate(bits)), bits)

    def test_unit_mean_energy(self):
        pts = qam16_points()
        assert pts.size == 16
        # Closed form: mean of (a^2+b^2) over a,b in {±1,±3} is 10; scale 1/sqrt(10).
        assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_gray_neighbors_differ_in_one_bit(self):
        # Along each axis, adjacent amplitude levels flip exactly one bit.
        gray = {-3.0: (0, 0), -1.0: (0, 1), 1.0: (1, 1), 3.0: (1, 0)}
        levels = [-3.0, -1.0, 1.0, 3.0]
        for a, b in zip(levels, levels[1:]):
            diff = sum(x != y for x, y in zip(gray[a], gray[b]))
            assert diff == 1

    def test_decision_region_radius(self):
        # Perturbations below half the minimum distance (1/sqrt(10)) never flip bits.
        rng = np.random.default_rng(5)
        bits = rng.integers(0, 2, 400).astype(np.uint8)
        sym = qam16_modulate(bits)
        radius = 0.999 / math.sqrt(10.0)
        angles = rng.uniform(0, 2 * np.pi, sym.size)
        radii = rng.uniform(0, radius, sym.size)
        # Per-axis components of any such perturbation stay below 1/sqrt(10).
        perturbed = sym + radii * np.exp(1j * angles)
        assert np.array_equal(qam16_demodulate(perturbed), bits)


class TestConventionalChain:
    def test_noiseless_chain_is_exact(self):
        sentences = ["the cat sat on the mat", "a quick brown fox"]
        cfg = ChannelConfig(kind="awgn", snr_db=300.0)
        for source in ("fixed5", "huffman"):
            result = run_conventional(sentences, source, use_csi=True, channel_cfg=cfg, seed=0)
            assert result.decoded == sentences
            assert result.bit_errors == 0
            refs = [s.split() for s in sentences]
            hyps = [s.split() for s in result.decoded]
            assert bleu(refs, hyps, max_order=1).score == 1.0

    def test_rayleigh_csi_beats_no_csi(self):
        import random

        rng = random.Random(6)
        words = ["alpha", "bravo", "charlie", "delta", "echo", "fox", "golf", "hotel"]
        sentences = [" ".join(rng.choice(words) for _ in range(6)) for _ in range(500)]
        cfg = ChannelConfig(kind="rayleigh", snr_db=12.0)
        refs = [s.split() for s in sentences]
        with_csi = run_conventional(sentences, "fixed5", True, cfg, seed=7)
        without = run_conventional(sentences, "fixed5", False, cfg, seed=7)
        b_with = bleu(refs, [t.split() for t in with_csi.decoded], max_order=1).score
        b_without = bleu(refs, [t.split() for t in without.decoded], max_order=1).score
        assert b_with > b_without

    def test_huffman_sends_fewer_symbols_than_fixed5(self):
        text = "the quick brown fox jumps over the lazy dog " * 5
        cb = HuffmanCodebook.from_text(text)
        assert cb.encode(text).size < fixed5_encode(text).size

    def test_coded_beats_uncoded_at_6db_bpsk(self):
        # BPSK over AWGN at 6 dB symbol SNR; >= 1e5 information bits each arm.
        rng = np.random.default_rng(8)
        n = 100_000
        info = rng.integers(0, 2, n).astype(np.uint8)
        sigma2 = 10 ** (-0.6)

        def bpsk_channel(bits, rng):
            tx = 1.0 - 2.0 * bits.astype(np.float64)
            rx = tx + rng.normal(0.0, math.sqrt(sigma2 / 2.0), bits.size)
            return (rx < 0).astype(np.uint8)

        uncoded_rx = bpsk_channel(info, np.random.default_rng(9))
        uncoded_ber = np.mean(uncoded_rx != info)
        coded = conv_encode(info)
        coded_rx = bpsk_channel(coded, np.random.default_rng(10))
        decoded = viterbi_decode(coded_rx)
        coded_ber = np.mean(decoded != info)
        assert uncoded_ber > 0  # the channel actually flips bits
        assert coded_ber < uncoded_ber
